#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include "cassikit/ops.hpp"
#include "cassikit/tensor.hpp"

namespace cassikit {

/// Measurement geometry: spatial-spectral (SS) keeps the snapshot at H x W;
/// single-disperser (SD) shears band i right by i*shift columns before
/// integration, widening the snapshot to H x (W + (C-1)*shift).
enum class System { ss, sd };

System system_from_string(const std::string& name);
std::string to_string(System system);

/// Linear dispersion: band i (0-based) is sheared by i * shift_per_band
/// pixels along the width axis.
struct DispersionModel {
  int shift_per_band = 1;

  int shift_for_band(int band) const { return band * shift_per_band; }
};

enum class MaskKind { binary, gray };

MaskKind mask_kind_from_string(const std::string& name);

/// Random coded aperture: Bernoulli(density) in {0,1} for binary, uniform
/// [0,1] for gray. Deterministic per seed.
Tensor generate_mask(std::uint64_t seed, int height, int width, MaskKind kind,
                     double density = 0.5);

/// Stack of per-band shifted masks S_i: plane i is the base mask translated
/// right by the band's dispersion shift, zero-filled at the aperture edge.
/// Plane 0 equals the base mask.
template <typename T>
TensorT<T> shift_mask_stack(const TensorT<T>& mask, DispersionModel disp,
                            int bands) {
  if (mask.channels() != 1) {
    throw std::invalid_argument("shift_mask_stack: mask must have 1 channel");
  }
  if (bands < 1) {
    throw std::invalid_argument("shift_mask_stack: bands must be >= 1");
  }
  if (disp.shift_per_band < 0) {
    throw std::invalid_argument("shift_mask_stack: negative shift");
  }
  if (disp.shift_for_band(bands - 1) >= mask.width() && bands > 1) {
    throw std::invalid_argument(
        "shift_mask_stack: shift " +
        std::to_string(disp.shift_for_band(bands - 1)) +
        " for the last band exceeds mask width " +
        std::to_string(mask.width()));
  }
  TensorT<T> stack(bands, mask.height(), mask.width());
  for (int b = 0; b < bands; ++b) {
    const int off = disp.shift_for_band(b);
    for (int y = 0; y < mask.height(); ++y) {
      const T* src = &mask(0, y, 0);
      T* dst = &stack(b, y, 0);
      for (int x = off; x < mask.width(); ++x) dst[x] = src[x - off];
    }
  }
  return stack;
}

/// SS-CASSI forward: Y = sum_i X_i (hadamard) S_i, shape H x W.
template <typename T>
TensorT<T> forward_ss(const TensorT<T>& cube, const TensorT<T>& stack) {
  if (!cube.same_shape(stack)) {
    throw std::invalid_argument("forward_ss: cube " + cube.shape_string() +
                                " vs mask stack " + stack.shape_string());
  }
  return ops::shear_sum(ops::hadamard(cube, stack), 0);
}

/// SD-CASSI forward: mask the scene, shear band i right by its dispersion
/// shift, integrate. Output is H x (W + (C-1)*shift).
template <typename T>
TensorT<T> forward_sd(const TensorT<T>& cube, const TensorT<T>& mask,
                      DispersionModel disp) {
  if (mask.channels() != 1 || mask.height() != cube.height() ||
      mask.width() != cube.width()) {
    throw std::invalid_argument("forward_sd: mask " + mask.shape_string() +
                                " does not match cube " + cube.shape_string());
  }
  TensorT<T> masked(cube.channels(), cube.height(), cube.width());
  for (int c = 0; c < cube.channels(); ++c) {
    const T* m = mask.plane(0).data();
    const T* x = cube.plane(c).data();
    T* o = masked.plane(c).data();
    for (std::size_t i = 0; i < cube.plane_size(); ++i) o[i] = m[i] * x[i];
  }
  return ops::shear_sum(masked, disp.shift_per_band);
}

/// Transpose of forward_ss: band i = Y (hadamard) S_i.
template <typename T>
TensorT<T> adjoint_ss(const TensorT<T>& plane, const TensorT<T>& stack) {
  if (plane.channels() != 1 || plane.height() != stack.height() ||
      plane.width() != stack.width()) {
    throw std::invalid_argument("adjoint_ss: snapshot " + plane.shape_string() +
                                " vs mask stack " + stack.shape_string());
  }
  TensorT<T> cube(stack.channels(), stack.height(), stack.width());
  for (int c = 0; c < stack.channels(); ++c) {
    const T* y = plane.plane(0).data();
    const T* s = stack.plane(c).data();
    T* o = cube.plane(c).data();
    for (std::size_t i = 0; i < stack.plane_size(); ++i) o[i] = y[i] * s[i];
  }
  return cube;
}

/// Extracts the C un-sheared H x W windows of an SD snapshot: channel i
/// starts at column i*shift.
template <typename T>
TensorT<T> shift_back(const TensorT<T>& plane, DispersionModel disp,
                      int bands) {
  if (plane.channels() != 1) {
    throw std::invalid_argument("shift_back: snapshot must have 1 channel");
  }
  const int w = plane.width() - disp.shift_for_band(bands - 1);
  if (bands < 1 || w < 1) {
    throw std::invalid_argument(
        "shift_back: snapshot width " + std::to_string(plane.width()) +
        " too small for " + std::to_string(bands) + " bands");
  }
  TensorT<T> cube(bands, plane.height(), w);
  for (int b = 0; b < bands; ++b) {
    const int off = disp.shift_for_band(b);
    for (int y = 0; y < plane.height(); ++y) {
      const T* src = &plane(0, y, off);
      T* dst = &cube(b, y, 0);
      for (int x = 0; x < w; ++x) dst[x] = src[x];
    }
  }
  return cube;
}

/// Transpose of forward_sd: band i = mask (hadamard) un-sheared window i.
template <typename T>
TensorT<T> adjoint_sd(const TensorT<T>& plane, const TensorT<T>& mask,
                      DispersionModel disp, int bands) {
  TensorT<T> windows = shift_back(plane, disp, bands);
  if (windows.height() != mask.height() || windows.width() != mask.width()) {
    throw std::invalid_argument("adjoint_sd: snapshot/mask geometry mismatch");
  }
  for (int b = 0; b < bands; ++b) {
    const T* m = mask.plane(0).data();
    T* o = windows.plane(b).data();
    for (std::size_t i = 0; i < windows.plane_size(); ++i) o[i] *= m[i];
  }
  return windows;
}

/// Ratio of measurement entries to cube entries: 1/C for SS,
/// (W + C - 1) / (W * C) for SD at unit dispersion step.
double measurement_rate(System system, int height, int width, int bands,
                        DispersionModel disp = {});

/// Forward/adjoint pair for one configured system. Bundles the mask, the
/// dispersion model and the band count; precomputes the per-band shifted
/// stack (SS) or the replicated mask (SD) so the same constant tensor can be
/// shared with a differentiation tape.
template <typename T>
class CassiOperatorT {
 public:
  CassiOperatorT(System system, TensorT<T> mask, DispersionModel disp,
                 int bands)
      : system_(system), mask_(std::move(mask)), disp_(disp), bands_(bands) {
    if (mask_.channels() != 1) {
      throw std::invalid_argument("cassi operator: mask must have 1 channel");
    }
    if (bands_ < 1) {
      throw std::invalid_argument("cassi operator: bands must be >= 1");
    }
    if (system_ == System::ss) {
      stack_ = shift_mask_stack(mask_, disp_, bands_);
    } else {
      stack_ = TensorT<T>(bands_, mask_.height(), mask_.width());
      for (int b = 0; b < bands_; ++b) {
        auto src = mask_.plane(0);
        std::copy(src.begin(), src.end(), stack_.plane(b).begin());
      }
    }
  }

  System system() const { return system_; }
  int bands() const { return bands_; }
  int height() const { return mask_.height(); }
  int width() const { return mask_.width(); }
  DispersionModel dispersion() const { return disp_; }
  const TensorT<T>& mask() const { return mask_; }

  /// Per-band mask planes: shifted stack for SS, replicated mask for SD. The
  /// forward map is y = shear_sum(cube * stack, shear_shift()).
  const TensorT<T>& mask_stack() const { return stack_; }
  int shear_shift() const {
    return system_ == System::ss ? 0 : disp_.shift_per_band;
  }

  int snapshot_width() const {
    return mask_.width() + (bands_ - 1) * shear_shift();
  }

  TensorT<T> forward(const TensorT<T>& cube) const {
    if (cube.channels() != bands_) {
      throw std::invalid_argument("cassi forward: cube has " +
                                  std::to_string(cube.channels()) +
                                  " bands, operator expects " +
                                  std::to_string(bands_));
    }
    if (system_ == System::ss) return forward_ss(cube, stack_);
    return forward_sd(cube, mask_, disp_);
  }

  TensorT<T> adjoint(const TensorT<T>& plane) const {
    if (plane.channels() != 1 || plane.height() != mask_.height() ||
        plane.width() != snapshot_width()) {
      throw std::invalid_argument(
          "cassi adjoint: snapshot " + plane.shape_string() +
          " does not match operator (expected 1x" +
          std::to_string(mask_.height()) + "x" +
          std::to_string(snapshot_width()) + ")");
    }
    if (system_ == System::ss) return adjoint_ss(plane, stack_);
    return adjoint_sd(plane, mask_, disp_, bands_);
  }

  /// diag(Phi Phi^T) as a snapshot-shaped plane: R = sum_i S_i^2 per pixel.
  TensorT<T> row_norms() const {
    return forward(ops::hadamard(stack_, stack_));
  }

 private:
  System system_;
  TensorT<T> mask_;
  DispersionModel disp_;
  int bands_;
  TensorT<T> stack_;
};

using CassiOperator = CassiOperatorT<float>;

/// A single 2D measurement with its provenance.
struct Snapshot {
  Tensor plane;  // 1 x H x W (SS) or 1 x H x (W + (C-1)*shift) (SD)
  System system = System::ss;
  std::uint64_t seed = 0;
  float noise_sigma = 0.0f;
};

/// Applies the operator and adds i.i.d. Gaussian noise of std `noise_sigma`
/// (seeded). Sigma 0 reproduces the noiseless forward output exactly.
Snapshot simulate(const Tensor& cube, const CassiOperator& op,
                  float noise_sigma, std::uint64_t seed);

}  // namespace cassikit
