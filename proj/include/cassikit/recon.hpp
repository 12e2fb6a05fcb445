#pragma once

#include <cstdint>
#include <vector>

#include "cassikit/adam.hpp"
#include "cassikit/autodiff.hpp"
#include "cassikit/imaging.hpp"
#include "cassikit/network.hpp"
#include "cassikit/tensor.hpp"

namespace cassikit {

/// Settings of one unsupervised reconstruction run.
struct RunConfig {
  int iterations = 2500;
  float lr = 0.01f;
  std::uint64_t seed = 0;   // seeds the random code Z
  bool noise_free = true;   // provenance; the optimization is noise-agnostic
  int log_every = 10;
  NetworkConfig net;        // bands, ablation switches, parameter seed

  void validate() const;
};

struct CurvePoint {
  int iteration = 0;
  double loss = 0.0;
  double psnr = 0.0;
  bool has_psnr = false;
};

struct ReconResult {
  Tensor cube;
  std::vector<CurvePoint> curve;
  double seconds = 0.0;
  std::uint64_t parameter_digest = 0;
};

/// Records the measurement-matching objective on the tape: the l1 norm of
/// (Y - forward(estimate)) under the operator's system. The subgradient of
/// |r| at r = 0 is 0.
template <typename T>
typename TapeT<T>::NodeId build_l1_loss_graph(TapeT<T>& tape,
                                              typename TapeT<T>::NodeId
                                                  estimate,
                                              const CassiOperatorT<T>& op,
                                              const TensorT<T>& measurement) {
  auto stack = tape.constant(op.mask_stack());
  auto predicted =
      tape.shear_sum(tape.hadamard(estimate, stack), op.shear_shift());
  auto residual = tape.sub(tape.constant(measurement), predicted);
  return tape.abs_sum(residual);
}

/// Sum of absolute residuals between the snapshot and forward(estimate).
double l1_measurement_loss(const Tensor& estimate, const Snapshot& y,
                           const CassiOperator& op);

/// Band-normalized adjoint of the measurement (each band scaled by its own
/// maximum). Used as the classical initialization reference.
Tensor adjoint_init(const Snapshot& y, const CassiOperator& op);

/// Runs the unsupervised optimization: draws Z once, initializes the network
/// from run.net.seed, then iterates forward / l1 loss / backward / Adam for
/// run.iterations steps. Logs (iteration, loss[, psnr]) every log_every
/// iterations and at the final iteration; the returned cube is evaluated
/// from the final parameters. Deterministic per (run.seed, run.net.seed).
ReconResult reconstruct(const Snapshot& y, const CassiOperator& op,
                        const RunConfig& run,
                        const Tensor* ground_truth = nullptr);

/// Per-band anisotropic total-variation proximal approximation
/// (dual gradient projection, `inner_iters` steps). Weight 0 is the
/// identity.
Tensor tv_denoise(const Tensor& cube, float weight, int inner_iters);

/// Default TV weight used by the GAP-TV baseline: 0.1 * max(Y).
float default_tv_weight(const Snapshot& y);

/// Classical baseline: generalized alternating projection with anisotropic
/// TV denoising. Iterates x += adjoint((Y - forward(x)) / R) with
/// R = diag(Phi Phi^T), then the TV proximal step; returns the cube clamped
/// to [0, 1].
Tensor gaptv_reconstruct(const Snapshot& y, const CassiOperator& op,
                         int iterations = 50, float tv_weight = -1.0f,
                         int tv_inner_iters = 5);

}  // namespace cassikit
