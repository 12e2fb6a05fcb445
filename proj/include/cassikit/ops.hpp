#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "cassikit/tensor.hpp"

namespace cassikit::ops {

/// 2D convolution over a channel-major tensor.
///
/// `weight` packs an (out_channels x in_channels x k x k) kernel as a tensor
/// of shape (out_channels * in_channels, k, k); `bias` has shape
/// (out_channels, 1, 1). k is 1 or 3, padding is zero-fill of k/2, stride is
/// 1 or 2 (stride 2 requires even input height/width and halves the spatial
/// size exactly).
///
/// Every output element is accumulated in a fixed order (input channel, then
/// kernel row, then kernel column), so results are bitwise reproducible
/// regardless of the number of threads.
template <typename T>
TensorT<T> conv2d(const TensorT<T>& x, const TensorT<T>& weight,
                  const TensorT<T>& bias, int stride) {
  const int k = weight.height();
  if (k != weight.width() || (k != 1 && k != 3)) {
    throw std::invalid_argument("conv2d: kernel must be 1x1 or 3x3, got " +
                                weight.shape_string());
  }
  if (bias.height() != 1 || bias.width() != 1) {
    throw std::invalid_argument("conv2d: bias must be (outC, 1, 1), got " +
                                bias.shape_string());
  }
  const int in_c = x.channels();
  const int out_c = bias.channels();
  if (weight.channels() != out_c * in_c) {
    throw std::invalid_argument(
        "conv2d: weight channel count " + std::to_string(weight.channels()) +
        " does not match outC*inC = " + std::to_string(out_c * in_c));
  }
  if (stride != 1 && stride != 2) {
    throw std::invalid_argument("conv2d: stride must be 1 or 2");
  }
  if (stride == 2 && (x.height() % 2 != 0 || x.width() % 2 != 0)) {
    throw std::invalid_argument(
        "conv2d: stride 2 requires even spatial size, got " +
        x.shape_string());
  }

  const int h = x.height();
  const int w = x.width();
  const int out_h = h / stride;
  const int out_w = w / stride;
  const int pad = k / 2;
  TensorT<T> out(out_c, out_h, out_w);

#if defined(_OPENMP)
#pragma omp parallel for schedule(static)
#endif
  for (int oc = 0; oc < out_c; ++oc) {
    const T bias_v = bias(oc, 0, 0);
    for (int oy = 0; oy < out_h; ++oy) {
      auto out_row = out.row(oc, oy);
      std::fill(out_row.begin(), out_row.end(), bias_v);
    }
    for (int ic = 0; ic < in_c; ++ic) {
      for (int ky = 0; ky < k; ++ky) {
        const int oy_lo = (pad - ky > 0) ? (pad - ky + stride - 1) / stride : 0;
        const int oy_hi = std::min(out_h, (h - 1 - ky + pad) / stride + 1);
        for (int kx = 0; kx < k; ++kx) {
          const T wv = weight(oc * in_c + ic, ky, kx);
          const int ox_lo =
              (pad - kx > 0) ? (pad - kx + stride - 1) / stride : 0;
          const int ox_hi = std::min(out_w, (w - 1 - kx + pad) / stride + 1);
          const int dx = kx - pad;
          for (int oy = oy_lo; oy < oy_hi; ++oy) {
            const int iy = oy * stride + ky - pad;
            const T* in_row = &x(ic, iy, 0);
            T* out_row = &out(oc, oy, 0);
            if (stride == 1) {
              const T* in = in_row + dx;
              for (int ox = ox_lo; ox < ox_hi; ++ox) {
                out_row[ox] += wv * in[ox];
              }
            } else {
              for (int ox = ox_lo; ox < ox_hi; ++ox) {
                out_row[ox] += wv * in_row[2 * ox + dx];
              }
            }
          }
        }
      }
    }
  }
  return out;
}

/// Per-axis source coordinate for 2x bilinear upsampling with half-pixel
/// centers: s = (d + 0.5)/2 - 0.5, clamped to the border.
struct BilinearTap {
  int lo;
  int hi;
  double frac;  // weight of `hi`
};

inline BilinearTap bilinear_tap2x(int d, int n) {
  const double s = (d + 0.5) / 2.0 - 0.5;
  const double f = std::floor(s);
  int lo = static_cast<int>(f);
  int hi = lo + 1;
  const double frac = s - f;
  lo = std::clamp(lo, 0, n - 1);
  hi = std::clamp(hi, 0, n - 1);
  return {lo, hi, frac};
}

/// Doubles both spatial dimensions by bilinear interpolation (half-pixel
/// centers, border clamp). Exact on constant inputs.
template <typename T>
TensorT<T> bilinear_upsample2x(const TensorT<T>& x) {
  const int h = x.height();
  const int w = x.width();
  TensorT<T> out(x.channels(), 2 * h, 2 * w);
  std::vector<BilinearTap> col_taps(2 * w);
  for (int ox = 0; ox < 2 * w; ++ox) col_taps[ox] = bilinear_tap2x(ox, w);
  for (int c = 0; c < x.channels(); ++c) {
    for (int oy = 0; oy < 2 * h; ++oy) {
      const BilinearTap ty = bilinear_tap2x(oy, h);
      const T* row_lo = &x(c, ty.lo, 0);
      const T* row_hi = &x(c, ty.hi, 0);
      const T wy1 = static_cast<T>(ty.frac);
      const T wy0 = T(1) - wy1;
      T* out_row = &out(c, oy, 0);
      for (int ox = 0; ox < 2 * w; ++ox) {
        const BilinearTap& tx = col_taps[ox];
        const T wx1 = static_cast<T>(tx.frac);
        const T wx0 = T(1) - wx1;
        const T top = wx0 * row_lo[tx.lo] + wx1 * row_lo[tx.hi];
        const T bot = wx0 * row_hi[tx.lo] + wx1 * row_hi[tx.hi];
        out_row[ox] = wy0 * top + wy1 * bot;
      }
    }
  }
  return out;
}

template <typename T>
T sigmoid_scalar(T v) {
  return T(1) / (T(1) + std::exp(-v));
}

template <typename T>
TensorT<T> sigmoid(const TensorT<T>& x) {
  TensorT<T> out(x.channels(), x.height(), x.width());
  const T* in = x.data();
  T* o = out.data();
  for (std::size_t i = 0; i < x.size(); ++i) o[i] = sigmoid_scalar(in[i]);
  return out;
}

template <typename T>
TensorT<T> leaky_relu(const TensorT<T>& x, T slope) {
  TensorT<T> out(x.channels(), x.height(), x.width());
  const T* in = x.data();
  T* o = out.data();
  for (std::size_t i = 0; i < x.size(); ++i) {
    o[i] = in[i] > T(0) ? in[i] : slope * in[i];
  }
  return out;
}

namespace detail {
template <typename T>
void require_same_shape(const TensorT<T>& a, const TensorT<T>& b,
                        const char* op) {
  if (!a.same_shape(b)) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                a.shape_string() + " vs " + b.shape_string());
  }
}
}  // namespace detail

template <typename T>
TensorT<T> add(const TensorT<T>& a, const TensorT<T>& b) {
  detail::require_same_shape(a, b, "add");
  TensorT<T> out(a.channels(), a.height(), a.width());
  for (std::size_t i = 0; i < a.size(); ++i) {
    out.data()[i] = a.data()[i] + b.data()[i];
  }
  return out;
}

template <typename T>
TensorT<T> sub(const TensorT<T>& a, const TensorT<T>& b) {
  detail::require_same_shape(a, b, "sub");
  TensorT<T> out(a.channels(), a.height(), a.width());
  for (std::size_t i = 0; i < a.size(); ++i) {
    out.data()[i] = a.data()[i] - b.data()[i];
  }
  return out;
}

template <typename T>
TensorT<T> hadamard(const TensorT<T>& a, const TensorT<T>& b) {
  detail::require_same_shape(a, b, "hadamard");
  TensorT<T> out(a.channels(), a.height(), a.width());
  for (std::size_t i = 0; i < a.size(); ++i) {
    out.data()[i] = a.data()[i] * b.data()[i];
  }
  return out;
}

template <typename T>
TensorT<T> concat_channels(const TensorT<T>& a, const TensorT<T>& b) {
  if (a.height() != b.height() || a.width() != b.width()) {
    throw std::invalid_argument("concat_channels: spatial mismatch " +
                                a.shape_string() + " vs " + b.shape_string());
  }
  TensorT<T> out(a.channels() + b.channels(), a.height(), a.width());
  std::copy(a.data(), a.data() + a.size(), out.data());
  std::copy(b.data(), b.data() + b.size(), out.data() + a.size());
  return out;
}

/// Shears channel i right by i*shift columns, zero-fills, and sums the
/// channels into a single plane of width W + (C-1)*shift. With shift 0 this
/// is a plain per-pixel channel sum.
template <typename T>
TensorT<T> shear_sum(const TensorT<T>& x, int shift) {
  if (shift < 0) {
    throw std::invalid_argument("shear_sum: shift must be >= 0");
  }
  const int out_w = x.width() + (x.channels() - 1) * shift;
  TensorT<T> out(1, x.height(), out_w);
  for (int c = 0; c < x.channels(); ++c) {
    const int off = c * shift;
    for (int y = 0; y < x.height(); ++y) {
      const T* in_row = &x(c, y, 0);
      T* out_row = &out(0, y, off);
      for (int ix = 0; ix < x.width(); ++ix) out_row[ix] += in_row[ix];
    }
  }
  return out;
}

/// Sum of |x| over all entries, accumulated in double in flat order.
template <typename T>
T abs_sum(const TensorT<T>& x) {
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    acc += std::abs(static_cast<double>(x.data()[i]));
  }
  return static_cast<T>(acc);
}

/// Sum of x over all entries, accumulated in double in flat order.
template <typename T>
T sum_all(const TensorT<T>& x) {
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    acc += static_cast<double>(x.data()[i]);
  }
  return static_cast<T>(acc);
}

/// Deterministic inner product of two same-shaped tensors (double
/// accumulation, flat order).
template <typename T>
double dot(const TensorT<T>& a, const TensorT<T>& b) {
  detail::require_same_shape(a, b, "dot");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    acc += static_cast<double>(a.data()[i]) * static_cast<double>(b.data()[i]);
  }
  return acc;
}

template <typename T>
T max_value(const TensorT<T>& x) {
  T m = x.data()[0];
  for (std::size_t i = 1; i < x.size(); ++i) m = std::max(m, x.data()[i]);
  return m;
}

}  // namespace cassikit::ops
