#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

#include "cassikit/autodiff.hpp"
#include "cassikit/tensor.hpp"

namespace cassikit {

struct AdamOptions {
  double lr = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// First/second moment buffers and step counter for Adam, matching a
/// parameter set shape-for-shape.
template <typename T>
struct AdamStateT {
  AdamOptions options;
  NamedTensorsT<T> m;
  NamedTensorsT<T> v;
  std::int64_t t = 0;

  static AdamStateT zeros_like(const NamedTensorsT<T>& params,
                               AdamOptions options) {
    AdamStateT state;
    state.options = options;
    for (std::size_t i = 0; i < params.size(); ++i) {
      const auto& p = params.tensors[i];
      state.m.add(params.names[i],
                  TensorT<T>(p.channels(), p.height(), p.width()));
      state.v.add(params.names[i],
                  TensorT<T>(p.channels(), p.height(), p.width()));
    }
    return state;
  }
};

using AdamState = AdamStateT<float>;

/// One Adam update with bias correction, in place. Throws if any gradient is
/// non-finite, naming the offending parameter.
template <typename T>
void adam_step(NamedTensorsT<T>& params, const GradientSetT<T>& grads,
               AdamStateT<T>& state) {
  if (params.size() != grads.size() || params.size() != state.m.size()) {
    throw std::invalid_argument("adam_step: parameter/gradient/state sizes "
                                "disagree");
  }
  state.t += 1;
  const double beta1 = state.options.beta1;
  const double beta2 = state.options.beta2;
  const double corr1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
  const double corr2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));

  for (std::size_t i = 0; i < params.size(); ++i) {
    TensorT<T>& p = params.tensors[i];
    const TensorT<T>& g = grads.tensors[i];
    if (!p.same_shape(g)) {
      throw std::invalid_argument("adam_step: gradient shape mismatch for '" +
                                  params.names[i] + "'");
    }
    TensorT<T>& m = state.m.tensors[i];
    TensorT<T>& v = state.v.tensors[i];
    T* pd = p.data();
    T* md = m.data();
    T* vd = v.data();
    const T* gd = g.data();
    for (std::size_t j = 0; j < p.size(); ++j) {
      if (!std::isfinite(gd[j])) {
        throw std::runtime_error("adam_step: non-finite gradient in '" +
                                 params.names[i] + "' at flat index " +
                                 std::to_string(j));
      }
      const double gj = static_cast<double>(gd[j]);
      const double mj = beta1 * md[j] + (1.0 - beta1) * gj;
      const double vj = beta2 * vd[j] + (1.0 - beta2) * gj * gj;
      md[j] = static_cast<T>(mj);
      vd[j] = static_cast<T>(vj);
      const double m_hat = mj / corr1;
      const double v_hat = vj / corr2;
      pd[j] = static_cast<T>(pd[j] - state.options.lr * m_hat /
                                         (std::sqrt(v_hat) +
                                          state.options.epsilon));
    }
  }
}

}  // namespace cassikit
