#include "cassikit/recon.hpp"

#include <chrono>
#include <cmath>
#include <cstring>
#include <stdexcept>
#include <string>

#include "cassikit/metrics.hpp"
#include "cassikit/ops.hpp"

namespace cassikit {

namespace {

void require_matching(const Snapshot& y, const CassiOperator& op,
                      const char* what) {
  if (y.system != op.system()) {
    throw std::invalid_argument(std::string(what) + ": snapshot is " +
                                to_string(y.system) + " but operator is " +
                                to_string(op.system()));
  }
  if (y.plane.channels() != 1 || y.plane.height() != op.height() ||
      y.plane.width() != op.snapshot_width()) {
    throw std::invalid_argument(
        std::string(what) + ": snapshot " + y.plane.shape_string() +
        " does not match operator (expected 1x" + std::to_string(op.height()) +
        "x" + std::to_string(op.snapshot_width()) + ")");
  }
}

std::uint64_t fnv1a_digest(const NamedTensors& params) {
  std::uint64_t hash = 1469598103934665603ULL;
  for (const Tensor& t : params.tensors) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(t.data());
    const std::size_t n = t.size() * sizeof(float);
    for (std::size_t i = 0; i < n; ++i) {
      hash ^= bytes[i];
      hash *= 1099511628211ULL;
    }
  }
  return hash;
}

}  // namespace

void RunConfig::validate() const {
  if (iterations < 1) {
    throw std::invalid_argument("run config: iterations must be >= 1");
  }
  if (!(lr > 0.0f)) {
    throw std::invalid_argument("run config: learning rate must be > 0");
  }
  if (log_every < 1) {
    throw std::invalid_argument("run config: log_every must be >= 1");
  }
  net.validate();
}

double l1_measurement_loss(const Tensor& estimate, const Snapshot& y,
                           const CassiOperator& op) {
  require_matching(y, op, "l1_measurement_loss");
  return ops::abs_sum(ops::sub(y.plane, op.forward(estimate)));
}

Tensor adjoint_init(const Snapshot& y, const CassiOperator& op) {
  require_matching(y, op, "adjoint_init");
  Tensor cube = op.adjoint(y.plane);
  for (int b = 0; b < cube.channels(); ++b) {
    auto plane = cube.plane(b);
    float band_max = 0.0f;
    for (float v : plane) band_max = std::max(band_max, v);
    if (band_max > 0.0f) {
      for (float& v : plane) v /= band_max;
    }
  }
  return cube;
}

ReconResult reconstruct(const Snapshot& y, const CassiOperator& op,
                        const RunConfig& run, const Tensor* ground_truth) {
  run.validate();
  require_matching(y, op, "reconstruct");
  if (run.net.bands != op.bands()) {
    throw std::invalid_argument("reconstruct: network bands " +
                                std::to_string(run.net.bands) +
                                " do not match operator bands " +
                                std::to_string(op.bands()));
  }
  if (ops::abs_sum(y.plane) == 0.0f) {
    throw std::invalid_argument("reconstruct: measurement is all zero");
  }
  if (ground_truth != nullptr &&
      (ground_truth->channels() != op.bands() ||
       ground_truth->height() != op.height() ||
       ground_truth->width() != op.width())) {
    throw std::invalid_argument("reconstruct: ground truth shape mismatch");
  }

  const auto start = std::chrono::steady_clock::now();

  const Tensor z =
      draw_random_code(run.seed, run.net.z_channels, op.height(), op.width());
  const Tensor input = make_conditional_input(z, y, op.dispersion(),
                                              op.bands(), run.net.input_mode);
  NamedTensors params = build_network(run.net, y.system);
  AdamState adam = AdamState::zeros_like(
      params, AdamOptions{.lr = run.lr});

  Tape tape;
  const auto input_node = tape.constant(input);
  const auto output_node = build_network_graph(tape, input_node, run.net,
                                               params);
  const auto loss_node = build_l1_loss_graph(tape, output_node, op, y.plane);

  ReconResult result;
  for (int it = 1; it <= run.iterations; ++it) {
    if (it > 1) {
      for (std::size_t i = 0; i < params.size(); ++i) {
        tape.set_parameter(static_cast<int>(i), params.tensors[i]);
      }
      tape.refresh();
    }
    const double loss = tape.scalar(loss_node);
    if (!std::isfinite(loss)) {
      throw std::runtime_error("reconstruct: loss became non-finite at "
                               "iteration " + std::to_string(it));
    }
    if (it % run.log_every == 0 || it == run.iterations) {
      CurvePoint point{it, loss, 0.0, false};
      if (ground_truth != nullptr) {
        point.psnr = psnr(*ground_truth, tape.value(output_node));
        point.has_psnr = true;
      }
      result.curve.push_back(point);
    }
    GradientSet grads = tape.backward(loss_node);
    adam_step(params, grads, adam);
  }

  for (std::size_t i = 0; i < params.size(); ++i) {
    tape.set_parameter(static_cast<int>(i), params.tensors[i]);
  }
  tape.refresh();
  result.cube = tape.value(output_node);
  result.parameter_digest = fnv1a_digest(params);
  result.seconds = std::chrono::duration<double>(
                       std::chrono::steady_clock::now() - start)
                       .count();
  return result;
}

Tensor tv_denoise(const Tensor& cube, float weight, int inner_iters) {
  if (weight < 0.0f) {
    throw std::invalid_argument("tv_denoise: weight must be >= 0");
  }
  if (weight == 0.0f || inner_iters <= 0) return cube;

  const int h = cube.height();
  const int w = cube.width();
  // Projected gradient step on the dual; 1/8 bounds the squared norm of the
  // forward-difference gradient operator.
  const float tau = 0.125f;
  Tensor out(cube.channels(), h, w);
  std::vector<float> qx(static_cast<std::size_t>(h) * w);
  std::vector<float> qy(static_cast<std::size_t>(h) * w);
  std::vector<float> u(static_cast<std::size_t>(h) * w);

  for (int b = 0; b < cube.channels(); ++b) {
    const float* f = cube.plane(b).data();
    std::fill(qx.begin(), qx.end(), 0.0f);
    std::fill(qy.begin(), qy.end(), 0.0f);

    auto recompute_u = [&] {
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          const std::size_t i = static_cast<std::size_t>(y) * w + x;
          float div = qx[i] + qy[i];
          if (x > 0) div -= qx[i - 1];
          if (y > 0) div -= qy[i - w];
          u[i] = f[i] - div;
        }
      }
    };

    for (int it = 0; it < inner_iters; ++it) {
      recompute_u();
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          const std::size_t i = static_cast<std::size_t>(y) * w + x;
          if (x + 1 < w) {
            qx[i] = std::clamp(qx[i] - tau * (u[i + 1] - u[i]), -weight,
                               weight);
          }
          if (y + 1 < h) {
            qy[i] = std::clamp(qy[i] - tau * (u[i + w] - u[i]), -weight,
                               weight);
          }
        }
      }
    }
    recompute_u();
    std::copy(u.begin(), u.end(), out.plane(b).begin());
  }
  return out;
}

float default_tv_weight(const Snapshot& y) {
  return 0.1f * ops::max_value(y.plane);
}

Tensor gaptv_reconstruct(const Snapshot& y, const CassiOperator& op,
                         int iterations, float tv_weight,
                         int tv_inner_iters) {
  require_matching(y, op, "gaptv_reconstruct");
  if (iterations < 1) {
    throw std::invalid_argument("gaptv: iterations must be >= 1");
  }
  if (tv_weight < 0.0f) tv_weight = default_tv_weight(y);

  const Tensor row_norms = op.row_norms();
  constexpr float kEps = 1e-6f;
  float largest = ops::max_value(row_norms);
  if (!(largest > kEps)) {
    throw std::invalid_argument("gaptv: diag(Phi Phi^T) is zero everywhere");
  }

  Tensor x(op.bands(), op.height(), op.width());
  Tensor scaled(1, op.height(), op.snapshot_width());
  for (int it = 0; it < iterations; ++it) {
    const Tensor residual = ops::sub(y.plane, op.forward(x));
    for (std::size_t i = 0; i < residual.size(); ++i) {
      const float r = row_norms.data()[i];
      scaled.data()[i] = r > kEps ? residual.data()[i] / r : 0.0f;
    }
    x = ops::add(x, op.adjoint(scaled));
    if (tv_weight > 0.0f) x = tv_denoise(x, tv_weight, tv_inner_iters);
  }

  for (std::size_t i = 0; i < x.size(); ++i) {
    x.data()[i] = std::clamp(x.data()[i], 0.0f, 1.0f);
  }
  return x;
}

}  // namespace cassikit
