#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "cassikit/autodiff.hpp"
#include "cassikit/imaging.hpp"
#include "cassikit/tensor.hpp"

namespace cassikit {

enum class InputMode { z_only, y_only, z_and_y };
enum class ArchMode { brb_only, ssam_only, full };

InputMode input_mode_from_string(const std::string& name);
ArchMode arch_mode_from_string(const std::string& name);
std::string to_string(InputMode mode);
std::string to_string(ArchMode mode);

/// Architecture and ablation settings of the conditional generator.
struct NetworkConfig {
  int bands = 0;
  int feature_width = 64;  // F; the bottleneck halves it internally
  int z_channels = 32;
  int scales = 3;  // fixed; two stride-2 levels below the full resolution
  InputMode input_mode = InputMode::z_and_y;
  ArchMode arch_mode = ArchMode::full;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Slope of the LeakyReLU used after hidden convolutions.
inline constexpr float kLeakySlope = 0.2f;

/// Channel count of the measurement feature maps fed to the network: the SS
/// snapshot contributes one plane, the SD snapshot its C un-sheared windows.
int measurement_channels(System system, int bands);

/// Channel count of the network input for the given ablation setting.
int input_channel_count(const NetworkConfig& config, System system);

/// Creates all learnable tensors in a fixed order with He-style uniform
/// initialization (bound sqrt(6/fan_in)) and zero biases; deterministic per
/// config seed.
NamedTensors build_network(const NetworkConfig& config, System system);

/// Uniform random code in [0, 0.1], drawn once per reconstruction run.
Tensor draw_random_code(std::uint64_t seed, int z_channels, int height,
                        int width);

/// Builds the network input from the random code and/or the max-normalized
/// measurement maps. Throws on an all-zero measurement (the normalization is
/// undefined).
Tensor make_conditional_input(const Tensor& z, const Snapshot& y,
                              DispersionModel disp, int bands,
                              InputMode input_mode);

namespace detail {

template <typename T>
using NodeId = typename TapeT<T>::NodeId;

/// Looks up the tape nodes of a conv layer's weight and bias by name.
template <typename T>
struct ParamNodes {
  const std::vector<std::string>* names;
  const std::vector<NodeId<T>>* nodes;

  NodeId<T> operator[](const std::string& name) const {
    for (std::size_t i = 0; i < names->size(); ++i) {
      if ((*names)[i] == name) return (*nodes)[i];
    }
    throw std::out_of_range("network graph: no parameter named '" + name +
                            "'");
  }
};

template <typename T>
NodeId<T> conv_layer(TapeT<T>& tape, NodeId<T> x, const ParamNodes<T>& p,
                     const std::string& prefix, int stride) {
  return tape.conv2d(x, p[prefix + ".w"], p[prefix + ".b"], stride);
}

/// Bottleneck residual block: 1x1 spectral skip plus a 1x1 -> 3x3 -> 1x1
/// bottleneck main path; the two are summed.
template <typename T>
NodeId<T> brb_graph(TapeT<T>& tape, NodeId<T> x, const ParamNodes<T>& p,
                    const std::string& prefix) {
  const T slope = static_cast<T>(kLeakySlope);
  NodeId<T> skip = conv_layer(tape, x, p, prefix + ".skip", 1);
  NodeId<T> main = tape.leaky_relu(conv_layer(tape, x, p, prefix + ".reduce", 1),
                                   slope);
  main = tape.leaky_relu(conv_layer(tape, main, p, prefix + ".mid", 1), slope);
  main = conv_layer(tape, main, p, prefix + ".expand", 1);
  return tape.add(main, skip);
}

/// Multi-scale spatial-spectral attention: two stride-2 descents, then
/// top-down refinement. Each scale predicts a 3D sigmoid attention map from
/// the upsampled coarser features, gates the (linear) feature convolution of
/// the current scale with it, and fuses the gated maps with the upsampled
/// coarser features. Scale 1 consumes the refined scale-2 output.
template <typename T>
NodeId<T> ssam_graph(TapeT<T>& tape, NodeId<T> x, const ParamNodes<T>& p) {
  const auto& shape = tape.value(x);
  if (shape.height() % 4 != 0 || shape.width() % 4 != 0) {
    throw std::invalid_argument(
        "ssam: spatial size must be divisible by 4, got " +
        shape.shape_string());
  }
  const T slope = static_cast<T>(kLeakySlope);
  NodeId<T> level1 = x;
  NodeId<T> level2 =
      tape.leaky_relu(conv_layer(tape, level1, p, "ssam.down1", 2), slope);
  NodeId<T> level3 =
      tape.leaky_relu(conv_layer(tape, level2, p, "ssam.down2", 2), slope);

  NodeId<T> up3 = tape.upsample2x(level3);
  NodeId<T> attn2 = tape.sigmoid(conv_layer(tape, up3, p, "ssam.att2", 1));
  NodeId<T> gated2 =
      tape.hadamard(attn2, conv_layer(tape, level2, p, "ssam.feat2", 1));
  NodeId<T> refined2 = tape.leaky_relu(
      conv_layer(tape, tape.concat_channels(gated2, up3), p, "ssam.fuse2", 1),
      slope);

  NodeId<T> up2 = tape.upsample2x(refined2);
  NodeId<T> attn1 = tape.sigmoid(conv_layer(tape, up2, p, "ssam.att1", 1));
  NodeId<T> gated1 =
      tape.hadamard(attn1, conv_layer(tape, level1, p, "ssam.feat1", 1));
  return tape.leaky_relu(
      conv_layer(tape, tape.concat_channels(gated1, up2), p, "ssam.fuse1", 1),
      slope);
}

}  // namespace detail

/// Records the full generator on the tape: stem, the blocks selected by
/// arch_mode, and the sigmoid tail. Registers every parameter on the tape in
/// store order (so tape parameter index i corresponds to params.tensors[i])
/// and returns the output node, shaped bands x H x W with values in (0, 1).
template <typename T>
typename TapeT<T>::NodeId build_network_graph(TapeT<T>& tape,
                                              typename TapeT<T>::NodeId input,
                                              const NetworkConfig& config,
                                              const NamedTensorsT<T>& params) {
  config.validate();
  std::vector<detail::NodeId<T>> nodes;
  nodes.reserve(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    nodes.push_back(tape.parameter(params.names[i], params.tensors[i]));
  }
  detail::ParamNodes<T> p{&params.names, &nodes};
  const T slope = static_cast<T>(kLeakySlope);

  auto x = tape.leaky_relu(detail::conv_layer(tape, input, p, "stem", 1),
                           slope);
  if (config.arch_mode != ArchMode::ssam_only) {
    for (int b = 1; b <= 3; ++b) {
      x = detail::brb_graph(tape, x, p, "brb" + std::to_string(b));
    }
  }
  if (config.arch_mode != ArchMode::brb_only) {
    x = detail::ssam_graph(tape, x, p);
  }
  return tape.sigmoid(detail::conv_layer(tape, x, p, "tail", 1));
}

/// One-shot forward pass (fresh tape). Convenience for tests and callers
/// that do not need gradients.
template <typename T>
TensorT<T> network_forward(const TensorT<T>& input, const NetworkConfig& config,
                           const NamedTensorsT<T>& params) {
  TapeT<T> tape;
  auto in_node = tape.constant(input);
  auto out = build_network_graph(tape, in_node, config, params);
  return tape.value(out);
}

/// Forward pass of one bottleneck residual block whose parameters use the
/// given prefix (e.g. "brb1").
Tensor brb_forward(const Tensor& input, const NamedTensors& params,
                   const std::string& prefix);

/// Forward pass of the attention module alone (parameters under "ssam.").
Tensor ssam_forward(const Tensor& input, const NamedTensors& params);

}  // namespace cassikit
