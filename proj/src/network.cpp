#include "cassikit/network.hpp"

#include <cmath>

#include "cassikit/ops.hpp"
#include "cassikit/rng.hpp"

namespace cassikit {

InputMode input_mode_from_string(const std::string& name) {
  if (name == "z_only") return InputMode::z_only;
  if (name == "y_only") return InputMode::y_only;
  if (name == "z_and_y") return InputMode::z_and_y;
  throw std::invalid_argument("unknown input mode '" + name +
                              "' (want z_only, y_only or z_and_y)");
}

ArchMode arch_mode_from_string(const std::string& name) {
  if (name == "brb_only") return ArchMode::brb_only;
  if (name == "ssam_only") return ArchMode::ssam_only;
  if (name == "full") return ArchMode::full;
  throw std::invalid_argument("unknown arch mode '" + name +
                              "' (want brb_only, ssam_only or full)");
}

std::string to_string(InputMode mode) {
  switch (mode) {
    case InputMode::z_only: return "z_only";
    case InputMode::y_only: return "y_only";
    case InputMode::z_and_y: return "z_and_y";
  }
  return "?";
}

std::string to_string(ArchMode mode) {
  switch (mode) {
    case ArchMode::brb_only: return "brb_only";
    case ArchMode::ssam_only: return "ssam_only";
    case ArchMode::full: return "full";
  }
  return "?";
}

void NetworkConfig::validate() const {
  if (bands < 1) {
    throw std::invalid_argument("network config: bands must be >= 1");
  }
  if (feature_width < 2 || feature_width % 2 != 0) {
    throw std::invalid_argument(
        "network config: feature width must be a positive even number");
  }
  if (z_channels < 1) {
    throw std::invalid_argument("network config: z_channels must be >= 1");
  }
  if (scales != 3) {
    throw std::invalid_argument("network config: scales is fixed at 3");
  }
}

int measurement_channels(System system, int bands) {
  return system == System::ss ? 1 : bands;
}

int input_channel_count(const NetworkConfig& config, System system) {
  const int y_ch = measurement_channels(system, config.bands);
  switch (config.input_mode) {
    case InputMode::z_only: return config.z_channels;
    case InputMode::y_only: return y_ch;
    case InputMode::z_and_y: return config.z_channels + y_ch;
  }
  return 0;
}

namespace {

/// Registers a conv layer: weight (out_c*in_c, k, k) He-uniform, bias zero.
void add_conv(NamedTensors& params, Rng& rng, const std::string& prefix,
              int in_c, int out_c, int k) {
  const double bound = std::sqrt(6.0 / (static_cast<double>(in_c) * k * k));
  Tensor w(out_c * in_c, k, k);
  float* wd = w.data();
  for (std::size_t i = 0; i < w.size(); ++i) {
    wd[i] = static_cast<float>(rng.uniform(-bound, bound));
  }
  params.add(prefix + ".w", std::move(w));
  params.add(prefix + ".b", Tensor(out_c, 1, 1));
}

}  // namespace

NamedTensors build_network(const NetworkConfig& config, System system) {
  config.validate();
  Rng rng(config.seed);
  NamedTensors params;
  const int f = config.feature_width;
  const int mid = f / 2;

  add_conv(params, rng, "stem", input_channel_count(config, system), f, 1);
  if (config.arch_mode != ArchMode::ssam_only) {
    for (int b = 1; b <= 3; ++b) {
      const std::string prefix = "brb" + std::to_string(b);
      add_conv(params, rng, prefix + ".skip", f, f, 1);
      add_conv(params, rng, prefix + ".reduce", f, mid, 1);
      add_conv(params, rng, prefix + ".mid", mid, mid, 3);
      add_conv(params, rng, prefix + ".expand", mid, f, 1);
    }
  }
  if (config.arch_mode != ArchMode::brb_only) {
    add_conv(params, rng, "ssam.down1", f, f, 3);
    add_conv(params, rng, "ssam.down2", f, f, 3);
    for (int s = 1; s <= 2; ++s) {
      const std::string scale = std::to_string(s);
      add_conv(params, rng, "ssam.att" + scale, f, f, 3);
      add_conv(params, rng, "ssam.feat" + scale, f, f, 3);
      add_conv(params, rng, "ssam.fuse" + scale, 2 * f, f, 3);
    }
  }
  add_conv(params, rng, "tail", f, config.bands, 1);
  return params;
}

Tensor draw_random_code(std::uint64_t seed, int z_channels, int height,
                        int width) {
  Rng rng(seed);
  Tensor z(z_channels, height, width);
  float* zd = z.data();
  for (std::size_t i = 0; i < z.size(); ++i) {
    zd[i] = static_cast<float>(rng.uniform(0.0, 0.1));
  }
  return z;
}

Tensor make_conditional_input(const Tensor& z, const Snapshot& y,
                              DispersionModel disp, int bands,
                              InputMode input_mode) {
  if (input_mode == InputMode::z_only) return z;

  const float y_max = ops::max_value(y.plane);
  if (!(y_max > 0.0f)) {
    throw std::invalid_argument(
        "conditional input: measurement is all zero, max-normalization is "
        "undefined");
  }
  Tensor maps = y.system == System::ss ? y.plane
                                       : shift_back(y.plane, disp, bands);
  float* md = maps.data();
  for (std::size_t i = 0; i < maps.size(); ++i) md[i] /= y_max;

  if (input_mode == InputMode::y_only) return maps;
  return ops::concat_channels(z, maps);
}

Tensor brb_forward(const Tensor& input, const NamedTensors& params,
                   const std::string& prefix) {
  Tape tape;
  std::vector<Tape::NodeId> nodes;
  for (std::size_t i = 0; i < params.size(); ++i) {
    nodes.push_back(tape.parameter(params.names[i], params.tensors[i]));
  }
  detail::ParamNodes<float> p{&params.names, &nodes};
  return tape.value(detail::brb_graph(tape, tape.constant(input), p, prefix));
}

Tensor ssam_forward(const Tensor& input, const NamedTensors& params) {
  Tape tape;
  std::vector<Tape::NodeId> nodes;
  for (std::size_t i = 0; i < params.size(); ++i) {
    nodes.push_back(tape.parameter(params.names[i], params.tensors[i]));
  }
  detail::ParamNodes<float> p{&params.names, &nodes};
  return tape.value(detail::ssam_graph(tape, tape.constant(input), p));
}

}  // namespace cassikit
