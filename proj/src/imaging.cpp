#include "cassikit/imaging.hpp"

#include <stdexcept>

#include "cassikit/rng.hpp"

namespace cassikit {

System system_from_string(const std::string& name) {
  if (name == "ss") return System::ss;
  if (name == "sd") return System::sd;
  throw std::invalid_argument("unknown system '" + name + "' (want ss or sd)");
}

std::string to_string(System system) {
  return system == System::ss ? "ss" : "sd";
}

MaskKind mask_kind_from_string(const std::string& name) {
  if (name == "binary") return MaskKind::binary;
  if (name == "gray") return MaskKind::gray;
  throw std::invalid_argument("unknown mask kind '" + name +
                              "' (want binary or gray)");
}

Tensor generate_mask(std::uint64_t seed, int height, int width, MaskKind kind,
                     double density) {
  if (height <= 0 || width <= 0) {
    throw std::invalid_argument("generate_mask: dimensions must be positive");
  }
  if (density <= 0.0 || density >= 1.0) {
    throw std::invalid_argument("generate_mask: density must be in (0, 1)");
  }
  Rng rng(seed);
  Tensor mask(1, height, width);
  float* out = mask.data();
  for (std::size_t i = 0; i < mask.size(); ++i) {
    const double u = rng.uniform01();
    out[i] = kind == MaskKind::binary ? (u < density ? 1.0f : 0.0f)
                                      : static_cast<float>(u);
  }
  return mask;
}

double measurement_rate(System system, int height, int width, int bands,
                        DispersionModel disp) {
  const double cube_entries =
      static_cast<double>(height) * width * bands;
  if (system == System::ss) {
    return static_cast<double>(height) * width / cube_entries;
  }
  const double meas_width = width + (bands - 1) * disp.shift_per_band;
  return static_cast<double>(height) * meas_width / cube_entries;
}

Snapshot simulate(const Tensor& cube, const CassiOperator& op,
                  float noise_sigma, std::uint64_t seed) {
  if (noise_sigma < 0.0f) {
    throw std::invalid_argument("simulate: noise sigma must be >= 0");
  }
  Tensor plane = op.forward(cube);
  if (noise_sigma > 0.0f) {
    Rng rng(seed);
    float* v = plane.data();
    for (std::size_t i = 0; i < plane.size(); ++i) {
      v[i] += noise_sigma * static_cast<float>(rng.normal());
    }
  }
  return Snapshot{std::move(plane), op.system(), seed, noise_sigma};
}

}  // namespace cassikit
