// Python bindings: numpy-facing wrappers over the toolkit's main
// operations. Cubes are (C, H, W) float32 arrays; masks and snapshots are
// (H, W).

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>
#include <optional>
#include <string>

#include "cassikit/cube_io.hpp"
#include "cassikit/imaging.hpp"
#include "cassikit/metrics.hpp"
#include "cassikit/network.hpp"
#include "cassikit/recon.hpp"

namespace py = pybind11;
using namespace cassikit;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

Tensor tensor_from(const FloatArray& array, const char* what) {
  const auto info = array.request();
  int c = 1, h = 0, w = 0;
  if (info.ndim == 2) {
    h = static_cast<int>(info.shape[0]);
    w = static_cast<int>(info.shape[1]);
  } else if (info.ndim == 3) {
    c = static_cast<int>(info.shape[0]);
    h = static_cast<int>(info.shape[1]);
    w = static_cast<int>(info.shape[2]);
  } else {
    throw std::invalid_argument(std::string(what) +
                                ": expected a 2D or 3D array");
  }
  const auto* data = static_cast<const float*>(info.ptr);
  std::vector<float> values(data, data + static_cast<std::size_t>(c) * h * w);
  return Tensor::from_values(c, h, w, std::move(values));
}

py::array to_numpy(const Tensor& t, bool squeeze = false) {
  if (squeeze && t.channels() == 1) {
    py::array_t<float> out({t.height(), t.width()});
    std::memcpy(out.mutable_data(), t.data(), sizeof(float) * t.size());
    return out;
  }
  py::array_t<float> out({t.channels(), t.height(), t.width()});
  std::memcpy(out.mutable_data(), t.data(), sizeof(float) * t.size());
  return out;
}

CassiOperator make_operator(const FloatArray& mask, const std::string& system,
                            int bands, int shift) {
  return CassiOperator(system_from_string(system),
                       tensor_from(mask, "mask"), DispersionModel{shift},
                       bands);
}

Snapshot make_snapshot(const FloatArray& meas, const std::string& system) {
  return Snapshot{tensor_from(meas, "measurement"),
                  system_from_string(system), 0, 0.0f};
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Coded-aperture snapshot spectral imaging: simulation, "
            "unsupervised reconstruction, GAP-TV baseline and metrics";

  m.def(
      "make_mask",
      [](int height, int width, const std::string& kind, double density,
         std::uint64_t seed) {
        return to_numpy(
            generate_mask(seed, height, width, mask_kind_from_string(kind),
                          density),
            true);
      },
      py::arg("height"), py::arg("width"), py::arg("kind") = "binary",
      py::arg("density") = 0.5, py::arg("seed") = 0,
      "Random coded aperture; binary Bernoulli(density) or gray uniform.");

  m.def(
      "shift_mask_stack",
      [](const FloatArray& mask, int bands, int shift) {
        return to_numpy(shift_mask_stack(tensor_from(mask, "mask"),
                                         DispersionModel{shift}, bands));
      },
      py::arg("mask"), py::arg("bands"), py::arg("shift") = 1);

  m.def(
      "forward",
      [](const FloatArray& cube, const FloatArray& mask,
         const std::string& system, int shift) {
        const Tensor x = tensor_from(cube, "cube");
        return to_numpy(
            make_operator(mask, system, x.channels(), shift).forward(x), true);
      },
      py::arg("cube"), py::arg("mask"), py::arg("system") = "ss",
      py::arg("shift") = 1, "Apply the SS/SD measurement operator.");

  m.def(
      "adjoint",
      [](const FloatArray& meas, const FloatArray& mask,
         const std::string& system, int bands, int shift) {
        return to_numpy(make_operator(mask, system, bands, shift)
                            .adjoint(tensor_from(meas, "measurement")));
      },
      py::arg("meas"), py::arg("mask"), py::arg("system"), py::arg("bands"),
      py::arg("shift") = 1, "Transpose of the measurement operator.");

  m.def(
      "simulate",
      [](const FloatArray& cube, const FloatArray& mask,
         const std::string& system, float noise_sigma, std::uint64_t seed,
         int shift) {
        const Tensor x = tensor_from(cube, "cube");
        return to_numpy(
            simulate(x, make_operator(mask, system, x.channels(), shift),
                     noise_sigma, seed)
                .plane,
            true);
      },
      py::arg("cube"), py::arg("mask"), py::arg("system") = "ss",
      py::arg("noise_sigma") = 0.0f, py::arg("seed") = 0,
      py::arg("shift") = 1,
      "Forward projection plus seeded Gaussian measurement noise.");

  m.def(
      "measurement_rate",
      [](const std::string& system, int height, int width, int bands,
         int shift) {
        return measurement_rate(system_from_string(system), height, width,
                                bands, DispersionModel{shift});
      },
      py::arg("system"), py::arg("height"), py::arg("width"),
      py::arg("bands"), py::arg("shift") = 1);

  m.def(
      "l1_loss",
      [](const FloatArray& estimate, const FloatArray& meas,
         const FloatArray& mask, const std::string& system, int shift) {
        const Tensor est = tensor_from(estimate, "estimate");
        return l1_measurement_loss(
            est, make_snapshot(meas, system),
            make_operator(mask, system, est.channels(), shift));
      },
      py::arg("estimate"), py::arg("meas"), py::arg("mask"),
      py::arg("system") = "ss", py::arg("shift") = 1,
      "Sum of absolute residuals between the snapshot and "
      "forward(estimate).");

  m.def(
      "reconstruct",
      [](const FloatArray& meas, const FloatArray& mask,
         const std::string& system, int bands, int iters, float lr,
         std::uint64_t seed, const std::string& input_mode,
         const std::string& arch_mode, int feature_width, int z_channels,
         int log_every, std::optional<FloatArray> ground_truth, int shift) {
        const CassiOperator op = make_operator(mask, system, bands, shift);
        const Snapshot y = make_snapshot(meas, system);
        RunConfig run;
        run.iterations = iters;
        run.lr = lr;
        run.seed = seed;
        run.log_every = log_every;
        run.net.bands = bands;
        run.net.seed = seed + 1;
        run.net.input_mode = input_mode_from_string(input_mode);
        run.net.arch_mode = arch_mode_from_string(arch_mode);
        run.net.feature_width = feature_width;
        run.net.z_channels = z_channels;
        std::optional<Tensor> gt;
        if (ground_truth) gt = tensor_from(*ground_truth, "ground truth");
        const ReconResult result =
            reconstruct(y, op, run, gt ? &*gt : nullptr);
        py::list curve;
        for (const CurvePoint& p : result.curve) {
          curve.append(py::make_tuple(
              p.iteration, p.loss,
              p.has_psnr ? py::object(py::float_(p.psnr)) : py::none()));
        }
        py::dict out;
        out["cube"] = to_numpy(result.cube);
        out["curve"] = curve;
        out["seconds"] = result.seconds;
        out["parameter_digest"] = result.parameter_digest;
        return out;
      },
      py::arg("meas"), py::arg("mask"), py::arg("system"), py::arg("bands"),
      py::arg("iters") = 2500, py::arg("lr") = 0.01f, py::arg("seed") = 0,
      py::arg("input_mode") = "z_and_y", py::arg("arch_mode") = "full",
      py::arg("feature_width") = 64, py::arg("z_channels") = 32,
      py::arg("log_every") = 10, py::arg("ground_truth") = py::none(),
      py::arg("shift") = 1,
      "Unsupervised network reconstruction from a single snapshot.");

  m.def(
      "gaptv",
      [](const FloatArray& meas, const FloatArray& mask,
         const std::string& system, int bands, int iters, float tv_weight,
         int tv_inner, int shift) {
        return to_numpy(gaptv_reconstruct(
            make_snapshot(meas, system),
            make_operator(mask, system, bands, shift), iters, tv_weight,
            tv_inner));
      },
      py::arg("meas"), py::arg("mask"), py::arg("system"), py::arg("bands"),
      py::arg("iters") = 50, py::arg("tv_weight") = -1.0f,
      py::arg("tv_inner") = 5, py::arg("shift") = 1,
      "Generalized alternating projection with TV denoising.");

  m.def(
      "psnr",
      [](const FloatArray& ref, const FloatArray& est) {
        return psnr(tensor_from(ref, "ref"), tensor_from(est, "est"));
      },
      py::arg("ref"), py::arg("est"));

  m.def(
      "psnr_per_band",
      [](const FloatArray& ref, const FloatArray& est) {
        return psnr_per_band(tensor_from(ref, "ref"),
                             tensor_from(est, "est"));
      },
      py::arg("ref"), py::arg("est"));

  m.def(
      "ssim",
      [](const FloatArray& ref, const FloatArray& est) {
        return ssim(tensor_from(ref, "ref"), tensor_from(est, "est"));
      },
      py::arg("ref"), py::arg("est"));

  m.def(
      "spectral_correlation",
      [](const FloatArray& ref, const FloatArray& est, int y, int x) {
        return spectral_correlation(tensor_from(ref, "ref"),
                                    tensor_from(est, "est"), y, x);
      },
      py::arg("ref"), py::arg("est"), py::arg("y"), py::arg("x"));

  m.def(
      "read_cube",
      [](const std::string& path) { return to_numpy(read_cube(path)); },
      py::arg("path"));

  m.def(
      "write_cube",
      [](const std::string& path, const FloatArray& cube) {
        write_cube(path, tensor_from(cube, "cube"));
      },
      py::arg("path"), py::arg("cube"));
}
