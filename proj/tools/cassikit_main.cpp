// Command-line driver: mask generation, CASSI simulation, unsupervised and
// GAP-TV reconstruction, metrics and PNG export.

#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cassikit/cube_io.hpp"
#include "cassikit/imaging.hpp"
#include "cassikit/metrics.hpp"
#include "cassikit/network.hpp"
#include "cassikit/png_io.hpp"
#include "cassikit/recon.hpp"

namespace {

using namespace cassikit;

Tensor load_mask(const std::string& path) {
  Tensor mask = read_cube(path);
  if (mask.channels() != 1) {
    throw std::runtime_error("mask '" + path + "' must have a single band, " +
                             "got " + mask.shape_string());
  }
  return mask;
}

struct OperatorFlags {
  std::string mask_path;
  std::string system = "ss";
  int bands = 0;
  int shift = 1;

  void attach(CLI::App* cmd, bool with_bands) {
    cmd->add_option("--mask", mask_path, "coded mask cube file (C=1)")
        ->required();
    cmd->add_option("--system", system, "imaging system: ss or sd")
        ->check(CLI::IsMember({"ss", "sd"}));
    cmd->add_option("--shift", shift, "dispersion step in px per band")
        ->check(CLI::NonNegativeNumber);
    if (with_bands) {
      cmd->add_option("--bands", bands, "spectral band count C")->required();
    }
  }

  CassiOperator make(int band_count) const {
    return CassiOperator(system_from_string(system), load_mask(mask_path),
                         DispersionModel{shift}, band_count);
  }
};

void register_make_mask(CLI::App& app) {
  auto* cmd = app.add_subcommand("make-mask", "generate a random coded mask");
  auto height = std::make_shared<int>(0);
  auto width = std::make_shared<int>(0);
  auto kind = std::make_shared<std::string>("binary");
  auto density = std::make_shared<double>(0.5);
  auto seed = std::make_shared<std::uint64_t>(0);
  auto out = std::make_shared<std::string>();
  cmd->add_option("--height", *height)->required();
  cmd->add_option("--width", *width)->required();
  cmd->add_option("--kind", *kind, "binary or gray")
      ->check(CLI::IsMember({"binary", "gray"}));
  cmd->add_option("--density", *density, "Bernoulli density for binary masks");
  cmd->add_option("--seed", *seed);
  cmd->add_option("--out", *out, "output cube file")->required();
  cmd->callback([=] {
    write_cube(*out, generate_mask(*seed, *height, *width,
                                   mask_kind_from_string(*kind), *density));
    std::cout << "wrote mask " << *height << "x" << *width << " to " << *out
              << "\n";
  });
}

void register_simulate(CLI::App& app) {
  auto* cmd =
      app.add_subcommand("simulate", "render a snapshot measurement");
  auto flags = std::make_shared<OperatorFlags>();
  auto cube_path = std::make_shared<std::string>();
  auto noise_sigma = std::make_shared<float>(0.0f);
  auto seed = std::make_shared<std::uint64_t>(0);
  auto out = std::make_shared<std::string>();
  cmd->add_option("--cube", *cube_path, "ground-truth cube file")->required();
  flags->attach(cmd, false);
  cmd->add_option("--noise-sigma", *noise_sigma, "Gaussian noise std");
  cmd->add_option("--seed", *seed, "noise seed");
  cmd->add_option("--out", *out, "output measurement file")->required();
  cmd->callback([=] {
    const Tensor cube = read_cube(*cube_path);
    const CassiOperator op = flags->make(cube.channels());
    const Snapshot snap = simulate(cube, op, *noise_sigma, *seed);
    write_cube(*out, snap.plane);
    std::cout << "wrote " << to_string(op.system()) << " measurement "
              << op.height() << "x" << op.snapshot_width() << " to " << *out
              << " (measurement rate "
              << measurement_rate(op.system(), cube.height(), cube.width(),
                                  cube.channels(), op.dispersion())
              << ")\n";
  });
}

void register_reconstruct(CLI::App& app) {
  auto* cmd = app.add_subcommand(
      "reconstruct", "unsupervised network reconstruction from a snapshot");
  auto flags = std::make_shared<OperatorFlags>();
  auto meas_path = std::make_shared<std::string>();
  auto out = std::make_shared<std::string>();
  auto log_path = std::make_shared<std::string>();
  auto gt_path = std::make_shared<std::string>();
  auto run = std::make_shared<RunConfig>();
  auto input_mode = std::make_shared<std::string>("z_and_y");
  auto arch_mode = std::make_shared<std::string>("full");
  auto seed = std::make_shared<std::uint64_t>(0);
  cmd->add_option("--meas", *meas_path, "measurement file")->required();
  flags->attach(cmd, true);
  cmd->add_option("--iters", run->iterations, "optimization iterations");
  cmd->add_option("--lr", run->lr, "Adam learning rate");
  cmd->add_option("--seed", *seed, "run seed");
  cmd->add_option("--input-mode", *input_mode,
                  "network input: z_only, y_only or z_and_y")
      ->check(CLI::IsMember({"z_only", "y_only", "z_and_y"}));
  cmd->add_option("--arch-mode", *arch_mode,
                  "architecture: brb_only, ssam_only or full")
      ->check(CLI::IsMember({"brb_only", "ssam_only", "full"}));
  cmd->add_option("--feature-width", run->net.feature_width);
  cmd->add_option("--z-channels", run->net.z_channels);
  cmd->add_option("--log-every", run->log_every);
  cmd->add_option("--log", *log_path, "write the loss/psnr curve CSV here");
  cmd->add_option("--gt", *gt_path, "ground-truth cube for PSNR logging");
  cmd->add_option("--out", *out, "output cube file")->required();
  cmd->callback([=] {
    const CassiOperator op = flags->make(flags->bands);
    const Snapshot snap{read_cube(*meas_path),
                        system_from_string(flags->system), *seed, 0.0f};
    run->seed = *seed;
    run->net.seed = *seed + 1;
    run->net.bands = flags->bands;
    run->net.input_mode = input_mode_from_string(*input_mode);
    run->net.arch_mode = arch_mode_from_string(*arch_mode);
    Tensor gt;
    const bool have_gt = !gt_path->empty();
    if (have_gt) gt = read_cube(*gt_path);
    const ReconResult result =
        reconstruct(snap, op, *run, have_gt ? &gt : nullptr);
    write_cube(*out, result.cube);
    if (!log_path->empty()) write_curve_csv(*log_path, result.curve);
    std::cout << "reconstructed " << result.cube.shape_string() << " in "
              << result.seconds << " s, final loss "
              << result.curve.back().loss << "\n";
  });
}

void register_gaptv(CLI::App& app) {
  auto* cmd = app.add_subcommand("baseline-gaptv",
                                 "classical GAP-TV reconstruction");
  auto flags = std::make_shared<OperatorFlags>();
  auto meas_path = std::make_shared<std::string>();
  auto out = std::make_shared<std::string>();
  auto iters = std::make_shared<int>(50);
  auto tv_weight = std::make_shared<float>(-1.0f);
  auto tv_inner = std::make_shared<int>(5);
  cmd->add_option("--meas", *meas_path, "measurement file")->required();
  flags->attach(cmd, true);
  cmd->add_option("--iters", *iters, "outer GAP iterations");
  cmd->add_option("--tv-weight", *tv_weight,
                  "TV weight (default 0.1 * max measurement)");
  cmd->add_option("--tv-inner", *tv_inner, "inner TV iterations");
  cmd->add_option("--out", *out, "output cube file")->required();
  cmd->callback([=] {
    const CassiOperator op = flags->make(flags->bands);
    const Snapshot snap{read_cube(*meas_path),
                        system_from_string(flags->system), 0, 0.0f};
    write_cube(*out, gaptv_reconstruct(snap, op, *iters, *tv_weight,
                                       *tv_inner));
    std::cout << "wrote GAP-TV reconstruction to " << *out << "\n";
  });
}

void register_metrics(CLI::App& app) {
  auto* cmd = app.add_subcommand("metrics",
                                 "PSNR/SSIM report against a reference cube");
  auto ref_path = std::make_shared<std::string>();
  auto est_path = std::make_shared<std::string>();
  auto report_path = std::make_shared<std::string>();
  cmd->add_option("--ref", *ref_path, "reference cube")->required();
  cmd->add_option("--est", *est_path, "estimate cube")->required();
  cmd->add_option("--report", *report_path, "output CSV")->required();
  cmd->callback([=] {
    const MetricsReport report =
        compute_metrics(read_cube(*ref_path), read_cube(*est_path));
    write_metrics_csv(*report_path, report);
    std::cout << "mean psnr " << report.mean_psnr << " dB, mean ssim "
              << report.mean_ssim << "\n";
  });
}

void register_export_png(CLI::App& app) {
  auto* cmd = app.add_subcommand("export-png", "render a cube to PNG");
  auto cube_path = std::make_shared<std::string>();
  auto out = std::make_shared<std::string>();
  auto band = std::make_shared<int>(-1);
  auto rgb = std::make_shared<bool>(false);
  auto wavelengths_path = std::make_shared<std::string>();
  cmd->add_option("--cube", *cube_path)->required();
  auto* band_opt = cmd->add_option("--band", *band, "band index to export");
  auto* rgb_opt = cmd->add_flag(
      "--rgb", *rgb, "wavelength-tinted RGB composite of all bands");
  cmd->add_option("--wavelengths", *wavelengths_path,
                  "sidecar CSV, one nm per line (required with --rgb)");
  cmd->add_option("--out", *out)->required();
  band_opt->excludes(rgb_opt);
  cmd->callback([=] {
    const Tensor cube = read_cube(*cube_path);
    if (*rgb) {
      if (wavelengths_path->empty()) {
        throw std::runtime_error("--rgb requires --wavelengths");
      }
      export_rgb_png(*out, cube, read_wavelengths_csv(*wavelengths_path));
    } else if (*band >= 0) {
      export_band_png(*out, cube, *band);
    } else {
      throw std::runtime_error("export-png needs --band or --rgb");
    }
    std::cout << "wrote " << *out << "\n";
  });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"coded-aperture snapshot spectral imaging toolkit"};
  app.require_subcommand(1);
  register_make_mask(app);
  register_simulate(app);
  register_reconstruct(app);
  register_gaptv(app);
  register_metrics(app);
  register_export_png(app);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
