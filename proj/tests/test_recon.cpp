#include <cmath>
#include <stdexcept>
#include <vector>

#include "cassikit/imaging.hpp"
#include "cassikit/metrics.hpp"
#include "cassikit/ops.hpp"
#include "cassikit/recon.hpp"
#include "cassikit/rng.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace cassikit;

namespace {

RunConfig quick_run(int bands, int iterations, std::uint64_t seed = 1) {
  RunConfig run;
  run.iterations = iterations;
  run.seed = seed;
  run.log_every = 1;
  run.net.bands = bands;
  run.net.feature_width = 8;
  run.net.z_channels = 4;
  run.net.seed = seed + 1;
  return run;
}

/// Independent GAP-TV reference: double precision, its own SS forward,
/// adjoint and dual TV projection, sharing no code with the library path.
std::vector<double> reference_gaptv_ss(const Tensor& y, const Tensor& stack,
                                       int iterations, double tv_weight,
                                       int tv_inner) {
  const int c = stack.channels();
  const int h = stack.height();
  const int w = stack.width();
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  std::vector<double> x(static_cast<std::size_t>(c) * plane, 0.0);
  std::vector<double> row_norm(plane, 0.0);
  for (int b = 0; b < c; ++b) {
    for (std::size_t i = 0; i < plane; ++i) {
      const double s = stack.data()[b * plane + i];
      row_norm[i] += s * s;
    }
  }

  std::vector<double> resid(plane), qx(plane), qy(plane), u(plane);
  for (int it = 0; it < iterations; ++it) {
    for (std::size_t i = 0; i < plane; ++i) {
      double pred = 0.0;
      for (int b = 0; b < c; ++b) {
        pred += stack.data()[b * plane + i] * x[b * plane + i];
      }
      resid[i] = (y.data()[i] - pred) /
                 (row_norm[i] > 1e-6 ? row_norm[i] : 1.0);
      if (row_norm[i] <= 1e-6) resid[i] = 0.0;
    }
    for (int b = 0; b < c; ++b) {
      for (std::size_t i = 0; i < plane; ++i) {
        x[b * plane + i] += stack.data()[b * plane + i] * resid[i];
      }
    }
    if (tv_weight <= 0.0) continue;
    for (int b = 0; b < c; ++b) {
      double* f = x.data() + b * plane;
      std::fill(qx.begin(), qx.end(), 0.0);
      std::fill(qy.begin(), qy.end(), 0.0);
      auto form_u = [&] {
        for (int yy = 0; yy < h; ++yy) {
          for (int xx = 0; xx < w; ++xx) {
            const std::size_t i = static_cast<std::size_t>(yy) * w + xx;
            double div = qx[i] + qy[i];
            if (xx > 0) div -= qx[i - 1];
            if (yy > 0) div -= qy[i - w];
            u[i] = f[i] - div;
          }
        }
      };
      for (int inner = 0; inner < tv_inner; ++inner) {
        form_u();
        for (int yy = 0; yy < h; ++yy) {
          for (int xx = 0; xx < w; ++xx) {
            const std::size_t i = static_cast<std::size_t>(yy) * w + xx;
            if (xx + 1 < w) {
              qx[i] = std::clamp(qx[i] - 0.125 * (u[i + 1] - u[i]),
                                 -static_cast<double>(tv_weight),
                                 static_cast<double>(tv_weight));
            }
            if (yy + 1 < h) {
              qy[i] = std::clamp(qy[i] - 0.125 * (u[i + w] - u[i]),
                                 -static_cast<double>(tv_weight),
                                 static_cast<double>(tv_weight));
            }
          }
        }
      }
      form_u();
      std::copy(u.begin(), u.end(), f);
    }
  }
  for (double& v : x) v = std::clamp(v, 0.0, 1.0);
  return x;
}

double total_variation(std::span<const float> plane, int h, int w) {
  double tv = 0.0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      if (x + 1 < w) tv += std::abs(plane[i + 1] - plane[i]);
      if (y + 1 < h) tv += std::abs(plane[i + w] - plane[i]);
    }
  }
  return tv;
}

}  // namespace

TEST_CASE("l1 loss is zero iff the forward matches exactly") {
  const Tensor cube = testutil::synthetic_cube(5, 3, 8, 8);
  const Tensor mask = generate_mask(6, 8, 8, MaskKind::binary, 0.5);
  const CassiOperator op(System::ss, mask, DispersionModel{1}, 3);
  const Snapshot y = simulate(cube, op, 0.0f, 0);
  CHECK(l1_measurement_loss(cube, y, op) == 0.0);

  const Tensor zero(3, 8, 8);
  CHECK(l1_measurement_loss(zero, y, op) ==
        doctest::Approx(ops::abs_sum(y.plane)).epsilon(1e-6));
}

TEST_CASE("l1 loss matches the brute-force residual sum") {
  Rng rng(71);
  const Tensor cube = testutil::random_tensor<float>(rng, 3, 5, 5, 0.0, 1.0);
  const Tensor est = testutil::random_tensor<float>(rng, 3, 5, 5, 0.0, 1.0);
  const Tensor mask = generate_mask(72, 5, 5, MaskKind::gray, 0.5);
  const Tensor stack = shift_mask_stack(mask, DispersionModel{1}, 3);
  const CassiOperator op(System::ss, mask, DispersionModel{1}, 3);
  const Snapshot y = simulate(cube, op, 0.0f, 0);

  double want = 0.0;
  for (int h = 0; h < 5; ++h) {
    for (int w = 0; w < 5; ++w) {
      double pred = 0.0;
      for (int b = 0; b < 3; ++b) {
        pred += static_cast<double>(est(b, h, w)) * stack(b, h, w);
      }
      want += std::abs(y.plane(0, h, w) - pred);
    }
  }
  CHECK(l1_measurement_loss(est, y, op) ==
        doctest::Approx(want).epsilon(1e-5));
}

TEST_CASE("l1 loss rejects a system mismatch") {
  const Tensor mask = generate_mask(1, 8, 8, MaskKind::binary, 0.5);
  const CassiOperator op(System::ss, mask, DispersionModel{1}, 2);
  Snapshot y;
  y.plane = Tensor::full(1, 8, 8, 1.0f);
  y.system = System::sd;
  CHECK_THROWS_AS(l1_measurement_loss(Tensor(2, 8, 8), y, op),
                  std::invalid_argument);
}

TEST_CASE("reconstruct is deterministic and leaves inputs untouched") {
  const Tensor cube = testutil::synthetic_cube(9, 2, 8, 8);
  const Tensor mask = generate_mask(10, 8, 8, MaskKind::binary, 0.5);
  const CassiOperator op(System::ss, mask, DispersionModel{1}, 2);
  const Snapshot y = simulate(cube, op, 0.0f, 0);
  const Tensor y_copy = y.plane;

  const RunConfig run = quick_run(2, 12);
  const ReconResult a = reconstruct(y, op, run);
  const ReconResult b = reconstruct(y, op, run);
  CHECK(a.cube == b.cube);
  CHECK(a.parameter_digest == b.parameter_digest);
  CHECK(y.plane == y_copy);

  RunConfig other = run;
  other.seed = 99;
  other.net.seed = 100;
  const ReconResult c = reconstruct(y, op, other);
  CHECK_FALSE(a.cube == c.cube);
}

TEST_CASE("loss drops and the curve follows the logging contract") {
  const Tensor cube = testutil::synthetic_cube(21, 2, 16, 16);
  const Tensor mask = generate_mask(22, 16, 16, MaskKind::binary, 0.5);
  const CassiOperator op(System::ss, mask, DispersionModel{1}, 2);
  const Snapshot y = simulate(cube, op, 0.0f, 0);

  RunConfig run = quick_run(2, 120, 3);
  run.log_every = 7;
  const ReconResult result = reconstruct(y, op, run, &cube);

  // ceil(120/7) logged points, the last at iteration 120.
  CHECK(result.curve.size() == (120 + 6) / 7);
  CHECK(result.curve.back().iteration == 120);
  CHECK(result.curve.front().iteration == 7);
  for (const CurvePoint& p : result.curve) CHECK(p.has_psnr);

  RunConfig dense = quick_run(2, 120, 3);
  const ReconResult traced = reconstruct(y, op, dense);
  CHECK(traced.curve.size() == 120);
  CHECK(traced.curve.back().loss < 0.8 * traced.curve.front().loss);
  double best = traced.curve.front().loss;
  for (std::size_t k = 9; k < traced.curve.size(); k += 10) {
    double next_best = best;
    for (std::size_t j = 0; j <= k; ++j) {
      next_best = std::min(next_best, traced.curve[j].loss);
    }
    CHECK(next_best <= best + 1e-12);
    best = next_best;
  }
}

TEST_CASE("reconstruct rejects an all-zero measurement") {
  const Tensor mask = generate_mask(1, 8, 8, MaskKind::binary, 0.5);
  const CassiOperator op(System::ss, mask, DispersionModel{1}, 2);
  Snapshot y;
  y.plane = Tensor(1, 8, 8);
  y.system = System::ss;
  CHECK_THROWS_AS(reconstruct(y, op, quick_run(2, 5)),
                  std::invalid_argument);
}

TEST_CASE("all nine ablation combinations run to completion") {
  const Tensor cube = testutil::synthetic_cube(31, 2, 8, 8);
  const Tensor mask = generate_mask(32, 8, 8, MaskKind::binary, 0.5);
  const CassiOperator op(System::ss, mask, DispersionModel{1}, 2);
  const Snapshot y = simulate(cube, op, 0.0f, 0);
  for (InputMode input :
       {InputMode::z_only, InputMode::y_only, InputMode::z_and_y}) {
    for (ArchMode arch :
         {ArchMode::brb_only, ArchMode::ssam_only, ArchMode::full}) {
      RunConfig run = quick_run(2, 4);
      run.net.input_mode = input;
      run.net.arch_mode = arch;
      const ReconResult result = reconstruct(y, op, run);
      CHECK(result.cube.channels() == 2);
    }
  }
}

TEST_CASE("SD reconstruction runs end to end") {
  const Tensor cube = testutil::synthetic_cube(41, 2, 8, 8);
  const Tensor mask = generate_mask(42, 8, 8, MaskKind::binary, 0.5);
  const CassiOperator op(System::sd, mask, DispersionModel{1}, 2);
  const Snapshot y = simulate(cube, op, 0.0f, 0);
  const ReconResult result = reconstruct(y, op, quick_run(2, 8));
  CHECK(result.cube.channels() == 2);
  CHECK(result.cube.width() == 8);
}

TEST_CASE("tv_denoise with weight zero is the identity") {
  const Tensor cube = testutil::synthetic_cube(51, 2, 8, 8);
  CHECK(tv_denoise(cube, 0.0f, 5) == cube);
  CHECK_THROWS_AS(tv_denoise(cube, -1.0f, 5), std::invalid_argument);
}

TEST_CASE("tv_denoise keeps constant bands for any weight") {
  const Tensor cube = Tensor::full(2, 10, 10, 0.37f);
  const Tensor out = tv_denoise(cube, 0.5f, 8);
  CHECK(testutil::max_abs_diff(out, cube) < 1e-7);
}

TEST_CASE("tv_denoise reduces the total variation of a step edge") {
  Tensor cube(1, 12, 12);
  for (int y = 0; y < 12; ++y) {
    for (int x = 6; x < 12; ++x) cube(0, y, x) = 1.0f;
  }
  const Tensor out = tv_denoise(cube, 0.05f, 10);
  const double before = total_variation(cube.plane(0), 12, 12);
  const double after = total_variation(out.plane(0), 12, 12);
  CHECK(after <= before);
  CHECK(after > 0.0);
}

TEST_CASE("gaptv recovers exactly when the operator is invertible") {
  const Tensor cube = testutil::synthetic_cube(61, 1, 8, 8);
  const Tensor mask = Tensor::full(1, 8, 8, 1.0f);
  const CassiOperator op(System::ss, mask, DispersionModel{1}, 1);
  const Snapshot y = simulate(cube, op, 0.0f, 0);
  const Tensor rec = gaptv_reconstruct(y, op, 1, 0.0f, 0);
  CHECK(testutil::max_abs_diff(rec, cube) < 1e-6);
}

TEST_CASE("gaptv data term is non-increasing with zero TV weight") {
  const Tensor cube = testutil::synthetic_cube(62, 3, 12, 12);
  const Tensor mask = generate_mask(63, 12, 12, MaskKind::binary, 0.5);
  const CassiOperator op(System::ss, mask, DispersionModel{1}, 3);
  const Snapshot y = simulate(cube, op, 0.0f, 0);
  double previous = std::numeric_limits<double>::infinity();
  for (int iters = 1; iters <= 4; ++iters) {
    const Tensor xk = gaptv_reconstruct(y, op, iters, 0.0f, 0);
    const Tensor resid = ops::sub(y.plane, op.forward(xk));
    const double norm = std::sqrt(ops::dot(resid, resid));
    CHECK(norm <= previous + 1e-6);
    previous = norm;
  }
}

TEST_CASE("gaptv stays within 1 dB of the reference implementation") {
  const Tensor cube = testutil::synthetic_cube(64, 8, 64, 64);
  const Tensor mask = generate_mask(65, 64, 64, MaskKind::binary, 0.5);
  const CassiOperator op(System::ss, mask, DispersionModel{1}, 8);
  const Snapshot y = simulate(cube, op, 0.0f, 0);
  const float tv_weight = default_tv_weight(y);

  const Tensor ours = gaptv_reconstruct(y, op, 30, tv_weight, 5);
  const auto ref = reference_gaptv_ss(y.plane, op.mask_stack(), 30, tv_weight,
                                      5);
  Tensor ref_cube(8, 64, 64);
  for (std::size_t i = 0; i < ref.size(); ++i) {
    ref_cube.data()[i] = static_cast<float>(ref[i]);
  }
  const double psnr_ours = psnr(cube, ours);
  const double psnr_ref = psnr(cube, ref_cube);
  INFO("ours ", psnr_ours, " dB vs reference ", psnr_ref, " dB");
  CHECK(std::abs(psnr_ours - psnr_ref) < 1.0);
}

TEST_CASE("gaptv rejects an all-zero row-norm operator") {
  const Tensor mask(1, 8, 8);  // fully opaque aperture
  const CassiOperator op(System::ss, mask, DispersionModel{1}, 2);
  Snapshot y;
  y.plane = Tensor::full(1, 8, 8, 0.5f);
  y.system = System::ss;
  CHECK_THROWS_AS(gaptv_reconstruct(y, op, 5, 0.1f, 3),
                  std::invalid_argument);
}

TEST_CASE("adjoint_init band-normalizes the adjoint cube") {
  const Tensor cube = testutil::synthetic_cube(66, 3, 8, 8);
  const Tensor mask = generate_mask(67, 8, 8, MaskKind::binary, 0.5);
  const CassiOperator op(System::ss, mask, DispersionModel{1}, 3);
  const Snapshot y = simulate(cube, op, 0.0f, 0);
  const Tensor init = adjoint_init(y, op);
  for (int b = 0; b < 3; ++b) {
    float band_max = 0.0f;
    for (float v : init.plane(b)) band_max = std::max(band_max, v);
    CHECK(band_max == doctest::Approx(1.0f));
  }
}
