#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "cassikit/tensor.hpp"

namespace cassikit {

/// Reported PSNR for an exact match (zero MSE).
inline constexpr double kPsnrCap = 100.0;

/// Per-band 10*log10(1/MSE) against peak 1.0; identical bands report the
/// cap.
std::vector<double> psnr_per_band(const Tensor& ref, const Tensor& est);

/// Mean of the per-band PSNR values.
double psnr(const Tensor& ref, const Tensor& est);

/// Standard single-band SSIM: 11x11 Gaussian window (sigma 1.5), K1 = 0.01,
/// K2 = 0.03, L = 1, valid-region windowing (no padding), mean over the
/// valid map. Throws if the plane is smaller than the window.
double ssim_plane(std::span<const float> ref, std::span<const float> est,
                  int height, int width);

double ssim_band(const Tensor& ref, const Tensor& est, int band);

/// Mean of the per-band SSIM values.
double ssim(const Tensor& ref, const Tensor& est);

/// Pearson correlation of the two C-vectors at pixel (y, x). Requires at
/// least two bands; throws on a constant spectrum (undefined correlation).
double spectral_correlation(const Tensor& ref, const Tensor& est, int y,
                            int x);

struct BandScore {
  int band = 0;
  double psnr = 0.0;
  double ssim = 0.0;
};

struct MetricsReport {
  std::vector<BandScore> bands;
  double mean_psnr = 0.0;
  double mean_ssim = 0.0;
};

MetricsReport compute_metrics(const Tensor& ref, const Tensor& est);

/// CSV rows "band,psnr,ssim" plus a final "mean" row.
void write_metrics_csv(const std::filesystem::path& path,
                       const MetricsReport& report);

}  // namespace cassikit
