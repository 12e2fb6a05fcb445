#include "cassikit/metrics.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>

namespace cassikit {

namespace {

constexpr int kWindow = 11;
constexpr double kWindowSigma = 1.5;
constexpr double kK1 = 0.01;
constexpr double kK2 = 0.03;

void require_same_shape(const Tensor& ref, const Tensor& est) {
  if (!ref.same_shape(est)) {
    throw std::invalid_argument("metrics: shape mismatch " +
                                ref.shape_string() + " vs " +
                                est.shape_string());
  }
}

/// 11x11 Gaussian window, normalized to sum 1.
std::vector<double> gaussian_window() {
  std::vector<double> w(kWindow * kWindow);
  const int half = kWindow / 2;
  double total = 0.0;
  for (int y = 0; y < kWindow; ++y) {
    for (int x = 0; x < kWindow; ++x) {
      const double dy = y - half;
      const double dx = x - half;
      const double v =
          std::exp(-(dx * dx + dy * dy) / (2.0 * kWindowSigma * kWindowSigma));
      w[y * kWindow + x] = v;
      total += v;
    }
  }
  for (double& v : w) v /= total;
  return w;
}

}  // namespace

std::vector<double> psnr_per_band(const Tensor& ref, const Tensor& est) {
  require_same_shape(ref, est);
  std::vector<double> out(ref.channels());
  for (int b = 0; b < ref.channels(); ++b) {
    auto r = ref.plane(b);
    auto e = est.plane(b);
    double mse = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) {
      const double d = static_cast<double>(r[i]) - e[i];
      mse += d * d;
    }
    mse /= static_cast<double>(r.size());
    out[b] = mse == 0.0 ? kPsnrCap : 10.0 * std::log10(1.0 / mse);
  }
  return out;
}

double psnr(const Tensor& ref, const Tensor& est) {
  const auto per_band = psnr_per_band(ref, est);
  double mean = 0.0;
  for (double v : per_band) mean += v;
  return mean / static_cast<double>(per_band.size());
}

double ssim_plane(std::span<const float> ref, std::span<const float> est,
                  int height, int width) {
  if (height < kWindow || width < kWindow) {
    throw std::invalid_argument("ssim: band " + std::to_string(height) + "x" +
                                std::to_string(width) +
                                " is smaller than the 11x11 window");
  }
  if (ref.size() != est.size() ||
      ref.size() != static_cast<std::size_t>(height) * width) {
    throw std::invalid_argument("ssim: plane size mismatch");
  }
  static const std::vector<double> window = gaussian_window();
  const double c1 = kK1 * kK1;  // L = 1
  const double c2 = kK2 * kK2;

  double total = 0.0;
  int count = 0;
  for (int y = 0; y + kWindow <= height; ++y) {
    for (int x = 0; x + kWindow <= width; ++x) {
      double mu_r = 0.0, mu_e = 0.0, rr = 0.0, ee = 0.0, re = 0.0;
      for (int wy = 0; wy < kWindow; ++wy) {
        const float* r_row = ref.data() + (y + wy) * width + x;
        const float* e_row = est.data() + (y + wy) * width + x;
        const double* w_row = window.data() + wy * kWindow;
        for (int wx = 0; wx < kWindow; ++wx) {
          const double w = w_row[wx];
          const double r = r_row[wx];
          const double e = e_row[wx];
          mu_r += w * r;
          mu_e += w * e;
          rr += w * (r * r);
          ee += w * (e * e);
          // Grouped so that swapping ref/est is bitwise symmetric.
          re += w * (r * e);
        }
      }
      const double var_r = rr - mu_r * mu_r;
      const double var_e = ee - mu_e * mu_e;
      const double cov = re - mu_r * mu_e;
      const double num = (2.0 * (mu_r * mu_e) + c1) * (2.0 * cov + c2);
      const double den =
          (mu_r * mu_r + mu_e * mu_e + c1) * (var_r + var_e + c2);
      total += num / den;
      ++count;
    }
  }
  return total / count;
}

double ssim_band(const Tensor& ref, const Tensor& est, int band) {
  require_same_shape(ref, est);
  if (band < 0 || band >= ref.channels()) {
    throw std::invalid_argument("ssim: band " + std::to_string(band) +
                                " out of range");
  }
  return ssim_plane(ref.plane(band), est.plane(band), ref.height(),
                    ref.width());
}

double ssim(const Tensor& ref, const Tensor& est) {
  require_same_shape(ref, est);
  double mean = 0.0;
  for (int b = 0; b < ref.channels(); ++b) mean += ssim_band(ref, est, b);
  return mean / ref.channels();
}

double spectral_correlation(const Tensor& ref, const Tensor& est, int y,
                            int x) {
  require_same_shape(ref, est);
  if (ref.channels() < 2) {
    throw std::invalid_argument(
        "spectral_correlation: needs at least 2 bands");
  }
  if (y < 0 || y >= ref.height() || x < 0 || x >= ref.width()) {
    throw std::invalid_argument("spectral_correlation: pixel out of bounds");
  }
  const int c = ref.channels();
  double mu_r = 0.0, mu_e = 0.0;
  for (int b = 0; b < c; ++b) {
    mu_r += ref(b, y, x);
    mu_e += est(b, y, x);
  }
  mu_r /= c;
  mu_e /= c;
  double var_r = 0.0, var_e = 0.0, cov = 0.0;
  for (int b = 0; b < c; ++b) {
    const double dr = ref(b, y, x) - mu_r;
    const double de = est(b, y, x) - mu_e;
    var_r += dr * dr;
    var_e += de * de;
    cov += dr * de;
  }
  if (var_r == 0.0 || var_e == 0.0) {
    throw std::invalid_argument(
        "spectral_correlation: constant spectrum, correlation undefined");
  }
  return cov / std::sqrt(var_r * var_e);
}

MetricsReport compute_metrics(const Tensor& ref, const Tensor& est) {
  MetricsReport report;
  const auto psnrs = psnr_per_band(ref, est);
  for (int b = 0; b < ref.channels(); ++b) {
    const double s = ssim_band(ref, est, b);
    report.bands.push_back({b, psnrs[b], s});
    report.mean_psnr += psnrs[b];
    report.mean_ssim += s;
  }
  report.mean_psnr /= ref.channels();
  report.mean_ssim /= ref.channels();
  return report;
}

void write_metrics_csv(const std::filesystem::path& path,
                       const MetricsReport& report) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot open '" + path.string() +
                             "' for writing");
  }
  out << "band,psnr,ssim\n";
  for (const BandScore& b : report.bands) {
    out << b.band << ',' << b.psnr << ',' << b.ssim << '\n';
  }
  out << "mean," << report.mean_psnr << ',' << report.mean_ssim << '\n';
}

}  // namespace cassikit
