#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>

#include "cassikit/tensor.hpp"

namespace cassikit {

/// Visible-range tint for a wavelength in nm, piecewise linear over
/// 380-780 nm and black outside:
///   380-440  (440-nm)/60, 0, 1
///   440-490  0, (nm-440)/50, 1
///   490-510  0, 1, (510-nm)/20
///   510-580  (nm-510)/70, 1, 0
///   580-645  1, (645-nm)/65, 0
///   645-780  1, 0, 0
std::array<double, 3> wavelength_to_rgb(double nm);

/// 8-bit grayscale PNG; `pixels` is row-major, height*width bytes.
void write_png_gray8(const std::filesystem::path& path,
                     std::span<const std::uint8_t> pixels, int height,
                     int width);

/// 8-bit RGB PNG; `pixels` is row-major interleaved, height*width*3 bytes.
void write_png_rgb8(const std::filesystem::path& path,
                    std::span<const std::uint8_t> pixels, int height,
                    int width);

/// One band as linear [0,1] -> [0,255] grayscale (clamped).
void export_band_png(const std::filesystem::path& path, const Tensor& cube,
                     int band);

/// All bands tinted by wavelength_to_rgb, summed and max-normalized.
/// `wavelengths` must have one entry per band.
void export_rgb_png(const std::filesystem::path& path, const Tensor& cube,
                    std::span<const double> wavelengths);

}  // namespace cassikit
