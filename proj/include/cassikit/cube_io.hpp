#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "cassikit/recon.hpp"
#include "cassikit/tensor.hpp"

namespace cassikit {

/// Binary cube container:
///   bytes 0..3   magic "HSC1"
///   bytes 4..15  little-endian uint32 H, W, C
///   then H*W*C little-endian float32, band-major, row-major per plane.
/// Total length is 16 + 4*H*W*C bytes. Measurements are stored with C = 1
/// (an SD snapshot carries its widened width in the W field).
void write_cube(const std::filesystem::path& path, const Tensor& cube);

/// Validates magic, payload length and finiteness.
Tensor read_cube(const std::filesystem::path& path);

/// Wavelength sidecar: one nanometer value per line.
std::vector<double> read_wavelengths_csv(const std::filesystem::path& path);
void write_wavelengths_csv(const std::filesystem::path& path,
                           std::span<const double> wavelengths);

/// Optimization curve: header "iter,loss,psnr"; the psnr field is empty for
/// runs without ground truth.
void write_curve_csv(const std::filesystem::path& path,
                     const std::vector<CurvePoint>& curve);

}  // namespace cassikit
