#include "cassikit/png_io.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace cassikit {

namespace {

void put_u32be(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>((v >> 24) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>(v & 0xff));
}

void append_chunk(std::string& out, const char type[4],
                  const std::string& payload) {
  put_u32be(out, static_cast<std::uint32_t>(payload.size()));
  const std::size_t crc_start = out.size();
  out.append(type, 4);
  out.append(payload);
  const auto* crc_data =
      reinterpret_cast<const unsigned char*>(out.data() + crc_start);
  const auto crc = static_cast<std::uint32_t>(
      crc32(0, crc_data, static_cast<uInt>(out.size() - crc_start)));
  put_u32be(out, crc);
}

void write_png(const std::filesystem::path& path,
               std::span<const std::uint8_t> pixels, int height, int width,
               int bytes_per_pixel) {
  if (height <= 0 || width <= 0 ||
      pixels.size() != static_cast<std::size_t>(height) * width *
                           bytes_per_pixel) {
    throw std::invalid_argument("png: pixel buffer does not match " +
                                std::to_string(width) + "x" +
                                std::to_string(height));
  }
  // Raw image stream: one filter byte (0 = none) per scanline.
  const std::size_t stride = static_cast<std::size_t>(width) * bytes_per_pixel;
  std::vector<unsigned char> raw((stride + 1) * height);
  for (int y = 0; y < height; ++y) {
    raw[y * (stride + 1)] = 0;
    std::memcpy(raw.data() + y * (stride + 1) + 1, pixels.data() + y * stride,
                stride);
  }
  uLongf compressed_size = compressBound(static_cast<uLong>(raw.size()));
  std::vector<unsigned char> compressed(compressed_size);
  if (compress2(compressed.data(), &compressed_size, raw.data(),
                static_cast<uLong>(raw.size()), 9) != Z_OK) {
    throw std::runtime_error("png: deflate failed");
  }

  std::string file("\x89PNG\r\n\x1a\n", 8);
  std::string ihdr;
  put_u32be(ihdr, static_cast<std::uint32_t>(width));
  put_u32be(ihdr, static_cast<std::uint32_t>(height));
  ihdr.push_back(8);  // bit depth
  ihdr.push_back(bytes_per_pixel == 1 ? 0 : 2);  // gray / truecolor
  ihdr.push_back(0);  // deflate
  ihdr.push_back(0);  // default filtering
  ihdr.push_back(0);  // no interlace
  append_chunk(file, "IHDR", ihdr);
  append_chunk(file, "IDAT",
               std::string(reinterpret_cast<const char*>(compressed.data()),
                           compressed_size));
  append_chunk(file, "IEND", "");

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out.write(file.data(), static_cast<std::streamsize>(file.size()))) {
    throw std::runtime_error("cannot write png '" + path.string() + "'");
  }
}

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(
      std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

}  // namespace

std::array<double, 3> wavelength_to_rgb(double nm) {
  if (nm >= 380.0 && nm < 440.0) return {(440.0 - nm) / 60.0, 0.0, 1.0};
  if (nm >= 440.0 && nm < 490.0) return {0.0, (nm - 440.0) / 50.0, 1.0};
  if (nm >= 490.0 && nm < 510.0) return {0.0, 1.0, (510.0 - nm) / 20.0};
  if (nm >= 510.0 && nm < 580.0) return {(nm - 510.0) / 70.0, 1.0, 0.0};
  if (nm >= 580.0 && nm < 645.0) return {1.0, (645.0 - nm) / 65.0, 0.0};
  if (nm >= 645.0 && nm <= 780.0) return {1.0, 0.0, 0.0};
  return {0.0, 0.0, 0.0};
}

void write_png_gray8(const std::filesystem::path& path,
                     std::span<const std::uint8_t> pixels, int height,
                     int width) {
  write_png(path, pixels, height, width, 1);
}

void write_png_rgb8(const std::filesystem::path& path,
                    std::span<const std::uint8_t> pixels, int height,
                    int width) {
  write_png(path, pixels, height, width, 3);
}

void export_band_png(const std::filesystem::path& path, const Tensor& cube,
                     int band) {
  if (band < 0 || band >= cube.channels()) {
    throw std::invalid_argument("export_band_png: band " +
                                std::to_string(band) + " out of range for " +
                                cube.shape_string());
  }
  auto plane = cube.plane(band);
  std::vector<std::uint8_t> pixels(plane.size());
  for (std::size_t i = 0; i < plane.size(); ++i) pixels[i] = to_byte(plane[i]);
  write_png_gray8(path, pixels, cube.height(), cube.width());
}

void export_rgb_png(const std::filesystem::path& path, const Tensor& cube,
                    std::span<const double> wavelengths) {
  if (wavelengths.size() != static_cast<std::size_t>(cube.channels())) {
    throw std::invalid_argument(
        "export_rgb_png: " + std::to_string(wavelengths.size()) +
        " wavelengths for " + std::to_string(cube.channels()) + " bands");
  }
  std::vector<double> rgb(cube.plane_size() * 3, 0.0);
  for (int b = 0; b < cube.channels(); ++b) {
    const auto tint = wavelength_to_rgb(wavelengths[b]);
    auto plane = cube.plane(b);
    for (std::size_t i = 0; i < plane.size(); ++i) {
      rgb[3 * i] += tint[0] * plane[i];
      rgb[3 * i + 1] += tint[1] * plane[i];
      rgb[3 * i + 2] += tint[2] * plane[i];
    }
  }
  const double peak = *std::max_element(rgb.begin(), rgb.end());
  std::vector<std::uint8_t> pixels(rgb.size());
  if (peak > 0.0) {
    for (std::size_t i = 0; i < rgb.size(); ++i) {
      pixels[i] = to_byte(rgb[i] / peak);
    }
  }
  write_png_rgb8(path, pixels, cube.height(), cube.width());
}

}  // namespace cassikit
