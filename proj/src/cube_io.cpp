#include "cassikit/cube_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace cassikit {

namespace {

constexpr char kMagic[4] = {'H', 'S', 'C', '1'};
constexpr std::uint32_t kMaxDim = 1u << 20;

void put_u32le(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 24) & 0xff));
}

std::uint32_t get_u32le(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) |
         (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace

void write_cube(const std::filesystem::path& path, const Tensor& cube) {
  cube.require_finite("cube '" + path.string() + "'");
  std::string bytes;
  bytes.reserve(16 + 4 * cube.size());
  bytes.append(kMagic, 4);
  put_u32le(bytes, static_cast<std::uint32_t>(cube.height()));
  put_u32le(bytes, static_cast<std::uint32_t>(cube.width()));
  put_u32le(bytes, static_cast<std::uint32_t>(cube.channels()));
  for (std::size_t i = 0; i < cube.size(); ++i) {
    put_u32le(bytes, std::bit_cast<std::uint32_t>(cube.data()[i]));
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()))) {
    throw std::runtime_error("cannot write cube file '" + path.string() + "'");
  }
}

Tensor read_cube(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open cube file '" + path.string() + "'");
  }
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw std::runtime_error("'" + path.string() +
                             "' is not a cube file (bad magic)");
  }
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::uint32_t h = get_u32le(p + 4);
  const std::uint32_t w = get_u32le(p + 8);
  const std::uint32_t c = get_u32le(p + 12);
  if (h == 0 || w == 0 || c == 0 || h > kMaxDim || w > kMaxDim || c > kMaxDim) {
    throw std::runtime_error("cube file '" + path.string() +
                             "' has implausible dimensions");
  }
  const std::size_t count = static_cast<std::size_t>(h) * w * c;
  if (bytes.size() != 16 + 4 * count) {
    throw std::runtime_error("cube file '" + path.string() +
                             "' is truncated or oversized: expected " +
                             std::to_string(16 + 4 * count) + " bytes, got " +
                             std::to_string(bytes.size()));
  }
  std::vector<float> values(count);
  for (std::size_t i = 0; i < count; ++i) {
    values[i] = std::bit_cast<float>(get_u32le(p + 16 + 4 * i));
  }
  try {
    return Tensor::from_values(static_cast<int>(c), static_cast<int>(h),
                               static_cast<int>(w), std::move(values));
  } catch (const std::runtime_error&) {
    throw std::runtime_error("cube file '" + path.string() +
                             "' contains non-finite values");
  }
}

std::vector<double> read_wavelengths_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open wavelengths file '" + path.string() +
                             "'");
  }
  std::vector<double> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      out.push_back(std::stod(line));
    } catch (const std::exception&) {
      throw std::runtime_error("wavelengths file '" + path.string() +
                               "': bad line '" + line + "'");
    }
  }
  if (out.empty()) {
    throw std::runtime_error("wavelengths file '" + path.string() +
                             "' is empty");
  }
  return out;
}

void write_wavelengths_csv(const std::filesystem::path& path,
                           std::span<const double> wavelengths) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write wavelengths file '" +
                             path.string() + "'");
  }
  out << std::setprecision(10);
  for (double v : wavelengths) out << v << '\n';
}

void write_curve_csv(const std::filesystem::path& path,
                     const std::vector<CurvePoint>& curve) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write curve file '" + path.string() +
                             "'");
  }
  out << "iter,loss,psnr\n" << std::setprecision(10);
  for (const CurvePoint& p : curve) {
    out << p.iteration << ',' << p.loss << ',';
    if (p.has_psnr) out << p.psnr;
    out << '\n';
  }
}

}  // namespace cassikit
