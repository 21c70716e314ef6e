#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "dreamsplat/geometry.hpp"
#include "dreamsplat/scene.hpp"

namespace dreamsplat {

/// Degree-0 spherical harmonics constant; f_dc = (color - 0.5) / kShC0.
constexpr double kShC0 = 0.28209479177387814;

/// Per-pixel depth in world units. Non-positive or non-finite entries are invalid.
class DepthMap {
public:
  DepthMap() = default;
  DepthMap(int width, int height, double fill = 0.0);
  DepthMap(int width, int height, std::vector<double> values);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  double at(int x, int y) const { return values_[static_cast<std::size_t>(y) * width_ + x]; }
  void set(int x, int y, double d) { values_[static_cast<std::size_t>(y) * width_ + x] = d; }
  bool valid(int x, int y) const {
    const double d = at(x, y);
    return std::isfinite(d) && d > 0.0;
  }
  std::span<const double> data() const noexcept { return values_; }

private:
  int width_ = 0;
  int height_ = 0;
  std::vector<double> values_;
};

/// Writes via a temporary file and rename.
void write_file_atomic(const std::filesystem::path &path, std::span<const std::uint8_t> bytes);
void write_text_atomic(const std::filesystem::path &path, const std::string &text);
std::vector<std::uint8_t> read_file(const std::filesystem::path &path);
std::string read_text(const std::filesystem::path &path);

// Binary little-endian PLY, one float32 vertex record per Gaussian:
// x y z f_dc_0 f_dc_1 f_dc_2 opacity scale_0 scale_1 scale_2 rot_0 rot_1 rot_2 rot_3
// with opacity as a logit, scales as natural logs and rot = (w, x, y, z).
std::vector<std::uint8_t> encode_ply(const GaussianScene &scene);
GaussianScene decode_ply(std::span<const std::uint8_t> bytes);
void save_ply(const GaussianScene &scene, const std::filesystem::path &path);
GaussianScene load_ply(const std::filesystem::path &path);

void save_png(const ImageBuffer &img, const std::filesystem::path &path);
ImageBuffer load_png(const std::filesystem::path &path);
void save_mask_png(const MaskBuffer &mask, const std::filesystem::path &path);
MaskBuffer load_mask_png(const std::filesystem::path &path);

/// Sidecar metadata path for a depth PNG: same stem, ".json" extension.
std::filesystem::path depth_metadata_path(const std::filesystem::path &png_path);

/// 16-bit gray PNG where depth = value / 65535 * scale and 0 marks invalid.
/// `scale` <= 0 picks the largest valid depth.
void save_depth(const DepthMap &depth, const std::filesystem::path &path, double scale = 0.0);
DepthMap load_depth(const std::filesystem::path &path);

/// {"fx","fy","cx","cy","width","height","rotation":[w,x,y,z],"translation":[x,y,z]},
/// numbers written with 17 significant digits.
std::string camera_to_json(const Camera &cam);
Camera camera_from_json(const std::string &text);
void save_camera(const Camera &cam, const std::filesystem::path &path);
Camera load_camera(const std::filesystem::path &path);

} // namespace dreamsplat
