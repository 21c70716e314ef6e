#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace dreamsplat {

using Vec3 = Eigen::Vector3d;
using Quat = Eigen::Quaterniond;
using Rgb = Eigen::Vector3d;

/// One anisotropic 3D Gaussian. Covariance is R * diag(scale^2) * R^T, so it
/// is positive semidefinite by construction. Scales are standard deviations.
struct Gaussian3D {
  Vec3 mean = Vec3::Zero();
  Quat rotation = Quat::Identity();
  Vec3 scale = Vec3::Constant(0.01);
  double opacity = 1.0;
  Rgb color = Rgb::Zero();

  Eigen::Matrix3d covariance() const;
};

/// Ordered collection of Gaussians. Each Gaussian carries the pipeline step
/// that created it; steps never decrease along the list.
class GaussianScene {
public:
  GaussianScene() = default;

  /// Every Gaussian gets provenance `step`.
  explicit GaussianScene(std::vector<Gaussian3D> gaussians, std::size_t step = 0);
  GaussianScene(std::vector<Gaussian3D> gaussians, std::vector<std::size_t> provenance);

  std::size_t size() const noexcept { return gaussians_.size(); }
  bool empty() const noexcept { return gaussians_.empty(); }

  const Gaussian3D &operator[](std::size_t i) const { return gaussians_[i]; }
  std::span<const Gaussian3D> gaussians() const noexcept { return gaussians_; }
  std::span<Gaussian3D> gaussians() noexcept { return gaussians_; }
  std::span<const std::size_t> provenance() const noexcept { return provenance_; }

  /// Appends; throws std::invalid_argument if `step` is older than the last entry.
  void push_back(const Gaussian3D &g, std::size_t step);
  void reserve(std::size_t n);

private:
  std::vector<Gaussian3D> gaussians_;
  std::vector<std::size_t> provenance_;
};

/// H x W x 3 image, row-major, origin top-left; pixel (x, y) is column x, row y.
class ImageBuffer {
public:
  ImageBuffer() = default;
  ImageBuffer(int width, int height, const Rgb &fill = Rgb::Zero());
  /// Takes ownership of interleaved RGB data; values must be finite and in [0, 1].
  ImageBuffer(int width, int height, std::vector<double> pixels);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t pixel_count() const noexcept { return static_cast<std::size_t>(width_) * height_; }

  double at(int x, int y, int c) const { return pixels_[index(x, y) + c]; }
  Rgb pixel(int x, int y) const;
  void set(int x, int y, const Rgb &rgb);

  std::span<const double> data() const noexcept { return pixels_; }
  std::span<double> data() noexcept { return pixels_; }

  bool same_shape(const ImageBuffer &other) const noexcept {
    return width_ == other.width_ && height_ == other.height_;
  }
  bool operator==(const ImageBuffer &other) const = default;

private:
  std::size_t index(int x, int y) const { return (static_cast<std::size_t>(y) * width_ + x) * 3; }

  int width_ = 0;
  int height_ = 0;
  std::vector<double> pixels_;
};

/// Binary H x W mask; 1 marks an observed pixel.
class MaskBuffer {
public:
  MaskBuffer() = default;
  MaskBuffer(int width, int height, std::uint8_t fill = 0);
  /// Values must be exactly 0 or 1.
  MaskBuffer(int width, int height, std::vector<std::uint8_t> bits);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }

  std::uint8_t at(int x, int y) const { return bits_[static_cast<std::size_t>(y) * width_ + x]; }
  void set(int x, int y, bool observed) {
    bits_[static_cast<std::size_t>(y) * width_ + x] = observed ? 1 : 0;
  }

  std::span<const std::uint8_t> data() const noexcept { return bits_; }
  std::size_t count_observed() const;

  bool matches(const ImageBuffer &img) const noexcept {
    return width_ == img.width() && height_ == img.height();
  }
  bool operator==(const MaskBuffer &other) const = default;

private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> bits_;
};

/// Concatenates `prev` and `retained`; retained Gaussians are stamped with `step`.
GaussianScene merge_scenes(const GaussianScene &prev, const GaussianScene &retained, std::size_t step);

/// One entry per broken invariant, e.g. "gaussian 2: opacity 1.5 outside [0, 1]".
/// Never throws.
std::vector<std::string> validate_scene(const GaussianScene &scene);

} // namespace dreamsplat
