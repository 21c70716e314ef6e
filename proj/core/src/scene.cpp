#include "dreamsplat/scene.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace dreamsplat {

Eigen::Matrix3d Gaussian3D::covariance() const {
  const Eigen::Matrix3d r = rotation.normalized().toRotationMatrix();
  return r * scale.cwiseProduct(scale).asDiagonal() * r.transpose();
}

GaussianScene::GaussianScene(std::vector<Gaussian3D> gaussians, std::size_t step)
    : gaussians_(std::move(gaussians)), provenance_(gaussians_.size(), step) {}

GaussianScene::GaussianScene(std::vector<Gaussian3D> gaussians, std::vector<std::size_t> provenance)
    : gaussians_(std::move(gaussians)), provenance_(std::move(provenance)) {
  if (gaussians_.size() != provenance_.size())
    throw std::invalid_argument("GaussianScene: provenance length does not match gaussian count");
  if (!std::is_sorted(provenance_.begin(), provenance_.end()))
    throw std::invalid_argument("GaussianScene: provenance must be non-decreasing");
}

void GaussianScene::push_back(const Gaussian3D &g, std::size_t step) {
  if (!provenance_.empty() && step < provenance_.back())
    throw std::invalid_argument("GaussianScene: provenance must be non-decreasing");
  gaussians_.push_back(g);
  provenance_.push_back(step);
}

void GaussianScene::reserve(std::size_t n) {
  gaussians_.reserve(n);
  provenance_.reserve(n);
}

ImageBuffer::ImageBuffer(int width, int height, const Rgb &fill) : width_(width), height_(height) {
  if (width < 0 || height < 0)
    throw std::invalid_argument("ImageBuffer: negative dimensions");
  pixels_.resize(pixel_count() * 3);
  for (std::size_t i = 0; i < pixel_count(); ++i)
    for (int c = 0; c < 3; ++c)
      pixels_[i * 3 + c] = fill[c];
}

ImageBuffer::ImageBuffer(int width, int height, std::vector<double> pixels)
    : width_(width), height_(height), pixels_(std::move(pixels)) {
  if (width < 0 || height < 0)
    throw std::invalid_argument("ImageBuffer: negative dimensions");
  if (pixels_.size() != pixel_count() * 3)
    throw std::invalid_argument("ImageBuffer: pixel data length must be width*height*3");
  for (double v : pixels_)
    if (!std::isfinite(v) || v < 0.0 || v > 1.0)
      throw std::invalid_argument("ImageBuffer: pixel values must be finite and in [0, 1]");
}

Rgb ImageBuffer::pixel(int x, int y) const {
  const std::size_t i = index(x, y);
  return {pixels_[i], pixels_[i + 1], pixels_[i + 2]};
}

void ImageBuffer::set(int x, int y, const Rgb &rgb) {
  const std::size_t i = index(x, y);
  pixels_[i] = rgb[0];
  pixels_[i + 1] = rgb[1];
  pixels_[i + 2] = rgb[2];
}

MaskBuffer::MaskBuffer(int width, int height, std::uint8_t fill) : width_(width), height_(height) {
  if (width < 0 || height < 0)
    throw std::invalid_argument("MaskBuffer: negative dimensions");
  if (fill > 1)
    throw std::invalid_argument("MaskBuffer: fill must be 0 or 1");
  bits_.assign(static_cast<std::size_t>(width) * height, fill);
}

MaskBuffer::MaskBuffer(int width, int height, std::vector<std::uint8_t> bits)
    : width_(width), height_(height), bits_(std::move(bits)) {
  if (width < 0 || height < 0)
    throw std::invalid_argument("MaskBuffer: negative dimensions");
  if (bits_.size() != static_cast<std::size_t>(width) * height)
    throw std::invalid_argument("MaskBuffer: bit count must be width*height");
  if (std::any_of(bits_.begin(), bits_.end(), [](std::uint8_t b) { return b > 1; }))
    throw std::invalid_argument("MaskBuffer: values must be 0 or 1");
}

std::size_t MaskBuffer::count_observed() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

GaussianScene merge_scenes(const GaussianScene &prev, const GaussianScene &retained, std::size_t step) {
  std::vector<Gaussian3D> gaussians;
  std::vector<std::size_t> provenance;
  gaussians.reserve(prev.size() + retained.size());
  provenance.reserve(prev.size() + retained.size());

  gaussians.insert(gaussians.end(), prev.gaussians().begin(), prev.gaussians().end());
  provenance.insert(provenance.end(), prev.provenance().begin(), prev.provenance().end());

  // Stamping may only move forward; a stale step index would break ordering.
  std::size_t stamp = step;
  if (!provenance.empty())
    stamp = std::max(stamp, provenance.back());
  gaussians.insert(gaussians.end(), retained.gaussians().begin(), retained.gaussians().end());
  provenance.insert(provenance.end(), retained.size(), stamp);

  return GaussianScene(std::move(gaussians), std::move(provenance));
}

namespace {

bool finite3(const Eigen::Vector3d &v) { return v.allFinite(); }

} // namespace

std::vector<std::string> validate_scene(const GaussianScene &scene) {
  std::vector<std::string> out;
  auto report = [&out](std::size_t i, const char *field, const std::string &detail) {
    std::ostringstream os;
    os << "gaussian " << i << ": " << field << " " << detail;
    out.push_back(os.str());
  };

  for (std::size_t i = 0; i < scene.size(); ++i) {
    const Gaussian3D &g = scene[i];
    if (!finite3(g.mean))
      report(i, "mean", "is not finite");

    const double qn = g.rotation.coeffs().norm();
    if (!std::isfinite(qn) || std::abs(qn - 1.0) > 1e-6)
      report(i, "rotation", "is not a unit quaternion (norm " + std::to_string(qn) + ")");

    if (!finite3(g.scale) || (g.scale.array() <= 0.0).any())
      report(i, "scale", "must be finite and strictly positive");

    if (!std::isfinite(g.opacity) || g.opacity < 0.0 || g.opacity > 1.0)
      report(i, "opacity", std::to_string(g.opacity) + " outside [0, 1]");

    if (!finite3(g.color) || (g.color.array() < 0.0).any() || (g.color.array() > 1.0).any())
      report(i, "color", "components outside [0, 1]");
  }

  const auto prov = scene.provenance();
  for (std::size_t i = 1; i < prov.size(); ++i)
    if (prov[i] < prov[i - 1])
      report(i, "provenance", "decreases along the list");

  return out;
}

} // namespace dreamsplat
