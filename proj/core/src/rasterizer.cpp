#include "dreamsplat/rasterizer.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

#include <tbb/blocked_range.h>
#include <tbb/parallel_for.h>

#include "splat_internal.hpp"

namespace dreamsplat {
namespace detail {

void validate_background(const Rgb &bg) {
  if (!bg.allFinite() || (bg.array() < 0.0).any() || (bg.array() > 1.0).any())
    throw std::invalid_argument("background must be finite RGB in [0, 1]");
}

std::vector<ProjectedGaussian> project_sorted(const GaussianScene &scene, const Camera &cam, double lowpass) {
  const Eigen::Matrix3d w = cam.pose.world_from_camera().transpose();
  const Intrinsics &k = cam.intrinsics;

  std::vector<ProjectedGaussian> out;
  out.reserve(scene.size());
  for (std::size_t i = 0; i < scene.size(); ++i) {
    const Gaussian3D &g = scene[i];
    const Vec3 pc = world_to_camera(cam.pose, g.mean);
    if (!(pc.z() > kNearPlane))
      continue;

    const Eigen::Matrix<double, 2, 3> jw = covariance_jacobian(k, pc) * w;
    Eigen::Matrix2d cov = jw * g.covariance() * jw.transpose();
    cov(1, 0) = cov(0, 1);
    cov(0, 0) += lowpass;
    cov(1, 1) += lowpass;
    const double det = cov(0, 0) * cov(1, 1) - cov(0, 1) * cov(0, 1);
    if (!(det > 0.0) || !std::isfinite(det))
      continue;

    ProjectedGaussian p;
    p.index = i;
    p.depth = pc.z();
    p.u = k.fx * pc.x() / pc.z() + k.cx;
    p.v = k.fy * pc.y() / pc.z() + k.cy;
    p.conic_a = cov(1, 1) / det;
    p.conic_b = -cov(0, 1) / det;
    p.conic_c = cov(0, 0) / det;
    const double mid = 0.5 * (cov(0, 0) + cov(1, 1));
    const double lambda_max = mid + std::sqrt(std::max(0.0, mid * mid - det));
    p.radius = 3.0 * std::sqrt(lambda_max);
    p.opacity = g.opacity;
    p.color = g.color;
    p.mean_jacobian = perspective_jacobian(k, pc) * w;
    out.push_back(p);
  }

  std::stable_sort(out.begin(), out.end(),
                   [](const ProjectedGaussian &a, const ProjectedGaussian &b) { return a.depth < b.depth; });
  return out;
}

TileBins bin_tiles(const std::vector<ProjectedGaussian> &projected, const Intrinsics &k, int tile_size) {
  TileBins bins;
  bins.tile_size = tile_size;
  bins.tiles_x = (k.width + tile_size - 1) / tile_size;
  bins.tiles_y = (k.height + tile_size - 1) / tile_size;
  bins.lists.resize(static_cast<std::size_t>(bins.tiles_x) * bins.tiles_y);

  for (std::size_t s = 0; s < projected.size(); ++s) {
    const ProjectedGaussian &p = projected[s];
    // One pixel of slack: the kernel cutoff decides exact support.
    const double r = p.radius + 1.0;
    const double x0 = std::floor(p.u - r), x1 = std::ceil(p.u + r);
    const double y0 = std::floor(p.v - r), y1 = std::ceil(p.v + r);
    if (!std::isfinite(r) || x1 < 0.0 || y1 < 0.0 || x0 > k.width - 1 || y0 > k.height - 1)
      continue;
    const int tx0 = std::max(0, static_cast<int>(x0) / tile_size);
    const int ty0 = std::max(0, static_cast<int>(y0) / tile_size);
    const int tx1 = std::min(bins.tiles_x - 1, static_cast<int>(std::min(x1, k.width - 1.0)) / tile_size);
    const int ty1 = std::min(bins.tiles_y - 1, static_cast<int>(std::min(y1, k.height - 1.0)) / tile_size);
    for (int ty = ty0; ty <= ty1; ++ty)
      for (int tx = tx0; tx <= tx1; ++tx)
        bins.lists[static_cast<std::size_t>(ty) * bins.tiles_x + tx].push_back(static_cast<std::uint32_t>(s));
  }
  return bins;
}

} // namespace detail

namespace {

using detail::ProjectedGaussian;

struct PixelResult {
  Rgb color;
  double transmittance;
};

template <typename IndexRange>
PixelResult composite_pixel(const std::vector<ProjectedGaussian> &projected, const IndexRange &order, int x, int y) {
  Rgb c = Rgb::Zero();
  double t = 1.0;
  for (auto s : order) {
    const ProjectedGaussian &g = projected[s];
    const detail::KernelEval k = detail::eval_kernel(g, x, y);
    if (k.alpha <= 0.0)
      continue;
    c += g.color * (k.alpha * t);
    t *= 1.0 - k.alpha;
  }
  return {c, t};
}

RenderOutput make_output(const Intrinsics &k) {
  RenderOutput out;
  out.color = ImageBuffer(k.width, k.height);
  out.accum_alpha.assign(static_cast<std::size_t>(k.width) * k.height, 0.0);
  return out;
}

void store(RenderOutput &out, int x, int y, const PixelResult &px, const Rgb &bg) {
  out.color.set(x, y, (px.color + px.transmittance * bg).cwiseMax(0.0).cwiseMin(1.0));
  out.accum_alpha[static_cast<std::size_t>(y) * out.color.width() + x] = std::clamp(1.0 - px.transmittance, 0.0, 1.0);
}

} // namespace

RenderOutput render(const GaussianScene &scene, const Camera &cam, const Rgb &background, const RenderOptions &opts) {
  cam.validate();
  detail::validate_background(background);
  if (opts.tile_size <= 0)
    throw std::invalid_argument("render: tile size must be positive");

  const Intrinsics &k = cam.intrinsics;
  const auto projected = detail::project_sorted(scene, cam, opts.lowpass);
  const detail::TileBins bins = detail::bin_tiles(projected, k, opts.tile_size);
  RenderOutput out = make_output(k);

  const int tile_count = bins.tiles_x * bins.tiles_y;
  tbb::parallel_for(tbb::blocked_range<int>(0, tile_count), [&](const tbb::blocked_range<int> &range) {
    for (int t = range.begin(); t != range.end(); ++t) {
      const int tx = t % bins.tiles_x;
      const int ty = t / bins.tiles_x;
      const auto &list = bins.lists[t];
      const int x_end = std::min(k.width, (tx + 1) * bins.tile_size);
      const int y_end = std::min(k.height, (ty + 1) * bins.tile_size);
      for (int y = ty * bins.tile_size; y < y_end; ++y)
        for (int x = tx * bins.tile_size; x < x_end; ++x)
          store(out, x, y, composite_pixel(projected, list, x, y), background);
    }
  });
  return out;
}

RenderOutput render_brute(const GaussianScene &scene, const Camera &cam, const Rgb &background,
                          const RenderOptions &opts) {
  cam.validate();
  detail::validate_background(background);

  const Intrinsics &k = cam.intrinsics;
  const auto projected = detail::project_sorted(scene, cam, opts.lowpass);
  std::vector<std::size_t> all(projected.size());
  std::iota(all.begin(), all.end(), std::size_t{0});

  RenderOutput out = make_output(k);
  for (int y = 0; y < k.height; ++y)
    for (int x = 0; x < k.width; ++x)
      store(out, x, y, composite_pixel(projected, all, x, y), background);
  return out;
}

MaskBuffer coverage_mask(const RenderOutput &rendered, double tau) {
  if (!(tau >= 0.0 && tau <= 1.0))
    throw std::invalid_argument("coverage_mask: tau must lie in [0, 1]");
  const int w = rendered.color.width();
  const int h = rendered.color.height();
  MaskBuffer mask(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      mask.set(x, y, rendered.alpha_at(x, y) >= tau);
  return mask;
}

MaskBuffer coverage_mask(const GaussianScene &scene, const Camera &cam, double tau, const RenderOptions &opts) {
  if (!(tau >= 0.0 && tau <= 1.0))
    throw std::invalid_argument("coverage_mask: tau must lie in [0, 1]");
  return coverage_mask(render(scene, cam, Rgb::Zero(), opts), tau);
}

ImageBuffer mask_to_image(const ImageBuffer &img, const MaskBuffer &mask, const Rgb &fill) {
  if (!mask.matches(img))
    throw std::invalid_argument("mask_to_image: mask and image dimensions differ");
  ImageBuffer out = img;
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      if (mask.at(x, y) == 0)
        out.set(x, y, fill);
  return out;
}

} // namespace dreamsplat
