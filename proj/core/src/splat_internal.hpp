#pragma once

// Shared between the forward renderer and the gradient code.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "dreamsplat/geometry.hpp"
#include "dreamsplat/rasterizer.hpp"
#include "dreamsplat/scene.hpp"

namespace dreamsplat::detail {

struct ProjectedGaussian {
  std::size_t index = 0; // position in the scene
  double depth = 0.0;
  double u = 0.0;
  double v = 0.0;
  // inverse of the screen covariance: [a b; b c]
  double conic_a = 0.0;
  double conic_b = 0.0;
  double conic_c = 0.0;
  double radius = 0.0;
  double opacity = 0.0;
  Rgb color = Rgb::Zero();
  // d(u, v) / d(world mean)
  Eigen::Matrix<double, 2, 3> mean_jacobian = Eigen::Matrix<double, 2, 3>::Zero();
};

/// Projects every in-front Gaussian and sorts front-to-back (stable by index).
std::vector<ProjectedGaussian> project_sorted(const GaussianScene &scene, const Camera &cam, double lowpass);

struct KernelEval {
  double alpha = 0.0;
  double gauss = 0.0; // exp(-power), before opacity and clamp
  bool clamped = false;
};

inline KernelEval eval_kernel(const ProjectedGaussian &g, double px, double py) {
  const double dx = px - g.u;
  const double dy = py - g.v;
  const double maha = g.conic_a * dx * dx + 2.0 * g.conic_b * dx * dy + g.conic_c * dy * dy;
  KernelEval k;
  if (!(maha <= kKernelCutoff) || maha < 0.0)
    return k;
  k.gauss = std::exp(-0.5 * maha);
  const double a = g.opacity * k.gauss;
  if (a > kMaxAlpha) {
    k.alpha = kMaxAlpha;
    k.clamped = true;
  } else {
    k.alpha = std::max(0.0, a);
  }
  return k;
}

/// Per-tile lists of indices into the sorted projection array, in sorted order.
struct TileBins {
  int tile_size = 16;
  int tiles_x = 0;
  int tiles_y = 0;
  std::vector<std::vector<std::uint32_t>> lists;
};

TileBins bin_tiles(const std::vector<ProjectedGaussian> &projected, const Intrinsics &k, int tile_size);

void validate_background(const Rgb &bg);

} // namespace dreamsplat::detail
