#pragma once

#include <vector>

#include "dreamsplat/geometry.hpp"
#include "dreamsplat/scene.hpp"

namespace dreamsplat {

constexpr double kMaxAlpha = 0.999;
/// Splat kernels are truncated at this squared Mahalanobis distance (3 sigma).
constexpr double kKernelCutoff = 9.0;
constexpr double kDefaultMaskTau = 0.5;

struct RenderOptions {
  double lowpass = kDefaultLowpass;
  int tile_size = 16;
};

struct RenderOutput {
  ImageBuffer color;
  /// 1 - final transmittance, row-major H x W.
  std::vector<double> accum_alpha;

  double alpha_at(int x, int y) const {
    return accum_alpha[static_cast<std::size_t>(y) * color.width() + x];
  }
};

/// Tiled front-to-back splatting. Gaussians are sorted by camera-frame depth
/// (ties by scene index); each pixel composites C = sum c_i a_i T_i and
/// finishes with C + T_final * background.
RenderOutput render(const GaussianScene &scene, const Camera &cam, const Rgb &background = Rgb::Zero(),
                    const RenderOptions &opts = {});

/// Same contract as render, evaluated per pixel over every Gaussian in front
/// of the near plane. Slow; used as the reference for render.
RenderOutput render_brute(const GaussianScene &scene, const Camera &cam, const Rgb &background = Rgb::Zero(),
                          const RenderOptions &opts = {});

/// M(x, y) = 1 iff accumulated opacity >= tau. Throws std::invalid_argument
/// for tau outside [0, 1].
MaskBuffer coverage_mask(const GaussianScene &scene, const Camera &cam, double tau = kDefaultMaskTau,
                         const RenderOptions &opts = {});

/// Thresholds an already rendered accumulation buffer.
MaskBuffer coverage_mask(const RenderOutput &rendered, double tau = kDefaultMaskTau);

/// Replaces M = 0 pixels by `fill`.
ImageBuffer mask_to_image(const ImageBuffer &img, const MaskBuffer &mask, const Rgb &fill = Rgb::Zero());

} // namespace dreamsplat
