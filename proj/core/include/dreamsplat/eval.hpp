#pragma once

#include <string>
#include <vector>

#include "dreamsplat/optimizer.hpp"
#include "dreamsplat/rasterizer.hpp"
#include "dreamsplat/scene.hpp"

namespace dreamsplat {

struct ViewEval {
  std::string name;
  double l1 = 0.0;
  /// Meaningless when psnr_infinite is set (exact match).
  double psnr = 0.0;
  bool psnr_infinite = false;
};

struct EvalReport {
  std::vector<ViewEval> views;
  double mean_l1 = 0.0;
  double mean_psnr = 0.0;
  bool mean_psnr_infinite = false;

  std::string to_json() const;
};

/// Mean squared error over all channels, restricted to M = 1 pixels when a mask is given.
double mse(const ImageBuffer &a, const ImageBuffer &b, const MaskBuffer *mask = nullptr);

/// 10 log10(1 / MSE); +infinity for an exact match.
double psnr(const ImageBuffer &a, const ImageBuffer &b, const MaskBuffer *mask = nullptr);

/// Renders every target view and scores it. Names default to "view_<i>".
EvalReport eval_views(const GaussianScene &scene, const std::vector<FrameTarget> &targets,
                      const Rgb &background = Rgb::Zero(), const std::vector<std::string> &names = {},
                      const RenderOptions &opts = {});

} // namespace dreamsplat
