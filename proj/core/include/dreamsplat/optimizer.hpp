#pragma once

#include <functional>
#include <vector>

#include "dreamsplat/geometry.hpp"
#include "dreamsplat/rasterizer.hpp"
#include "dreamsplat/scene.hpp"

namespace dreamsplat {

/// A view to fit: camera plus the image the scene should reproduce from it.
struct FrameTarget {
  Camera camera;
  ImageBuffer target;

  void validate() const;
};

struct ParamFlags {
  bool color = true;
  bool opacity = true;
  bool position = false;

  bool any() const noexcept { return color || opacity || position; }
};

struct OptimConfig {
  int max_iters = 100;
  /// Largest per-parameter change of a full step, per parameter group.
  double step_size = 0.05;
  ParamFlags flags;
  double convergence_tol = 1e-5;
  bool backtrack = true;
  int max_backtracks = 30;
  /// Positions are in world units; their step is step_size * position_step_scale.
  double position_step_scale = 0.01;

  void validate() const;
};

constexpr double kMinOpacity = 1e-4;
constexpr double kMaxOpacity = 1.0 - 1e-4;
constexpr double kMinScale = 1e-6;

struct GaussianGradient {
  Rgb color = Rgb::Zero();
  double opacity = 0.0;
  Vec3 position = Vec3::Zero();

  GaussianGradient &operator+=(const GaussianGradient &o) {
    color += o.color;
    opacity += o.opacity;
    position += o.position;
    return *this;
  }
};

using SceneGradient = std::vector<GaussianGradient>;

/// Mean over pixels of the per-pixel mean absolute channel difference.
/// rgb_loss(black, white) == 1.
double rgb_loss(const ImageBuffer &rendered, const ImageBuffer &target);

/// Average of rgb_loss over frames. Throws std::invalid_argument when empty.
double total_loss(const GaussianScene &scene, const std::vector<FrameTarget> &frames,
                  const Rgb &background = Rgb::Zero(), const RenderOptions &opts = {});

/// Analytic gradient of total_loss through the compositing equations.
/// The L1 subgradient is sign(rendered - target), zero within 1e-12 of equality. Position
/// gradients flow through the projected center with the screen covariance
/// held fixed. Unselected groups are left at zero.
SceneGradient gradient(const GaussianScene &scene, const std::vector<FrameTarget> &frames, const ParamFlags &flags,
                       const Rgb &background = Rgb::Zero(), const RenderOptions &opts = {});

/// (f(x + h) - f(x - h)) / 2h.
double central_difference(const std::function<double(double)> &f, double x, double h);

/// Central finite differences of total_loss, one scalar parameter at a time.
/// Parameters are perturbed without clamping, so opacity must be interior.
SceneGradient fd_gradient(const GaussianScene &scene, const std::vector<FrameTarget> &frames, const ParamFlags &flags,
                          double h, const Rgb &background = Rgb::Zero(), const RenderOptions &opts = {});

/// Negative gradient with each selected group scaled to unit max-abs norm.
/// Groups whose gradient is identically zero stay zero.
SceneGradient descent_direction(const SceneGradient &grad, const ParamFlags &flags);

/// Clamps opacity, color and scale into their valid ranges and renormalizes rotations.
void project_to_valid(GaussianScene &scene);

struct OptimResult {
  GaussianScene scene;
  /// trace[0] is the initial loss; one entry per iteration after that.
  std::vector<double> loss_trace;
};

/// Gradient descent along descent_direction. With backtracking the step is
/// halved until the loss strictly decreases, so the trace is non-increasing.
OptimResult optimize(const GaussianScene &scene, const std::vector<FrameTarget> &frames, const OptimConfig &cfg,
                     const Rgb &background = Rgb::Zero(), const RenderOptions &opts = {});

} // namespace dreamsplat
