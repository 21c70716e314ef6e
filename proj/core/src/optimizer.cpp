#include "dreamsplat/optimizer.hpp"

#include <cmath>
#include <stdexcept>

#include <tbb/blocked_range.h>
#include <tbb/parallel_for.h>

#include "splat_internal.hpp"

namespace dreamsplat {

void FrameTarget::validate() const {
  camera.validate();
  if (target.width() != camera.intrinsics.width || target.height() != camera.intrinsics.height)
    throw std::invalid_argument("FrameTarget: target dimensions do not match camera intrinsics");
}

void OptimConfig::validate() const {
  if (max_iters < 0)
    throw std::invalid_argument("OptimConfig: max_iters must be >= 0");
  if (!(step_size > 0.0) || !std::isfinite(step_size))
    throw std::invalid_argument("OptimConfig: step_size must be positive");
  if (!(convergence_tol >= 0.0))
    throw std::invalid_argument("OptimConfig: convergence_tol must be >= 0");
  if (max_backtracks < 0)
    throw std::invalid_argument("OptimConfig: max_backtracks must be >= 0");
  if (!(position_step_scale > 0.0))
    throw std::invalid_argument("OptimConfig: position_step_scale must be positive");
}

double rgb_loss(const ImageBuffer &rendered, const ImageBuffer &target) {
  if (!rendered.same_shape(target))
    throw std::invalid_argument("rgb_loss: image dimensions differ");
  const std::size_t n = rendered.pixel_count();
  if (n == 0)
    return 0.0;
  const auto a = rendered.data();
  const auto b = target.data();
  double sum = 0.0;
  for (std::size_t p = 0; p < n; ++p) {
    const std::size_t i = p * 3;
    sum += (std::abs(a[i] - b[i]) + std::abs(a[i + 1] - b[i + 1]) + std::abs(a[i + 2] - b[i + 2])) / 3.0;
  }
  return sum / static_cast<double>(n);
}

double total_loss(const GaussianScene &scene, const std::vector<FrameTarget> &frames, const Rgb &background,
                  const RenderOptions &opts) {
  if (frames.empty())
    throw std::invalid_argument("total_loss: frame list is empty");
  double sum = 0.0;
  for (const FrameTarget &f : frames) {
    f.validate();
    sum += rgb_loss(render(scene, f.camera, background, opts).color, f.target);
  }
  return sum / static_cast<double>(frames.size());
}

namespace {

using detail::ProjectedGaussian;

struct Contribution {
  std::uint32_t local = 0; // position within the tile list
  double alpha = 0.0;
  double t_before = 0.0;
  double gauss = 0.0;
  bool clamped = false;
};

// Residuals this small are rounding noise around an exact fit; treat them as zero.
constexpr double kResidualDeadband = 1e-12;

double l1_sign(double r) { return r > kResidualDeadband ? 1.0 : (r < -kResidualDeadband ? -1.0 : 0.0); }

void accumulate_frame(const GaussianScene &scene, const FrameTarget &frame, const ParamFlags &flags,
                      const Rgb &background, const RenderOptions &opts, double weight, SceneGradient &out) {
  const Intrinsics &k = frame.camera.intrinsics;
  const auto projected = detail::project_sorted(scene, frame.camera, opts.lowpass);
  const detail::TileBins bins = detail::bin_tiles(projected, k, opts.tile_size);
  const int tile_count = bins.tiles_x * bins.tiles_y;
  // d loss / d rendered channel, before the sign.
  const double pixel_weight = weight / (3.0 * static_cast<double>(k.width) * k.height);

  std::vector<std::vector<GaussianGradient>> tile_grads(tile_count);

  tbb::parallel_for(tbb::blocked_range<int>(0, tile_count), [&](const tbb::blocked_range<int> &range) {
    std::vector<Contribution> contribs;
    for (int t = range.begin(); t != range.end(); ++t) {
      const auto &list = bins.lists[t];
      auto &local = tile_grads[t];
      local.assign(list.size(), GaussianGradient{});
      if (list.empty())
        continue;

      const int tx = t % bins.tiles_x;
      const int ty = t / bins.tiles_x;
      const int x_end = std::min(k.width, (tx + 1) * bins.tile_size);
      const int y_end = std::min(k.height, (ty + 1) * bins.tile_size);

      for (int y = ty * bins.tile_size; y < y_end; ++y) {
        for (int x = tx * bins.tile_size; x < x_end; ++x) {
          contribs.clear();
          Rgb c = Rgb::Zero();
          double trans = 1.0;
          for (std::uint32_t j = 0; j < list.size(); ++j) {
            const ProjectedGaussian &g = projected[list[j]];
            const detail::KernelEval ke = detail::eval_kernel(g, x, y);
            if (ke.alpha <= 0.0)
              continue;
            contribs.push_back({j, ke.alpha, trans, ke.gauss, ke.clamped});
            c += g.color * (ke.alpha * trans);
            trans *= 1.0 - ke.alpha;
          }
          if (contribs.empty())
            continue;

          const Rgb rendered = c + trans * background;
          const Rgb target = frame.target.pixel(x, y);
          Rgb dl_dc;
          for (int ch = 0; ch < 3; ++ch)
            dl_dc[ch] = l1_sign(rendered[ch] - target[ch]) * pixel_weight;
          if (dl_dc.isZero())
            continue;

          // Light arriving from behind contribution i: sum_{k>i} c_k a_k T_k + T_final * bg.
          Rgb behind = trans * background;
          for (auto it = contribs.rbegin(); it != contribs.rend(); ++it) {
            const ProjectedGaussian &g = projected[list[it->local]];
            GaussianGradient &acc = local[it->local];
            const double w = it->alpha * it->t_before;
            if (flags.color)
              acc.color += w * dl_dc;
            if ((flags.opacity || flags.position) && !it->clamped) {
              const Rgb dc_dalpha = g.color * it->t_before - behind / (1.0 - it->alpha);
              const double dl_dalpha = dl_dc.dot(dc_dalpha);
              if (flags.opacity)
                acc.opacity += dl_dalpha * it->gauss;
              if (flags.position) {
                const double dx = x - g.u;
                const double dy = y - g.v;
                const Eigen::Vector2d dalpha_dmean(it->alpha * (g.conic_a * dx + g.conic_b * dy),
                                                   it->alpha * (g.conic_b * dx + g.conic_c * dy));
                acc.position += g.mean_jacobian.transpose() * (dl_dalpha * dalpha_dmean);
              }
            }
            behind += g.color * w;
          }
        }
      }
    }
  });

  for (int t = 0; t < tile_count; ++t) {
    const auto &list = bins.lists[t];
    for (std::size_t j = 0; j < list.size(); ++j)
      out[projected[list[j]].index] += tile_grads[t][j];
  }
}

} // namespace

SceneGradient gradient(const GaussianScene &scene, const std::vector<FrameTarget> &frames, const ParamFlags &flags,
                       const Rgb &background, const RenderOptions &opts) {
  if (frames.empty())
    throw std::invalid_argument("gradient: frame list is empty");
  detail::validate_background(background);
  SceneGradient out(scene.size());
  const double weight = 1.0 / static_cast<double>(frames.size());
  for (const FrameTarget &f : frames) {
    f.validate();
    accumulate_frame(scene, f, flags, background, opts, weight, out);
  }
  return out;
}

double central_difference(const std::function<double(double)> &f, double x, double h) {
  if (!(h > 0.0))
    throw std::invalid_argument("central_difference: h must be positive");
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

SceneGradient fd_gradient(const GaussianScene &scene, const std::vector<FrameTarget> &frames, const ParamFlags &flags,
                          double h, const Rgb &background, const RenderOptions &opts) {
  if (!(h > 0.0))
    throw std::invalid_argument("fd_gradient: h must be positive");
  SceneGradient out(scene.size());
  GaussianScene work = scene;

  auto probe = [&](std::size_t i, auto &&set) {
    const Gaussian3D saved = work[i];
    return [&, i, saved, set](double value) {
      set(work.gaussians()[i], value);
      const double loss = total_loss(work, frames, background, opts);
      work.gaussians()[i] = saved;
      return loss;
    };
  };

  for (std::size_t i = 0; i < scene.size(); ++i) {
    const Gaussian3D &g = scene[i];
    if (flags.color)
      for (int c = 0; c < 3; ++c)
        out[i].color[c] = central_difference(probe(i, [c](Gaussian3D &x, double v) { x.color[c] = v; }), g.color[c], h);
    if (flags.opacity)
      out[i].opacity = central_difference(probe(i, [](Gaussian3D &x, double v) { x.opacity = v; }), g.opacity, h);
    if (flags.position)
      for (int c = 0; c < 3; ++c)
        out[i].position[c] =
            central_difference(probe(i, [c](Gaussian3D &x, double v) { x.mean[c] = v; }), g.mean[c], h);
  }
  return out;
}

SceneGradient descent_direction(const SceneGradient &grad, const ParamFlags &flags) {
  double max_color = 0.0, max_opacity = 0.0, max_position = 0.0;
  for (const GaussianGradient &g : grad) {
    max_color = std::max(max_color, g.color.cwiseAbs().maxCoeff());
    max_opacity = std::max(max_opacity, std::abs(g.opacity));
    max_position = std::max(max_position, g.position.cwiseAbs().maxCoeff());
  }
  SceneGradient dir(grad.size());
  for (std::size_t i = 0; i < grad.size(); ++i) {
    if (flags.color && max_color > 0.0)
      dir[i].color = -grad[i].color / max_color;
    if (flags.opacity && max_opacity > 0.0)
      dir[i].opacity = -grad[i].opacity / max_opacity;
    if (flags.position && max_position > 0.0)
      dir[i].position = -grad[i].position / max_position;
  }
  return dir;
}

void project_to_valid(GaussianScene &scene) {
  for (Gaussian3D &g : scene.gaussians()) {
    g.opacity = std::clamp(g.opacity, kMinOpacity, kMaxOpacity);
    g.color = g.color.cwiseMax(0.0).cwiseMin(1.0);
    g.scale = g.scale.cwiseMax(kMinScale);
    g.rotation.normalize();
  }
}

namespace {

GaussianScene take_step(const GaussianScene &scene, const SceneGradient &dir, const OptimConfig &cfg, double step) {
  GaussianScene next = scene;
  auto gs = next.gaussians();
  for (std::size_t i = 0; i < gs.size(); ++i) {
    if (cfg.flags.color)
      gs[i].color += step * dir[i].color;
    if (cfg.flags.opacity)
      gs[i].opacity += step * dir[i].opacity;
    if (cfg.flags.position)
      gs[i].mean += step * cfg.position_step_scale * dir[i].position;
  }
  project_to_valid(next);
  return next;
}

} // namespace

OptimResult optimize(const GaussianScene &scene, const std::vector<FrameTarget> &frames, const OptimConfig &cfg,
                     const Rgb &background, const RenderOptions &opts) {
  cfg.validate();
  OptimResult result{scene, {}};
  double loss = total_loss(scene, frames, background, opts);
  result.loss_trace.push_back(loss);
  if (cfg.max_iters == 0 || !cfg.flags.any() || scene.empty())
    return result;

  for (int iter = 0; iter < cfg.max_iters; ++iter) {
    const SceneGradient grad = gradient(result.scene, frames, cfg.flags, background, opts);
    const SceneGradient dir = descent_direction(grad, cfg.flags);

    double step = cfg.step_size;
    GaussianScene candidate = take_step(result.scene, dir, cfg, step);
    double candidate_loss = total_loss(candidate, frames, background, opts);
    bool accepted = !cfg.backtrack || candidate_loss < loss;
    for (int b = 0; !accepted && b < cfg.max_backtracks; ++b) {
      step *= 0.5;
      candidate = take_step(result.scene, dir, cfg, step);
      candidate_loss = total_loss(candidate, frames, background, opts);
      accepted = candidate_loss < loss;
    }

    if (!accepted) {
      // No decreasing step along this direction.
      result.loss_trace.push_back(loss);
      break;
    }

    const double previous = loss;
    result.scene = std::move(candidate);
    loss = candidate_loss;
    result.loss_trace.push_back(loss);

    const double rel = std::abs(previous - loss) / std::max(previous, 1e-300);
    if (loss == 0.0 || rel < cfg.convergence_tol)
      break;
  }
  return result;
}

} // namespace dreamsplat
