#include "dreamsplat/pipeline.hpp"

#include <cmath>
#include <sstream>

#include <json.hpp>

#include "dreamsplat/errors.hpp"
#include "dreamsplat/io.hpp"

namespace dreamsplat {

namespace fs = std::filesystem;

void PipelineConfig::validate() const {
  for (double a : angles_deg)
    if (!std::isfinite(a))
      throw std::invalid_argument("PipelineConfig: angles must be finite");
  if (!(mask_tau >= 0.0 && mask_tau <= 1.0))
    throw std::invalid_argument("PipelineConfig: mask_tau must lie in [0, 1]");
  if (!(rescale_factor > 0.0) || !std::isfinite(rescale_factor))
    throw std::invalid_argument("PipelineConfig: rescale_factor must be positive");
  if (!background.allFinite() || (background.array() < 0.0).any() || (background.array() > 1.0).any())
    throw std::invalid_argument("PipelineConfig: background must be RGB in [0, 1]");
  optim.validate();
}

Backends Backends::from_config(const PipelineConfig &cfg) {
  Backends b;
  b.reconstructor = make_reconstructor(cfg.reconstructor, cfg.rescale_factor);
  b.inpainter = make_inpainter(cfg.inpainter);
  b.prompter = make_prompter(cfg.prompter);
  b.depth = make_depth_source(cfg.depth);
  return b;
}

GaussianScene retain_unobserved(const GaussianScene &new_scene, const MaskBuffer &mask, const Camera &cam) {
  const Intrinsics &k = cam.intrinsics;
  if (mask.width() != k.width || mask.height() != k.height)
    throw std::invalid_argument("retain_unobserved: mask does not match the camera");

  std::vector<Gaussian3D> kept;
  std::vector<std::size_t> provenance;
  for (std::size_t i = 0; i < new_scene.size(); ++i) {
    const Vec3 pc = world_to_camera(cam.pose, new_scene[i].mean);
    if (!(pc.z() > kNearPlane))
      continue;
    const Projection p = project_point(cam, new_scene[i].mean);
    const double px = std::floor(p.u + 0.5);
    const double py = std::floor(p.v + 0.5);
    if (!(px >= 0.0 && px < k.width && py >= 0.0 && py < k.height))
      continue;
    if (mask.at(static_cast<int>(px), static_cast<int>(py)) == 0) {
      kept.push_back(new_scene[i]);
      provenance.push_back(new_scene.provenance()[i]);
    }
  }
  return GaussianScene(std::move(kept), std::move(provenance));
}

StepOutcome run_step(const GaussianScene &prev, const Camera &cam_next, std::size_t step_index, double angle_deg,
                     const std::string &prompt, const std::vector<FrameTarget> &frames_so_far,
                     const PipelineConfig &cfg, const Backends &backends) {
  StepRecord rec;
  rec.step = step_index;
  rec.angle_deg = angle_deg;
  rec.camera = cam_next;
  rec.prev_count = prev.size();

  const RenderOutput rendered = render(prev, cam_next, cfg.background, cfg.render);
  rec.pre_inpaint = rendered.color;
  rec.mask = coverage_mask(rendered, cfg.mask_tau);
  rec.inpainted = backends.inpainter->inpaint(rec.pre_inpaint, rec.mask, prompt, step_index);

  const std::optional<DepthMap> depth = backends.depth ? backends.depth->depth_for_step(step_index) : std::nullopt;
  const GaussianScene fresh =
      backends.reconstructor->reconstruct(rec.inpainted, cam_next, depth ? &*depth : nullptr);
  rec.new_count = fresh.size();

  const GaussianScene retained = retain_unobserved(fresh, rec.mask, cam_next);
  rec.retained_count = retained.size();

  StepOutcome out{merge_scenes(prev, retained, step_index), {}, FrameTarget{cam_next, rec.inpainted}};

  if (cfg.optimize_every_step) {
    std::vector<FrameTarget> frames = frames_so_far;
    frames.push_back(out.frame);
    OptimResult opt = optimize(out.scene, frames, cfg.optim, cfg.background, cfg.render);
    out.scene = std::move(opt.scene);
    rec.loss_trace = std::move(opt.loss_trace);
  }
  rec.scene_count = out.scene.size();
  out.record = std::move(rec);
  return out;
}

namespace {

bool is_backend_failure(std::exception_ptr e) {
  try {
    std::rethrow_exception(e);
  } catch (const BackendUnavailable &) {
    return true;
  } catch (const OracleMiss &) {
    return true;
  } catch (...) {
    return false;
  }
}

std::string describe_exception(std::exception_ptr e) {
  try {
    std::rethrow_exception(e);
  } catch (const std::exception &ex) {
    return ex.what();
  } catch (...) {
    return "unknown error";
  }
}

} // namespace

PipelineResult run_pipeline(const ImageBuffer &image0, const DepthMap *depth0, const Camera &base_cam,
                            const PipelineConfig &cfg, const Backends &backends) {
  cfg.validate();
  base_cam.validate();
  if (!backends.reconstructor || !backends.inpainter || !backends.prompter)
    throw std::invalid_argument("run_pipeline: reconstructor, inpainter and prompter are required");
  if (image0.width() != base_cam.intrinsics.width || image0.height() != base_cam.intrinsics.height)
    throw std::invalid_argument("run_pipeline: input image does not match the camera");

  PipelineResult result;
  const PoseSchedule schedule = schedule_from_config(base_cam.pose, cfg.angles_deg);

  auto fail = [&](std::size_t step, std::exception_ptr cause) -> PipelineError {
    return PipelineError("step " + std::to_string(step) + " failed: " + describe_exception(cause), result.scene,
                         result.trace, cause, is_backend_failure(cause));
  };

  try {
    result.scene = backends.reconstructor->reconstruct(image0, base_cam, depth0);
    result.trace.prompt = backends.prompter->describe(image0);
  } catch (...) {
    throw fail(0, std::current_exception());
  }

  StepRecord rec0;
  rec0.step = 0;
  rec0.camera = base_cam;
  rec0.pre_inpaint = image0;
  rec0.mask = MaskBuffer(image0.width(), image0.height(), 0);
  rec0.inpainted = image0;
  rec0.new_count = result.scene.size();
  rec0.retained_count = result.scene.size();
  rec0.scene_count = result.scene.size();
  result.trace.steps.push_back(std::move(rec0));
  result.frames.push_back(FrameTarget{base_cam, image0});

  for (std::size_t i = 0; i < schedule.size(); ++i) {
    const std::size_t step_index = i + 1;
    const Camera cam{base_cam.intrinsics, yaw_pose(schedule.base, schedule.angles_deg[i])};
    try {
      StepOutcome out = run_step(result.scene, cam, step_index, schedule.angles_deg[i], result.trace.prompt,
                                 result.frames, cfg, backends);
      result.scene = std::move(out.scene);
      result.frames.push_back(std::move(out.frame));
      result.trace.steps.push_back(std::move(out.record));
    } catch (...) {
      throw fail(step_index, std::current_exception());
    }
  }

  if (!cfg.optimize_every_step && schedule.size() > 0) {
    OptimResult opt = optimize(result.scene, result.frames, cfg.optim, cfg.background, cfg.render);
    result.scene = std::move(opt.scene);
    result.trace.final_loss_trace = std::move(opt.loss_trace);
  }
  return result;
}

void dump_trace(const PipelineTrace &trace, const fs::path &dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec)
    throw IoError("cannot create " + dir.string() + ": " + ec.message());

  nlohmann::json summary;
  summary["prompt"] = trace.prompt;
  summary["steps"] = nlohmann::json::array();
  std::ostringstream csv;
  csv << "step,iteration,loss\n";
  csv.precision(17);

  for (const StepRecord &r : trace.steps) {
    const std::string stem = "step_" + std::to_string(r.step);
    save_png(r.pre_inpaint, dir / (stem + "_render.png"));
    save_mask_png(r.mask, dir / (stem + "_mask.png"));
    save_png(r.inpainted, dir / (stem + "_inpainted.png"));
    for (std::size_t it = 0; it < r.loss_trace.size(); ++it)
      csv << r.step << "," << it << "," << r.loss_trace[it] << "\n";
    summary["steps"].push_back({{"step", r.step},
                                {"angle_deg", r.angle_deg},
                                {"prev_count", r.prev_count},
                                {"new_count", r.new_count},
                                {"retained_count", r.retained_count},
                                {"scene_count", r.scene_count},
                                {"observed_pixels", r.mask.count_observed()},
                                {"initial_loss", r.loss_trace.empty() ? nlohmann::json() : nlohmann::json(r.loss_trace.front())},
                                {"final_loss", r.loss_trace.empty() ? nlohmann::json() : nlohmann::json(r.loss_trace.back())}});
  }
  if (!trace.final_loss_trace.empty()) {
    for (std::size_t it = 0; it < trace.final_loss_trace.size(); ++it)
      csv << "final," << it << "," << trace.final_loss_trace[it] << "\n";
    summary["final_optimization"] = {{"initial_loss", trace.final_loss_trace.front()},
                                     {"final_loss", trace.final_loss_trace.back()}};
  }
  write_text_atomic(dir / "loss_trace.csv", csv.str());
  write_text_atomic(dir / "summary.json", summary.dump(2) + "\n");
}

} // namespace dreamsplat
