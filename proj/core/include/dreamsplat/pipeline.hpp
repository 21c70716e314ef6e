#pragma once

#include <cstddef>
#include <exception>
#include <filesystem>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "dreamsplat/backends.hpp"
#include "dreamsplat/geometry.hpp"
#include "dreamsplat/optimizer.hpp"
#include "dreamsplat/rasterizer.hpp"
#include "dreamsplat/scene.hpp"

namespace dreamsplat {

struct PipelineConfig {
  /// Yaw angles relative to the input camera, visited in order.
  std::vector<double> angles_deg = default_yaw_angles();
  double mask_tau = kDefaultMaskTau;
  OptimConfig optim;
  Rgb background = Rgb::Zero();
  /// Optimize after every merge; otherwise once after the last step.
  bool optimize_every_step = true;
  double rescale_factor = 1.0;
  RenderOptions render;

  ReconstructorConfig reconstructor;
  InpainterConfig inpainter;
  PrompterConfig prompter;
  DepthSourceConfig depth;

  void validate() const;
};

/// The model backends a run talks to. Built from config or injected directly.
struct Backends {
  std::unique_ptr<Reconstructor> reconstructor;
  std::unique_ptr<Inpainter> inpainter;
  std::unique_ptr<Prompter> prompter;
  std::unique_ptr<DepthSource> depth;

  static Backends from_config(const PipelineConfig &cfg);
};

struct StepRecord {
  std::size_t step = 0;
  double angle_deg = 0.0;
  Camera camera;
  ImageBuffer pre_inpaint; // I'_i (I_0 for step 0)
  MaskBuffer mask;         // all zeros for step 0
  ImageBuffer inpainted;   // I_i
  std::size_t prev_count = 0;
  std::size_t new_count = 0;      // |R'_i|
  std::size_t retained_count = 0; // |R~'_i|
  std::size_t scene_count = 0;    // |R_i|
  std::vector<double> loss_trace;
};

struct PipelineTrace {
  std::string prompt;
  std::vector<StepRecord> steps;
  /// Loss trace of the final-only optimization, when that mode is used.
  std::vector<double> final_loss_trace;
};

struct PipelineResult {
  GaussianScene scene;
  PipelineTrace trace;
  std::vector<FrameTarget> frames;
};

/// Thrown when a step fails; carries the last completed scene.
class PipelineError : public std::runtime_error {
public:
  PipelineError(const std::string &what, GaussianScene last_scene, PipelineTrace trace, std::exception_ptr cause,
                bool backend_failure)
      : std::runtime_error(what), last_scene(std::move(last_scene)), trace(std::move(trace)), cause(cause),
        backend_failure(backend_failure) {}

  GaussianScene last_scene;
  PipelineTrace trace;
  std::exception_ptr cause;
  bool backend_failure;
};

/// Keeps Gaussians whose center lands (nearest pixel) on an M = 0 pixel.
/// Gaussians behind the camera or outside the image are dropped.
GaussianScene retain_unobserved(const GaussianScene &new_scene, const MaskBuffer &mask, const Camera &cam);

struct StepOutcome {
  GaussianScene scene;
  StepRecord record;
  FrameTarget frame;
};

/// One render -> mask -> inpaint -> reconstruct -> retain -> merge (-> optimize)
/// iteration. `frames_so_far` excludes the new view; the outcome carries it.
StepOutcome run_step(const GaussianScene &prev, const Camera &cam_next, std::size_t step_index, double angle_deg,
                     const std::string &prompt, const std::vector<FrameTarget> &frames_so_far,
                     const PipelineConfig &cfg, const Backends &backends);

/// R_0 comes from the input image; each scheduled angle then runs one step.
/// `depth0` may be null for backends that do not need depth.
PipelineResult run_pipeline(const ImageBuffer &image0, const DepthMap *depth0, const Camera &base_cam,
                            const PipelineConfig &cfg, const Backends &backends);

/// Writes step_<i>_render.png, step_<i>_mask.png, step_<i>_inpainted.png,
/// loss_trace.csv and summary.json into `dir`.
void dump_trace(const PipelineTrace &trace, const std::filesystem::path &dir);

} // namespace dreamsplat
