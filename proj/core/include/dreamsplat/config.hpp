#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "dreamsplat/pipeline.hpp"

namespace dreamsplat {

/// A reconstruct run: pipeline settings plus input files and an output directory.
///
/// JSON layout (every object rejects unknown keys; relative paths resolve
/// against the config file's directory):
///
///   {
///     "image": "input.png", "depth": "depth.png", "camera": "camera.json",
///     "output_dir": "run",
///     "angles_deg": [-10, 10, -20, 20, -30, 30],
///     "mask_tau": 0.5, "background": [0, 0, 0],
///     "optimize_every_step": true, "rescale_factor": 1.0,
///     "optim": {"max_iters": 100, "step_size": 0.05, "convergence_tol": 1e-5,
///               "backtrack": true, "optimize_color": true,
///               "optimize_opacity": true, "optimize_position": false},
///     "reconstructor": {"kind": "rgbd-lifter", "opacity_init": 0.95, "pixel_scale_factor": 0.7},
///     "inpainter": {"kind": "oracle-directory", "path": "gt"},
///     "prompter": {"kind": "fixed", "prompt": "An indoor scene"},
///     "depth_source": {"kind": "directory", "path": "depths"}
///   }
///
/// Remote kinds take {"kind": "remote", "url": "http://host:port", "timeout_s": 120}.
struct RunConfig {
  std::filesystem::path image;
  std::optional<std::filesystem::path> depth;
  std::filesystem::path camera;
  std::filesystem::path output_dir;
  PipelineConfig pipeline;
};

/// Throws ParseError for malformed JSON or unknown keys and IoError for
/// referenced paths that do not exist.
RunConfig parse_run_config(const std::string &text, const std::filesystem::path &base_dir);
RunConfig load_run_config(const std::filesystem::path &path);

} // namespace dreamsplat
