#include "cli.hpp"

#include <algorithm>
#include <filesystem>
#include <ostream>

#include <CLI11.hpp>

#include "dreamsplat/config.hpp"
#include "dreamsplat/errors.hpp"
#include "dreamsplat/eval.hpp"
#include "dreamsplat/io.hpp"
#include "dreamsplat/pipeline.hpp"
#include "dreamsplat/rasterizer.hpp"

namespace dreamsplat::cli {

namespace fs = std::filesystem;

namespace {

Rgb to_rgb(const std::vector<double> &v) {
  if (v.size() != 3)
    throw std::invalid_argument("background needs three components");
  return Rgb(v[0], v[1], v[2]);
}

int cmd_reconstruct(const fs::path &config_path, std::ostream &out, std::ostream &err) {
  const RunConfig rc = load_run_config(config_path);
  const ImageBuffer image = load_png(rc.image);
  const Camera cam = load_camera(rc.camera);
  std::optional<DepthMap> depth;
  if (rc.depth)
    depth = load_depth(*rc.depth);
  const Backends backends = Backends::from_config(rc.pipeline);

  fs::create_directories(rc.output_dir);
  try {
    const PipelineResult result = run_pipeline(image, depth ? &*depth : nullptr, cam, rc.pipeline, backends);
    save_ply(result.scene, rc.output_dir / "scene.ply");
    dump_trace(result.trace, rc.output_dir / "trace");
    out << "wrote " << (rc.output_dir / "scene.ply").string() << " (" << result.scene.size() << " gaussians, "
        << result.trace.steps.size() << " steps)\n";
    return kOk;
  } catch (const PipelineError &e) {
    err << "reconstruct: " << e.what() << "\n";
    save_ply(e.last_scene, rc.output_dir / "partial.ply");
    if (!e.trace.steps.empty())
      dump_trace(e.trace, rc.output_dir / "trace");
    if (e.backend_failure)
      return kBackendFailure;
    std::rethrow_exception(e.cause);
  }
}

int cmd_render(const fs::path &ply, const fs::path &camera, const fs::path &out_png, const Rgb &bg) {
  const GaussianScene scene = load_ply(ply);
  const Camera cam = load_camera(camera);
  save_png(render(scene, cam, bg).color, out_png);
  return kOk;
}

int cmd_mask(const fs::path &ply, const fs::path &camera, double tau, const fs::path &out_png) {
  if (!(tau >= 0.0 && tau <= 1.0))
    throw std::invalid_argument("--tau must lie in [0, 1]");
  const GaussianScene scene = load_ply(ply);
  const Camera cam = load_camera(camera);
  save_mask_png(coverage_mask(scene, cam, tau), out_png);
  return kOk;
}

int cmd_eval(const fs::path &ply, const fs::path &targets_dir, const fs::path &out_json, const Rgb &bg,
             std::ostream &out) {
  if (!fs::is_directory(targets_dir))
    throw IoError("targets directory does not exist: " + targets_dir.string());
  std::vector<fs::path> pngs;
  for (const auto &entry : fs::directory_iterator(targets_dir))
    if (entry.is_regular_file() && entry.path().extension() == ".png")
      pngs.push_back(entry.path());
  std::sort(pngs.begin(), pngs.end());
  if (pngs.empty())
    throw IoError("no target PNGs in " + targets_dir.string());

  std::vector<FrameTarget> targets;
  std::vector<std::string> names;
  for (const fs::path &png : pngs) {
    fs::path cam_path = png;
    cam_path.replace_extension(".json");
    targets.push_back(FrameTarget{load_camera(cam_path), load_png(png)});
    names.push_back(png.stem().string());
  }

  const GaussianScene scene = load_ply(ply);
  const EvalReport report = eval_views(scene, targets, bg, names);
  write_text_atomic(out_json, report.to_json());
  out << "mean L1 " << report.mean_l1 << ", mean PSNR "
      << (report.mean_psnr_infinite ? std::string("inf") : std::to_string(report.mean_psnr)) << " dB\n";
  return kOk;
}

int cmd_validate(const fs::path &ply, std::ostream &out, std::ostream &err) {
  const GaussianScene scene = load_ply(ply);
  const auto violations = validate_scene(scene);
  for (const std::string &v : violations)
    err << v << "\n";
  if (!violations.empty()) {
    err << violations.size() << " violation(s)\n";
    return kIoOrParse;
  }
  out << scene.size() << " gaussians, all valid\n";
  return kOk;
}

} // namespace

int run(const std::vector<std::string> &args, std::ostream &out, std::ostream &err) {
  CLI::App app{"Single-image scene completion with 3D Gaussian splatting", "dreamsplat"};
  app.require_subcommand(1);

  std::string config, ply, camera, out_path, targets;
  double tau = kDefaultMaskTau;
  std::vector<double> background{0.0, 0.0, 0.0};

  auto *reconstruct = app.add_subcommand("reconstruct", "Run the completion pipeline from a JSON run config");
  reconstruct->add_option("--config", config, "Run configuration JSON")->required();

  auto *render_cmd = app.add_subcommand("render", "Render a PLY scene from a camera");
  render_cmd->add_option("--ply", ply)->required();
  render_cmd->add_option("--camera", camera)->required();
  render_cmd->add_option("--out", out_path)->required();
  render_cmd->add_option("--background", background)->expected(3);

  auto *mask_cmd = app.add_subcommand("mask", "Write the observed-region mask of a scene");
  mask_cmd->add_option("--ply", ply)->required();
  mask_cmd->add_option("--camera", camera)->required();
  mask_cmd->add_option("--tau", tau)->required();
  mask_cmd->add_option("--out", out_path)->required();

  auto *eval_cmd = app.add_subcommand("eval", "Score a scene against target views (<name>.png + <name>.json)");
  eval_cmd->add_option("--ply", ply)->required();
  eval_cmd->add_option("--targets", targets)->required();
  eval_cmd->add_option("--out", out_path)->required();
  eval_cmd->add_option("--background", background)->expected(3);

  auto *validate_cmd = app.add_subcommand("validate", "Check every Gaussian in a PLY file");
  validate_cmd->add_option("--ply", ply)->required();

  std::vector<std::string> reversed(args.begin() + std::min<std::size_t>(1, args.size()), args.end());
  std::reverse(reversed.begin(), reversed.end());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp &) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp &) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError &e) {
    err << e.what() << "\n" << app.help();
    return kUsage;
  }

  try {
    if (*reconstruct)
      return cmd_reconstruct(config, out, err);
    if (*render_cmd)
      return cmd_render(ply, camera, out_path, to_rgb(background));
    if (*mask_cmd)
      return cmd_mask(ply, camera, tau, out_path);
    if (*eval_cmd)
      return cmd_eval(ply, targets, out_path, to_rgb(background), out);
    if (*validate_cmd)
      return cmd_validate(ply, out, err);
  } catch (const BackendUnavailable &e) {
    err << "backend unavailable: " << e.what() << "\n";
    if (!e.transcript().empty())
      err << e.transcript() << "\n";
    return kBackendFailure;
  } catch (const OracleMiss &e) {
    err << "backend failure: " << e.what() << "\n";
    return kBackendFailure;
  } catch (const std::invalid_argument &e) {
    err << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception &e) {
    err << "error: " << e.what() << "\n";
    return kIoOrParse;
  }
  return kUsage;
}

} // namespace dreamsplat::cli
