#include "dreamsplat/config.hpp"

#include <algorithm>
#include <initializer_list>

#include <json.hpp>

#include "dreamsplat/errors.hpp"
#include "dreamsplat/io.hpp"

namespace dreamsplat {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void require_object(const json &j, const std::string &where) {
  if (!j.is_object())
    throw ParseError("config: '" + where + "' must be an object");
}

void reject_unknown(const json &j, std::initializer_list<std::string_view> allowed, const std::string &where) {
  for (const auto &[key, _] : j.items())
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw ParseError("config: unknown key '" + key + "' in " + where);
}

template <typename T> T get_or(const json &j, const char *key, T fallback) {
  const auto it = j.find(key);
  return it == j.end() ? fallback : it->get<T>();
}

fs::path resolve(const fs::path &base, const std::string &p) {
  const fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

fs::path existing(const fs::path &p, const std::string &what) {
  if (!fs::exists(p))
    throw IoError("config: " + what + " does not exist: " + p.string());
  return p;
}

RemoteEndpoint parse_remote(const json &j) {
  RemoteEndpoint ep;
  ep.url = j.at("url").get<std::string>();
  ep.timeout_s = get_or(j, "timeout_s", ep.timeout_s);
  if (!(ep.timeout_s > 0.0))
    throw ParseError("config: timeout_s must be positive");
  return ep;
}

ReconstructorConfig parse_reconstructor(const json &j) {
  require_object(j, "reconstructor");
  ReconstructorConfig cfg;
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "rgbd-lifter") {
    reject_unknown(j, {"kind", "opacity_init", "pixel_scale_factor"}, "reconstructor");
    cfg.kind = ReconstructorConfig::Kind::RgbdLifter;
    cfg.lifter.opacity_init = get_or(j, "opacity_init", cfg.lifter.opacity_init);
    cfg.lifter.pixel_scale_factor = get_or(j, "pixel_scale_factor", cfg.lifter.pixel_scale_factor);
  } else if (kind == "remote") {
    reject_unknown(j, {"kind", "url", "timeout_s"}, "reconstructor");
    cfg.kind = ReconstructorConfig::Kind::Remote;
    cfg.remote = parse_remote(j);
  } else {
    throw ParseError("config: unknown reconstructor kind '" + kind + "'");
  }
  return cfg;
}

InpainterConfig parse_inpainter(const json &j, const fs::path &base) {
  require_object(j, "inpainter");
  InpainterConfig cfg;
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "oracle-directory") {
    reject_unknown(j, {"kind", "path"}, "inpainter");
    cfg.kind = InpainterConfig::Kind::OracleDirectory;
    cfg.oracle_dir = existing(resolve(base, j.at("path").get<std::string>()), "oracle directory");
  } else if (kind == "flat-fill") {
    reject_unknown(j, {"kind"}, "inpainter");
    cfg.kind = InpainterConfig::Kind::FlatFill;
  } else if (kind == "remote") {
    reject_unknown(j, {"kind", "url", "timeout_s"}, "inpainter");
    cfg.kind = InpainterConfig::Kind::Remote;
    cfg.remote = parse_remote(j);
  } else {
    throw ParseError("config: unknown inpainter kind '" + kind + "'");
  }
  return cfg;
}

PrompterConfig parse_prompter(const json &j) {
  require_object(j, "prompter");
  PrompterConfig cfg;
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "fixed") {
    reject_unknown(j, {"kind", "prompt"}, "prompter");
    cfg.kind = PrompterConfig::Kind::Fixed;
    cfg.prompt = j.at("prompt").get<std::string>();
    if (cfg.prompt.empty())
      throw ParseError("config: fixed prompter needs a non-empty prompt");
  } else if (kind == "remote") {
    reject_unknown(j, {"kind", "url", "timeout_s"}, "prompter");
    cfg.kind = PrompterConfig::Kind::Remote;
    cfg.remote = parse_remote(j);
  } else {
    throw ParseError("config: unknown prompter kind '" + kind + "'");
  }
  return cfg;
}

DepthSourceConfig parse_depth_source(const json &j, const fs::path &base) {
  require_object(j, "depth_source");
  DepthSourceConfig cfg;
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "none") {
    reject_unknown(j, {"kind"}, "depth_source");
  } else if (kind == "directory") {
    reject_unknown(j, {"kind", "path"}, "depth_source");
    cfg.kind = DepthSourceConfig::Kind::Directory;
    cfg.dir = existing(resolve(base, j.at("path").get<std::string>()), "depth directory");
  } else {
    throw ParseError("config: unknown depth_source kind '" + kind + "'");
  }
  return cfg;
}

OptimConfig parse_optim(const json &j) {
  require_object(j, "optim");
  reject_unknown(j,
                 {"max_iters", "step_size", "convergence_tol", "backtrack", "max_backtracks", "position_step_scale",
                  "optimize_color", "optimize_opacity", "optimize_position"},
                 "optim");
  OptimConfig cfg;
  cfg.max_iters = get_or(j, "max_iters", cfg.max_iters);
  cfg.step_size = get_or(j, "step_size", cfg.step_size);
  cfg.convergence_tol = get_or(j, "convergence_tol", cfg.convergence_tol);
  cfg.backtrack = get_or(j, "backtrack", cfg.backtrack);
  cfg.max_backtracks = get_or(j, "max_backtracks", cfg.max_backtracks);
  cfg.position_step_scale = get_or(j, "position_step_scale", cfg.position_step_scale);
  cfg.flags.color = get_or(j, "optimize_color", cfg.flags.color);
  cfg.flags.opacity = get_or(j, "optimize_opacity", cfg.flags.opacity);
  cfg.flags.position = get_or(j, "optimize_position", cfg.flags.position);
  return cfg;
}

} // namespace

RunConfig parse_run_config(const std::string &text, const fs::path &base_dir) {
  RunConfig rc;
  try {
    const json j = json::parse(text);
    require_object(j, "root");
    reject_unknown(j,
                   {"image", "depth", "camera", "output_dir", "angles_deg", "mask_tau", "background",
                    "optimize_every_step", "rescale_factor", "optim", "reconstructor", "inpainter", "prompter",
                    "depth_source"},
                   "root");

    rc.image = existing(resolve(base_dir, j.at("image").get<std::string>()), "image");
    rc.camera = existing(resolve(base_dir, j.at("camera").get<std::string>()), "camera");
    if (j.contains("depth"))
      rc.depth = existing(resolve(base_dir, j.at("depth").get<std::string>()), "depth");
    rc.output_dir = resolve(base_dir, j.at("output_dir").get<std::string>());

    PipelineConfig &p = rc.pipeline;
    p.angles_deg = get_or(j, "angles_deg", p.angles_deg);
    p.mask_tau = get_or(j, "mask_tau", p.mask_tau);
    if (j.contains("background")) {
      const auto bg = j.at("background").get<std::vector<double>>();
      if (bg.size() != 3)
        throw ParseError("config: background needs 3 components");
      p.background = Rgb(bg[0], bg[1], bg[2]);
    }
    p.optimize_every_step = get_or(j, "optimize_every_step", p.optimize_every_step);
    p.rescale_factor = get_or(j, "rescale_factor", p.rescale_factor);
    if (j.contains("optim"))
      p.optim = parse_optim(j.at("optim"));
    if (j.contains("reconstructor"))
      p.reconstructor = parse_reconstructor(j.at("reconstructor"));
    if (j.contains("inpainter"))
      p.inpainter = parse_inpainter(j.at("inpainter"), base_dir);
    if (j.contains("prompter"))
      p.prompter = parse_prompter(j.at("prompter"));
    if (j.contains("depth_source"))
      p.depth = parse_depth_source(j.at("depth_source"), base_dir);
  } catch (const json::exception &e) {
    throw ParseError(std::string("config: ") + e.what());
  }
  try {
    rc.pipeline.validate();
  } catch (const std::invalid_argument &e) {
    throw ParseError(std::string("config: ") + e.what());
  }
  return rc;
}

RunConfig load_run_config(const fs::path &path) {
  return parse_run_config(read_text(path), path.has_parent_path() ? path.parent_path() : fs::path("."));
}

} // namespace dreamsplat
