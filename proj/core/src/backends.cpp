#include "dreamsplat/backends.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

#include <httplib.h>
#include <json.hpp>

#include "dreamsplat/codec.hpp"
#include "dreamsplat/errors.hpp"

namespace dreamsplat {

namespace fs = std::filesystem;
using nlohmann::json;

GaussianScene lift_rgbd(const ImageBuffer &image, const DepthMap &depth, const Camera &cam,
                        const LifterSettings &settings) {
  cam.validate();
  if (image.width() != depth.width() || image.height() != depth.height())
    throw std::invalid_argument("lift_rgbd: image and depth dimensions differ");
  if (image.width() != cam.intrinsics.width || image.height() != cam.intrinsics.height)
    throw std::invalid_argument("lift_rgbd: image dimensions do not match camera intrinsics");
  if (!(settings.opacity_init >= 0.0 && settings.opacity_init <= 1.0) || !(settings.pixel_scale_factor > 0.0))
    throw std::invalid_argument("lift_rgbd: bad lifter settings");

  const Intrinsics &k = cam.intrinsics;
  GaussianScene scene;
  scene.reserve(image.pixel_count());
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x) {
      if (!depth.valid(x, y))
        continue;
      const double d = depth.at(x, y);
      const Vec3 pc((x - k.cx) / k.fx * d, (y - k.cy) / k.fy * d, d);
      Gaussian3D g;
      g.mean = camera_to_world(cam.pose, pc);
      g.rotation = Quat::Identity();
      g.scale = Vec3::Constant(settings.pixel_scale_factor * d / k.fx);
      g.opacity = settings.opacity_init;
      g.color = image.pixel(x, y);
      scene.push_back(g, 0);
    }
  }
  return scene;
}

GaussianScene RgbdLifterReconstructor::reconstruct(const ImageBuffer &image, const Camera &cam,
                                                   const DepthMap *depth) const {
  if (depth == nullptr)
    throw std::invalid_argument("rgbd-lifter reconstructor requires a depth map");
  return lift_rgbd(image, *depth, cam, settings_);
}

namespace {

std::string png_b64(const ImageBuffer &img) { return base64_encode(encode_png_rgb(img)); }

/// Blocking POST; any transport failure or non-200 status is BackendUnavailable.
std::string post_json(const RemoteEndpoint &ep, const std::string &path, const json &body) {
  httplib::Client client(ep.url);
  if (!client.is_valid())
    throw BackendUnavailable("invalid endpoint url '" + ep.url + "'");
  const auto timeout = std::chrono::duration<double>(ep.timeout_s);
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);

  const auto res = client.Post(path, body.dump(), "application/json");
  if (!res)
    throw BackendUnavailable("POST " + ep.url + path + " failed", httplib::to_string(res.error()));
  if (res->status != 200) {
    std::string excerpt = res->body.substr(0, 512);
    throw BackendUnavailable("POST " + ep.url + path + " returned HTTP " + std::to_string(res->status),
                             "HTTP " + std::to_string(res->status) + "\n" + excerpt);
  }
  return res->body;
}

json parse_response(const std::string &body, const std::string &what) {
  try {
    return json::parse(body);
  } catch (const json::exception &e) {
    throw BackendUnavailable(what + ": malformed JSON response", e.what());
  }
}

} // namespace

RemoteReconstructor::RemoteReconstructor(RemoteEndpoint endpoint, double rescale_factor)
    : endpoint_(std::move(endpoint)), rescale_factor_(rescale_factor) {
  if (!(rescale_factor > 0.0) || !std::isfinite(rescale_factor))
    throw std::invalid_argument("RemoteReconstructor: rescale factor must be positive");
}

GaussianScene RemoteReconstructor::reconstruct(const ImageBuffer &image, const Camera &cam, const DepthMap *) const {
  const std::string body = post_json(endpoint_, "/v1/reconstruct", json{{"image", png_b64(image)}});
  GaussianScene camera_frame;
  try {
    camera_frame = decode_ply(std::span(reinterpret_cast<const std::uint8_t *>(body.data()), body.size()));
  } catch (const ParseError &e) {
    throw BackendUnavailable("reconstruct: service returned an unreadable PLY", e.what());
  }
  return transform_scene_to_world(rescale_scene(camera_frame, rescale_factor_), cam.pose);
}

ImageBuffer Inpainter::inpaint(const ImageBuffer &image, const MaskBuffer &mask, const std::string &prompt,
                               std::size_t step) const {
  if (!mask.matches(image))
    throw std::invalid_argument("inpaint: mask and image dimensions differ");
  ImageBuffer out = fill(image, mask, prompt, step);
  if (!out.same_shape(image))
    throw BackendUnavailable(std::string(name()) + " inpainter returned an image of the wrong size");
  for (int y = 0; y < image.height(); ++y)
    for (int x = 0; x < image.width(); ++x)
      if (mask.at(x, y))
        out.set(x, y, image.pixel(x, y));
  return out;
}

OracleDirectoryInpainter::OracleDirectoryInpainter(fs::path dir) : dir_(std::move(dir)) {
  if (!fs::is_directory(dir_))
    throw IoError("oracle inpainter directory does not exist: " + dir_.string());
}

fs::path OracleDirectoryInpainter::frame_path(std::size_t step) const {
  return dir_ / ("gt_" + std::to_string(step) + ".png");
}

ImageBuffer OracleDirectoryInpainter::fill(const ImageBuffer &image, const MaskBuffer &, const std::string &,
                                           std::size_t step) const {
  const fs::path p = frame_path(step);
  if (!fs::exists(p))
    throw OracleMiss("oracle inpainter has no ground truth for step " + std::to_string(step) + ": " + p.string());
  ImageBuffer gt = load_png(p);
  if (!gt.same_shape(image))
    throw OracleMiss("oracle frame " + p.string() + " has the wrong size");
  return gt;
}

ImageBuffer FlatFillInpainter::fill(const ImageBuffer &image, const MaskBuffer &mask, const std::string &,
                                    std::size_t) const {
  Rgb sum = Rgb::Zero();
  std::size_t n = 0;
  for (int y = 0; y < image.height(); ++y)
    for (int x = 0; x < image.width(); ++x)
      if (mask.at(x, y)) {
        sum += image.pixel(x, y);
        ++n;
      }
  const Rgb value = n > 0 ? Rgb(sum / static_cast<double>(n)) : Rgb::Constant(0.5);
  return ImageBuffer(image.width(), image.height(), value.cwiseMax(0.0).cwiseMin(1.0));
}

ImageBuffer RemoteInpainter::fill(const ImageBuffer &image, const MaskBuffer &mask, const std::string &prompt,
                                  std::size_t) const {
  const json request = {
      {"image", png_b64(image)}, {"mask", base64_encode(encode_png_mask(mask))}, {"prompt", prompt}};
  const json response = parse_response(post_json(endpoint_, "/v1/inpaint", request), "inpaint");
  try {
    return decode_png_rgb(base64_decode(response.at("image").get<std::string>()));
  } catch (const json::exception &e) {
    throw BackendUnavailable("inpaint: response lacks an image", e.what());
  } catch (const ParseError &e) {
    throw BackendUnavailable("inpaint: response image is unreadable", e.what());
  }
}

FixedPrompter::FixedPrompter(std::string prompt) : prompt_(std::move(prompt)) {
  if (prompt_.empty())
    throw std::invalid_argument("fixed prompter needs a non-empty prompt");
}

std::string RemotePrompter::describe(const ImageBuffer &image) const {
  const json request = {{"image", png_b64(image)}, {"instruction", std::string(kDescribeInstruction)}};
  const json response = parse_response(post_json(endpoint_, "/v1/describe", request), "describe");
  try {
    return response.at("text").get<std::string>();
  } catch (const json::exception &e) {
    throw BackendUnavailable("describe: response lacks text", e.what());
  }
}

DirectoryDepthSource::DirectoryDepthSource(fs::path dir) : dir_(std::move(dir)) {
  if (!fs::is_directory(dir_))
    throw IoError("depth directory does not exist: " + dir_.string());
}

std::optional<DepthMap> DirectoryDepthSource::depth_for_step(std::size_t step) const {
  const fs::path p = dir_ / ("depth_" + std::to_string(step) + ".png");
  if (!fs::exists(p))
    return std::nullopt;
  return load_depth(p);
}

std::optional<DepthMap> InMemoryDepthSource::depth_for_step(std::size_t step) const {
  const auto it = depths_.find(step);
  if (it == depths_.end())
    return std::nullopt;
  return it->second;
}

std::unique_ptr<Reconstructor> make_reconstructor(const ReconstructorConfig &cfg, double rescale_factor) {
  switch (cfg.kind) {
  case ReconstructorConfig::Kind::RgbdLifter:
    return std::make_unique<RgbdLifterReconstructor>(cfg.lifter);
  case ReconstructorConfig::Kind::Remote:
    return std::make_unique<RemoteReconstructor>(cfg.remote, rescale_factor);
  }
  throw std::invalid_argument("unknown reconstructor kind");
}

std::unique_ptr<Inpainter> make_inpainter(const InpainterConfig &cfg) {
  switch (cfg.kind) {
  case InpainterConfig::Kind::OracleDirectory:
    return std::make_unique<OracleDirectoryInpainter>(cfg.oracle_dir);
  case InpainterConfig::Kind::FlatFill:
    return std::make_unique<FlatFillInpainter>();
  case InpainterConfig::Kind::Remote:
    return std::make_unique<RemoteInpainter>(cfg.remote);
  }
  throw std::invalid_argument("unknown inpainter kind");
}

std::unique_ptr<Prompter> make_prompter(const PrompterConfig &cfg) {
  switch (cfg.kind) {
  case PrompterConfig::Kind::Fixed:
    return std::make_unique<FixedPrompter>(cfg.prompt);
  case PrompterConfig::Kind::Remote:
    return std::make_unique<RemotePrompter>(cfg.remote);
  }
  throw std::invalid_argument("unknown prompter kind");
}

std::unique_ptr<DepthSource> make_depth_source(const DepthSourceConfig &cfg) {
  switch (cfg.kind) {
  case DepthSourceConfig::Kind::None:
    return std::make_unique<NoDepthSource>();
  case DepthSourceConfig::Kind::Directory:
    return std::make_unique<DirectoryDepthSource>(cfg.dir);
  }
  throw std::invalid_argument("unknown depth source kind");
}

} // namespace dreamsplat
