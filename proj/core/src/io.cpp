#include "dreamsplat/io.hpp"

#include <array>
#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "dreamsplat/codec.hpp"
#include "dreamsplat/errors.hpp"

namespace dreamsplat {

namespace fs = std::filesystem;
using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "PLY writer assumes a little-endian host");

DepthMap::DepthMap(int width, int height, double fill)
    : width_(width), height_(height), values_(static_cast<std::size_t>(width) * height, fill) {
  if (width < 0 || height < 0)
    throw std::invalid_argument("DepthMap: negative dimensions");
}

DepthMap::DepthMap(int width, int height, std::vector<double> values)
    : width_(width), height_(height), values_(std::move(values)) {
  if (width < 0 || height < 0 || values_.size() != static_cast<std::size_t>(width) * height)
    throw std::invalid_argument("DepthMap: value count must be width*height");
}

void write_file_atomic(const fs::path &path, std::span<const std::uint8_t> bytes) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out)
      throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(reinterpret_cast<const char *>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out)
      throw IoError("failed writing " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw IoError("cannot move " + tmp.string() + " to " + path.string());
  }
}

void write_text_atomic(const fs::path &path, const std::string &text) {
  write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t *>(text.data()), text.size()));
}

std::vector<std::uint8_t> read_file(const fs::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw IoError("cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

std::string read_text(const fs::path &path) {
  const auto bytes = read_file(path);
  return std::string(bytes.begin(), bytes.end());
}

// ---------------------------------------------------------------------------
// PLY

namespace {

constexpr std::array<const char *, 14> kPlyProperties = {
    "x",       "y",       "z",       "f_dc_0", "f_dc_1", "f_dc_2", "opacity",
    "scale_0", "scale_1", "scale_2", "rot_0",  "rot_1",  "rot_2",  "rot_3"};
constexpr std::size_t kPlyRecord = kPlyProperties.size() * sizeof(float);

double logit(double p) { return std::log(p / (1.0 - p)); }
double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

} // namespace

std::vector<std::uint8_t> encode_ply(const GaussianScene &scene) {
  std::ostringstream header;
  header << "ply\nformat binary_little_endian 1.0\nelement vertex " << scene.size() << "\n";
  for (const char *name : kPlyProperties)
    header << "property float " << name << "\n";
  header << "end_header\n";
  const std::string h = header.str();

  std::vector<std::uint8_t> out(h.begin(), h.end());
  out.reserve(h.size() + scene.size() * kPlyRecord);
  for (const Gaussian3D &g : scene.gaussians()) {
    // Keep the logit finite for opacity at the ends of [0, 1].
    const double op = std::clamp(g.opacity, 1e-7, 1.0 - 1e-7);
    const std::array<float, 14> rec = {
        static_cast<float>(g.mean.x()),
        static_cast<float>(g.mean.y()),
        static_cast<float>(g.mean.z()),
        static_cast<float>((g.color[0] - 0.5) / kShC0),
        static_cast<float>((g.color[1] - 0.5) / kShC0),
        static_cast<float>((g.color[2] - 0.5) / kShC0),
        static_cast<float>(logit(op)),
        static_cast<float>(std::log(g.scale.x())),
        static_cast<float>(std::log(g.scale.y())),
        static_cast<float>(std::log(g.scale.z())),
        static_cast<float>(g.rotation.w()),
        static_cast<float>(g.rotation.x()),
        static_cast<float>(g.rotation.y()),
        static_cast<float>(g.rotation.z()),
    };
    const auto *bytes = reinterpret_cast<const std::uint8_t *>(rec.data());
    out.insert(out.end(), bytes, bytes + kPlyRecord);
  }
  return out;
}

GaussianScene decode_ply(std::span<const std::uint8_t> bytes) {
  // Header is ASCII up to and including "end_header\n".
  static constexpr std::string_view kEnd = "end_header\n";
  const std::string_view text(reinterpret_cast<const char *>(bytes.data()), bytes.size());
  const std::size_t end = text.find(kEnd);
  if (end == std::string_view::npos)
    throw ParseError("ply: missing end_header");
  std::istringstream header(std::string(text.substr(0, end)));
  const std::size_t body_offset = end + kEnd.size();

  std::string line;
  if (!std::getline(header, line) || line != "ply")
    throw ParseError("ply: missing magic line");

  bool have_format = false;
  long long vertex_count = -1;
  std::size_t prop_index = 0;
  while (std::getline(header, line)) {
    if (!line.empty() && line.back() == '\r')
      line.pop_back();
    std::istringstream ls(line);
    std::string keyword;
    ls >> keyword;
    if (keyword.empty() || keyword == "comment" || keyword == "obj_info")
      continue;
    if (keyword == "format") {
      std::string fmt, version;
      ls >> fmt >> version;
      if (fmt != "binary_little_endian")
        throw ParseError("ply: unsupported format '" + fmt + "'");
      have_format = true;
    } else if (keyword == "element") {
      std::string name;
      ls >> name >> vertex_count;
      if (name != "vertex")
        throw ParseError("ply: unexpected element '" + name + "'");
      if (!ls || vertex_count < 0)
        throw ParseError("ply: bad vertex count");
    } else if (keyword == "property") {
      std::string type, name;
      ls >> type >> name;
      if (vertex_count < 0)
        throw ParseError("ply: property '" + name + "' before element vertex");
      if (prop_index >= kPlyProperties.size())
        throw ParseError("ply: unexpected property '" + name + "'");
      if (name != kPlyProperties[prop_index])
        throw ParseError("ply: expected property '" + std::string(kPlyProperties[prop_index]) + "', found '" +
                         name + "'");
      if (type != "float" && type != "float32")
        throw ParseError("ply: property '" + name + "' must be float, found '" + type + "'");
      ++prop_index;
    } else {
      throw ParseError("ply: unknown header keyword '" + keyword + "'");
    }
  }
  if (!have_format)
    throw ParseError("ply: missing format line");
  if (vertex_count < 0)
    throw ParseError("ply: missing vertex element");
  if (prop_index != kPlyProperties.size())
    throw ParseError("ply: missing property '" + std::string(kPlyProperties[prop_index]) + "'");

  const std::size_t need = static_cast<std::size_t>(vertex_count) * kPlyRecord;
  if (bytes.size() - body_offset < need)
    throw ParseError("ply: truncated vertex data");

  std::vector<Gaussian3D> gaussians(static_cast<std::size_t>(vertex_count));
  for (std::size_t i = 0; i < gaussians.size(); ++i) {
    std::array<float, 14> rec;
    std::memcpy(rec.data(), bytes.data() + body_offset + i * kPlyRecord, kPlyRecord);
    Gaussian3D &g = gaussians[i];
    g.mean = Vec3(rec[0], rec[1], rec[2]);
    // Snap float rounding at the ends of [0, 1]; real out-of-range colors are
    // kept so validation can report them.
    for (int c = 0; c < 3; ++c) {
      const double v = 0.5 + kShC0 * rec[3 + c];
      g.color[c] = (v < 0.0 && v > -1e-6) ? 0.0 : (v > 1.0 && v < 1.0 + 1e-6) ? 1.0 : v;
    }
    g.opacity = sigmoid(rec[6]);
    g.scale = Vec3(std::exp(rec[7]), std::exp(rec[8]), std::exp(rec[9]));
    g.rotation = Quat(rec[10], rec[11], rec[12], rec[13]);
    if (g.rotation.coeffs().norm() > 0.0)
      g.rotation.normalize();
  }
  return GaussianScene(std::move(gaussians));
}

void save_ply(const GaussianScene &scene, const fs::path &path) { write_file_atomic(path, encode_ply(scene)); }

GaussianScene load_ply(const fs::path &path) { return decode_ply(read_file(path)); }

// ---------------------------------------------------------------------------
// PNG and depth

void save_png(const ImageBuffer &img, const fs::path &path) { write_file_atomic(path, encode_png_rgb(img)); }
ImageBuffer load_png(const fs::path &path) { return decode_png_rgb(read_file(path)); }
void save_mask_png(const MaskBuffer &mask, const fs::path &path) { write_file_atomic(path, encode_png_mask(mask)); }
MaskBuffer load_mask_png(const fs::path &path) { return decode_png_mask(read_file(path)); }

fs::path depth_metadata_path(const fs::path &png_path) {
  fs::path p = png_path;
  p.replace_extension(".json");
  return p;
}

void save_depth(const DepthMap &depth, const fs::path &path, double scale) {
  if (scale <= 0.0) {
    scale = 0.0;
    for (int y = 0; y < depth.height(); ++y)
      for (int x = 0; x < depth.width(); ++x)
        if (depth.valid(x, y))
          scale = std::max(scale, depth.at(x, y));
    if (scale == 0.0)
      scale = 1.0;
  }
  PngPixels px{depth.width(), depth.height(), 1, 16, {}};
  px.samples.resize(static_cast<std::size_t>(depth.width()) * depth.height());
  for (int y = 0; y < depth.height(); ++y) {
    for (int x = 0; x < depth.width(); ++x) {
      std::uint16_t v = 0;
      if (depth.valid(x, y)) {
        const double q = std::clamp(depth.at(x, y) / scale * 65535.0, 1.0, 65535.0);
        v = static_cast<std::uint16_t>(std::lround(q));
      }
      px.samples[static_cast<std::size_t>(y) * depth.width() + x] = v;
    }
  }
  json meta = {{"scale", scale}, {"units", "world"}, {"invalid_value", 0}};
  write_file_atomic(path, encode_png(px));
  write_text_atomic(depth_metadata_path(path), meta.dump(2) + "\n");
}

DepthMap load_depth(const fs::path &path) {
  const PngPixels px = decode_png(read_file(path));
  if (px.bit_depth != 16 || px.channels != 1)
    throw ParseError("depth: expected a 16-bit grayscale PNG: " + path.string());
  double scale = 0.0;
  try {
    const json meta = json::parse(read_text(depth_metadata_path(path)));
    scale = meta.at("scale").get<double>();
  } catch (const json::exception &e) {
    throw ParseError("depth: bad metadata for " + path.string() + ": " + e.what());
  }
  if (!(scale > 0.0) || !std::isfinite(scale))
    throw ParseError("depth: metadata scale must be positive");
  std::vector<double> values(px.samples.size());
  for (std::size_t i = 0; i < values.size(); ++i)
    values[i] = px.samples[i] == 0 ? 0.0 : px.samples[i] / 65535.0 * scale;
  return DepthMap(px.width, px.height, std::move(values));
}

// ---------------------------------------------------------------------------
// Camera JSON

namespace {

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

} // namespace

std::string camera_to_json(const Camera &cam) {
  const Intrinsics &k = cam.intrinsics;
  const Quat &q = cam.pose.rotation;
  const Vec3 &t = cam.pose.translation;
  std::ostringstream os;
  os << "{\n"
     << "  \"fx\": " << num(k.fx) << ",\n"
     << "  \"fy\": " << num(k.fy) << ",\n"
     << "  \"cx\": " << num(k.cx) << ",\n"
     << "  \"cy\": " << num(k.cy) << ",\n"
     << "  \"width\": " << k.width << ",\n"
     << "  \"height\": " << k.height << ",\n"
     << "  \"rotation\": [" << num(q.w()) << ", " << num(q.x()) << ", " << num(q.y()) << ", " << num(q.z())
     << "],\n"
     << "  \"translation\": [" << num(t.x()) << ", " << num(t.y()) << ", " << num(t.z()) << "]\n"
     << "}\n";
  return os.str();
}

Camera camera_from_json(const std::string &text) {
  static const std::array<std::string, 8> kKeys = {"fx", "fy", "cx", "cy", "width", "height", "rotation", "translation"};
  Camera cam;
  try {
    const json j = json::parse(text);
    if (!j.is_object())
      throw ParseError("camera: expected a JSON object");
    for (const auto &[key, _] : j.items())
      if (std::find(kKeys.begin(), kKeys.end(), key) == kKeys.end())
        throw ParseError("camera: unknown key '" + key + "'");
    cam.intrinsics.fx = j.at("fx").get<double>();
    cam.intrinsics.fy = j.at("fy").get<double>();
    cam.intrinsics.cx = j.at("cx").get<double>();
    cam.intrinsics.cy = j.at("cy").get<double>();
    cam.intrinsics.width = j.at("width").get<int>();
    cam.intrinsics.height = j.at("height").get<int>();
    const auto r = j.at("rotation").get<std::vector<double>>();
    const auto t = j.at("translation").get<std::vector<double>>();
    if (r.size() != 4 || t.size() != 3)
      throw ParseError("camera: rotation needs 4 and translation 3 components");
    cam.pose.rotation = Quat(r[0], r[1], r[2], r[3]);
    cam.pose.translation = Vec3(t[0], t[1], t[2]);
  } catch (const json::exception &e) {
    throw ParseError(std::string("camera: ") + e.what());
  }
  try {
    cam.validate();
  } catch (const std::invalid_argument &e) {
    throw ParseError(std::string("camera: ") + e.what());
  }
  return cam;
}

void save_camera(const Camera &cam, const fs::path &path) { write_text_atomic(path, camera_to_json(cam)); }

Camera load_camera(const fs::path &path) { return camera_from_json(read_text(path)); }

} // namespace dreamsplat
