#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include "dreamsplat/geometry.hpp"
#include "dreamsplat/io.hpp"
#include "dreamsplat/scene.hpp"

namespace dreamsplat {

/// Instruction sent to remote captioning services.
inline constexpr std::string_view kDescribeInstruction = "Please briefly describe the scene";

struct LifterSettings {
  double opacity_init = 0.95;
  /// Isotropic scale = pixel_scale_factor * depth / fx, about one pixel footprint.
  double pixel_scale_factor = 0.7;
};

/// Base URL such as "http://127.0.0.1:8080".
struct RemoteEndpoint {
  std::string url;
  double timeout_s = 120.0;
};

/// One Gaussian per valid-depth pixel, unprojected from the pixel center and
/// placed in world coordinates through the camera pose.
GaussianScene lift_rgbd(const ImageBuffer &image, const DepthMap &depth, const Camera &cam,
                        const LifterSettings &settings = {});

// -- monocular reconstruction -------------------------------------------------

class Reconstructor {
public:
  virtual ~Reconstructor() = default;
  /// Returns the scene in world coordinates. `depth` may be null for backends
  /// that do not need it.
  virtual GaussianScene reconstruct(const ImageBuffer &image, const Camera &cam, const DepthMap *depth) const = 0;
  virtual std::string_view name() const = 0;
};

class RgbdLifterReconstructor final : public Reconstructor {
public:
  explicit RgbdLifterReconstructor(LifterSettings settings = {}) : settings_(settings) {}
  /// Throws std::invalid_argument when `depth` is null.
  GaussianScene reconstruct(const ImageBuffer &image, const Camera &cam, const DepthMap *depth) const override;
  std::string_view name() const override { return "rgbd-lifter"; }

private:
  LifterSettings settings_;
};

/// POST /v1/reconstruct {"image": base64 PNG} -> binary PLY in the camera
/// frame, which is rescaled and moved to world coordinates before returning.
class RemoteReconstructor final : public Reconstructor {
public:
  RemoteReconstructor(RemoteEndpoint endpoint, double rescale_factor = 1.0);
  GaussianScene reconstruct(const ImageBuffer &image, const Camera &cam, const DepthMap *depth) const override;
  std::string_view name() const override { return "remote"; }

private:
  RemoteEndpoint endpoint_;
  double rescale_factor_;
};

// -- inpainting ---------------------------------------------------------------

class Inpainter {
public:
  virtual ~Inpainter() = default;

  /// Fills M = 0 pixels. M = 1 pixels of the result are bit-identical to
  /// `image` regardless of what the backend produced.
  ImageBuffer inpaint(const ImageBuffer &image, const MaskBuffer &mask, const std::string &prompt,
                      std::size_t step) const;
  virtual std::string_view name() const = 0;

protected:
  virtual ImageBuffer fill(const ImageBuffer &image, const MaskBuffer &mask, const std::string &prompt,
                           std::size_t step) const = 0;
};

/// Copies unobserved pixels from gt_{step}.png in a directory of ground-truth views.
class OracleDirectoryInpainter final : public Inpainter {
public:
  /// Throws IoError if the directory does not exist.
  explicit OracleDirectoryInpainter(std::filesystem::path dir);
  std::string_view name() const override { return "oracle-directory"; }
  std::filesystem::path frame_path(std::size_t step) const;

protected:
  ImageBuffer fill(const ImageBuffer &image, const MaskBuffer &mask, const std::string &prompt,
                   std::size_t step) const override;

private:
  std::filesystem::path dir_;
};

/// Fills with the mean observed color, or mid-gray when nothing is observed.
class FlatFillInpainter final : public Inpainter {
public:
  std::string_view name() const override { return "flat-fill"; }

protected:
  ImageBuffer fill(const ImageBuffer &image, const MaskBuffer &mask, const std::string &prompt,
                   std::size_t step) const override;
};

/// POST /v1/inpaint {"image", "mask" (8-bit gray, 255 = observed), "prompt"} -> {"image"}.
class RemoteInpainter final : public Inpainter {
public:
  explicit RemoteInpainter(RemoteEndpoint endpoint) : endpoint_(std::move(endpoint)) {}
  std::string_view name() const override { return "remote"; }

protected:
  ImageBuffer fill(const ImageBuffer &image, const MaskBuffer &mask, const std::string &prompt,
                   std::size_t step) const override;

private:
  RemoteEndpoint endpoint_;
};

// -- scene description --------------------------------------------------------

class Prompter {
public:
  virtual ~Prompter() = default;
  virtual std::string describe(const ImageBuffer &image) const = 0;
  virtual std::string_view name() const = 0;
};

class FixedPrompter final : public Prompter {
public:
  /// Throws std::invalid_argument for an empty prompt.
  explicit FixedPrompter(std::string prompt);
  std::string describe(const ImageBuffer &) const override { return prompt_; }
  std::string_view name() const override { return "fixed"; }

private:
  std::string prompt_;
};

/// POST /v1/describe {"image", "instruction"} -> {"text"}.
class RemotePrompter final : public Prompter {
public:
  explicit RemotePrompter(RemoteEndpoint endpoint) : endpoint_(std::move(endpoint)) {}
  std::string describe(const ImageBuffer &image) const override;
  std::string_view name() const override { return "remote"; }

private:
  RemoteEndpoint endpoint_;
};

// -- per-step depth for the lifter --------------------------------------------

class DepthSource {
public:
  virtual ~DepthSource() = default;
  virtual std::optional<DepthMap> depth_for_step(std::size_t step) const = 0;
};

class NoDepthSource final : public DepthSource {
public:
  std::optional<DepthMap> depth_for_step(std::size_t) const override { return std::nullopt; }
};

/// Reads depth_{step}.png (plus its JSON sidecar) from a directory.
class DirectoryDepthSource final : public DepthSource {
public:
  explicit DirectoryDepthSource(std::filesystem::path dir);
  std::optional<DepthMap> depth_for_step(std::size_t step) const override;

private:
  std::filesystem::path dir_;
};

class InMemoryDepthSource final : public DepthSource {
public:
  explicit InMemoryDepthSource(std::map<std::size_t, DepthMap> depths) : depths_(std::move(depths)) {}
  std::optional<DepthMap> depth_for_step(std::size_t step) const override;

private:
  std::map<std::size_t, DepthMap> depths_;
};

// -- configuration ------------------------------------------------------------

struct ReconstructorConfig {
  enum class Kind { RgbdLifter, Remote };
  Kind kind = Kind::RgbdLifter;
  LifterSettings lifter;
  RemoteEndpoint remote;
};

struct InpainterConfig {
  enum class Kind { OracleDirectory, FlatFill, Remote };
  Kind kind = Kind::FlatFill;
  std::filesystem::path oracle_dir;
  RemoteEndpoint remote;
};

struct PrompterConfig {
  enum class Kind { Fixed, Remote };
  Kind kind = Kind::Fixed;
  std::string prompt = "An indoor scene";
  RemoteEndpoint remote;
};

struct DepthSourceConfig {
  enum class Kind { None, Directory };
  Kind kind = Kind::None;
  std::filesystem::path dir;
};

std::unique_ptr<Reconstructor> make_reconstructor(const ReconstructorConfig &cfg, double rescale_factor = 1.0);
std::unique_ptr<Inpainter> make_inpainter(const InpainterConfig &cfg);
std::unique_ptr<Prompter> make_prompter(const PrompterConfig &cfg);
std::unique_ptr<DepthSource> make_depth_source(const DepthSourceConfig &cfg);

} // namespace dreamsplat
