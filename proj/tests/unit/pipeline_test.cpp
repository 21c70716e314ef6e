#include <atomic>
#include <filesystem>

#include <gtest/gtest.h>

#include "dreamsplat/errors.hpp"
#include "dreamsplat/io.hpp"
#include "dreamsplat/pipeline.hpp"
#include "random_scenes.hpp"
#include "reference.hpp"
#include "synthetic_room.hpp"

using namespace dreamsplat;
namespace dt = dreamsplat::testing;
namespace fs = std::filesystem;

namespace {

/// Lifts every pixel onto a fronto-parallel plane at a fixed depth.
class PlaneReconstructor final : public Reconstructor {
public:
  explicit PlaneReconstructor(double depth) : depth_(depth) {}
  GaussianScene reconstruct(const ImageBuffer &image, const Camera &cam, const DepthMap *) const override {
    ++calls;
    return lift_rgbd(image, DepthMap(image.width(), image.height(), depth_), cam);
  }
  std::string_view name() const override { return "plane"; }
  mutable std::atomic<int> calls{0};

private:
  double depth_;
};

/// Flat fill until `fail_at`, then throws BackendUnavailable.
class FailingInpainter final : public Inpainter {
public:
  explicit FailingInpainter(std::size_t fail_at) : fail_at_(fail_at) {}
  std::string_view name() const override { return "failing"; }

protected:
  ImageBuffer fill(const ImageBuffer &image, const MaskBuffer &, const std::string &, std::size_t step) const override {
    if (step >= fail_at_)
      throw BackendUnavailable("service down", "HTTP 503");
    return ImageBuffer(image.width(), image.height(), Rgb(0.3, 0.6, 0.9));
  }

private:
  std::size_t fail_at_;
};

Backends plane_backends(std::unique_ptr<Inpainter> inpainter = std::make_unique<FlatFillInpainter>()) {
  Backends b;
  b.reconstructor = std::make_unique<PlaneReconstructor>(3.0);
  b.inpainter = std::move(inpainter);
  b.prompter = std::make_unique<FixedPrompter>("a room");
  return b;
}

PipelineConfig quick_config() {
  PipelineConfig cfg;
  cfg.optim.max_iters = 3;
  return cfg;
}

void expect_same_scene(const GaussianScene &a, const GaussianScene &b) {
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].mean, b[i].mean);
    EXPECT_EQ(a[i].scale, b[i].scale);
    EXPECT_EQ(a[i].rotation.coeffs(), b[i].rotation.coeffs());
    EXPECT_EQ(a[i].opacity, b[i].opacity);
    EXPECT_EQ(a[i].color, b[i].color);
  }
}

} // namespace

TEST(RetainUnobserved, AllOnesAndAllZeros) {
  dt::Rng rng(61);
  const Camera cam = dt::random_camera(rng, 24, 18);
  const GaussianScene s = dt::random_scene(rng, 80, cam);
  EXPECT_TRUE(retain_unobserved(s, MaskBuffer(24, 18, 1), cam).empty());
  const GaussianScene all = retain_unobserved(s, MaskBuffer(24, 18, 0), cam);
  const auto expected = dt::reference_retained_indices(s, MaskBuffer(24, 18, 0), cam);
  ASSERT_EQ(all.size(), expected.size());
  EXPECT_LT(all.size(), s.size()); // random scenes scatter some centers outside the frame
}

TEST(RetainUnobserved, MatchesIndependentFilterAndKeepsOrder) {
  dt::Rng rng(62);
  for (int trial = 0; trial < 30; ++trial) {
    const Camera cam = dt::random_camera(rng, 20 + trial, 16);
    const GaussianScene s = dt::random_scene(rng, 60, cam);
    const MaskBuffer m = dt::random_mask(rng, 20 + trial, 16);
    const GaussianScene kept = retain_unobserved(s, m, cam);
    const auto idx = dt::reference_retained_indices(s, m, cam);
    ASSERT_EQ(kept.size(), idx.size());
    for (std::size_t k = 0; k < idx.size(); ++k)
      EXPECT_EQ(kept[k].mean, s[idx[k]].mean);
  }
}

TEST(RetainUnobserved, DropsBehindCamera) {
  const Camera cam = dt::make_camera(8, 8);
  std::vector<Gaussian3D> gs(2);
  gs[0].mean = Vec3(0, 0, -1);
  gs[1].mean = Vec3(0, 0, 1);
  const GaussianScene kept = retain_unobserved(GaussianScene(gs), MaskBuffer(8, 8, 0), cam);
  ASSERT_EQ(kept.size(), 1u);
  EXPECT_EQ(kept[0].mean, Vec3(0, 0, 1));
}

TEST(RunStep, FullyCoveredViewRetainsNothing) {
  const Camera cam = dt::make_camera(16, 16);
  const Backends b = plane_backends();
  const GaussianScene prev = lift_rgbd(ImageBuffer(16, 16, Rgb(0.5, 0.5, 0.5)), DepthMap(16, 16, 2.0), cam);
  PipelineConfig cfg = quick_config();
  cfg.optimize_every_step = false;
  const StepOutcome out = run_step(prev, cam, 1, 0.0, "p", {}, cfg, b);
  EXPECT_EQ(out.record.mask.count_observed(), 256u);
  EXPECT_EQ(out.record.retained_count, 0u);
  expect_same_scene(out.scene, prev);
}

TEST(RunStep, EmptyPreviousRetainsWholeFrustum) {
  const Camera cam = dt::make_camera(12, 10);
  const Backends b = plane_backends();
  const StepOutcome out = run_step(GaussianScene{}, cam, 1, 0.0, "p", {}, quick_config(), b);
  EXPECT_EQ(out.record.mask.count_observed(), 0u);
  EXPECT_EQ(out.record.new_count, 120u);
  EXPECT_EQ(out.record.retained_count, 120u);
  EXPECT_EQ(out.scene.size(), 120u);
  for (std::size_t p : out.scene.provenance())
    EXPECT_EQ(p, 1u);
}

TEST(RunPipeline, EmptyScheduleReturnsReconstruction) {
  dt::Rng rng(63);
  const Camera cam = dt::make_camera(16, 12);
  const ImageBuffer img = dt::random_image(rng, 16, 12);
  const Backends b = plane_backends();
  PipelineConfig cfg = quick_config();
  cfg.angles_deg.clear();
  for (bool every : {true, false}) {
    cfg.optimize_every_step = every;
    const PipelineResult r = run_pipeline(img, nullptr, cam, cfg, b);
    expect_same_scene(r.scene, PlaneReconstructor(3.0).reconstruct(img, cam, nullptr));
    ASSERT_EQ(r.trace.steps.size(), 1u);
    EXPECT_EQ(r.trace.prompt, "a room");
    EXPECT_TRUE(r.trace.final_loss_trace.empty());
  }
}

TEST(RunPipeline, CountIdentityAndAudit) {
  const Camera cam = dt::make_camera(24, 18);
  const dt::RoomView room = dt::render_room(cam);
  const Backends b = plane_backends();
  const PipelineResult r = run_pipeline(room.image, nullptr, cam, quick_config(), b);
  ASSERT_EQ(r.trace.steps.size(), 7u);
  EXPECT_EQ(r.frames.size(), 7u);
  for (std::size_t i = 1; i < r.trace.steps.size(); ++i) {
    const StepRecord &s = r.trace.steps[i];
    EXPECT_EQ(s.scene_count, r.trace.steps[i - 1].scene_count + s.retained_count) << "step " << i;
    EXPECT_EQ(s.prev_count, r.trace.steps[i - 1].scene_count);
    EXPECT_LE(s.retained_count, s.new_count);
    EXPECT_GE(s.scene_count, s.prev_count);
    EXPECT_EQ(s.angle_deg, default_yaw_angles()[i - 1]);
    for (std::size_t k = 1; k < s.loss_trace.size(); ++k)
      EXPECT_LE(s.loss_trace[k], s.loss_trace[k - 1]);
  }
  EXPECT_EQ(r.scene.size(), r.trace.steps.back().scene_count);
  EXPECT_TRUE(validate_scene(r.scene).empty());

  // Every Gaussian added at step i lands on an unobserved pixel of that step's mask.
  // Positions are not optimized, so centers are where the reconstructor put them.
  const auto prov = r.scene.provenance();
  for (std::size_t g = 0; g < r.scene.size(); ++g) {
    if (prov[g] == 0)
      continue;
    const StepRecord &s = r.trace.steps[prov[g]];
    const Projection p = project_point(s.camera, r.scene[g].mean);
    const int px = static_cast<int>(std::floor(p.u + 0.5)), py = static_cast<int>(std::floor(p.v + 0.5));
    EXPECT_EQ(s.mask.at(px, py), 0) << "gaussian " << g;
  }
}

TEST(RunPipeline, DeterministicGivenDeterministicBackends) {
  const Camera cam = dt::make_camera(20, 16);
  const dt::RoomView room = dt::render_room(cam);
  PipelineConfig cfg = quick_config();
  cfg.angles_deg = {-10, 10};
  const PipelineResult a = run_pipeline(room.image, nullptr, cam, cfg, plane_backends());
  const PipelineResult b = run_pipeline(room.image, nullptr, cam, cfg, plane_backends());
  expect_same_scene(a.scene, b.scene);
  for (std::size_t i = 0; i < a.trace.steps.size(); ++i)
    EXPECT_EQ(a.trace.steps[i].loss_trace, b.trace.steps[i].loss_trace);
}

TEST(RunPipeline, FinalOnlyOptimization) {
  const Camera cam = dt::make_camera(16, 12);
  const dt::RoomView room = dt::render_room(cam);
  PipelineConfig cfg = quick_config();
  cfg.angles_deg = {15};
  cfg.optimize_every_step = false;
  const PipelineResult r = run_pipeline(room.image, nullptr, cam, cfg, plane_backends());
  EXPECT_TRUE(r.trace.steps[1].loss_trace.empty());
  EXPECT_FALSE(r.trace.final_loss_trace.empty());
}

TEST(RunPipeline, BackendFailurePreservesLastScene) {
  const Camera cam = dt::make_camera(16, 12);
  const dt::RoomView room = dt::render_room(cam);
  PipelineConfig cfg = quick_config();
  cfg.angles_deg = {-10, 10, -20};
  try {
    run_pipeline(room.image, nullptr, cam, cfg, plane_backends(std::make_unique<FailingInpainter>(2)));
    FAIL() << "expected PipelineError";
  } catch (const PipelineError &e) {
    EXPECT_TRUE(e.backend_failure);
    EXPECT_EQ(e.trace.steps.size(), 2u);
    EXPECT_EQ(e.last_scene.size(), e.trace.steps.back().scene_count);
    EXPECT_NE(std::string(e.what()).find("step 2"), std::string::npos);
    EXPECT_THROW(std::rethrow_exception(e.cause), BackendUnavailable);
  }
}

TEST(RunPipeline, RejectsInvalidConfig) {
  const Camera cam = dt::make_camera(8, 8);
  PipelineConfig cfg;
  cfg.rescale_factor = 0.0;
  EXPECT_THROW(run_pipeline(ImageBuffer(8, 8), nullptr, cam, cfg, plane_backends()), std::invalid_argument);
  cfg = PipelineConfig{};
  cfg.mask_tau = 2.0;
  EXPECT_THROW(run_pipeline(ImageBuffer(8, 8), nullptr, cam, cfg, plane_backends()), std::invalid_argument);
  EXPECT_THROW(run_pipeline(ImageBuffer(4, 8), nullptr, cam, PipelineConfig{}, plane_backends()),
               std::invalid_argument);
}

TEST(DumpTrace, WritesArtifacts) {
  const Camera cam = dt::make_camera(12, 10);
  PipelineConfig cfg = quick_config();
  cfg.angles_deg = {10};
  const PipelineResult r = run_pipeline(dt::render_room(cam).image, nullptr, cam, cfg, plane_backends());
  const fs::path dir = fs::temp_directory_path() / "dreamsplat_dump_trace";
  fs::remove_all(dir);
  dump_trace(r.trace, dir);
  for (const char *f : {"step_0_render.png", "step_0_mask.png", "step_1_inpainted.png", "loss_trace.csv",
                        "summary.json"})
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  EXPECT_EQ(load_mask_png(dir / "step_1_mask.png"), r.trace.steps[1].mask);
  fs::remove_all(dir);
}
