#include <cmath>
#include <filesystem>

#include <gtest/gtest.h>
#include <json.hpp>

#include "dreamsplat/config.hpp"
#include "dreamsplat/errors.hpp"
#include "dreamsplat/eval.hpp"
#include "dreamsplat/io.hpp"
#include "random_scenes.hpp"

using namespace dreamsplat;
namespace dt = dreamsplat::testing;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class ConfigDir : public ::testing::Test {
protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           (std::string("dreamsplat_config_") + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_ / "gt");
    const Camera cam = dt::make_camera(8, 6);
    save_png(ImageBuffer(8, 6), dir_ / "in.png");
    save_camera(cam, dir_ / "cam.json");
  }
  void TearDown() override { fs::remove_all(dir_); }

  json minimal() const { return {{"image", "in.png"}, {"camera", "cam.json"}, {"output_dir", "out"}}; }

  fs::path dir_;
};

} // namespace

TEST_F(ConfigDir, MinimalUsesDefaults) {
  const RunConfig rc = parse_run_config(minimal().dump(), dir_);
  EXPECT_EQ(rc.image, dir_ / "in.png");
  EXPECT_EQ(rc.output_dir, dir_ / "out");
  EXPECT_FALSE(rc.depth.has_value());
  EXPECT_EQ(rc.pipeline.angles_deg, default_yaw_angles());
  EXPECT_EQ(rc.pipeline.mask_tau, 0.5);
  EXPECT_EQ(rc.pipeline.optim.max_iters, 100);
  EXPECT_EQ(rc.pipeline.optim.step_size, 0.05);
  EXPECT_EQ(rc.pipeline.optim.convergence_tol, 1e-5);
  EXPECT_TRUE(rc.pipeline.optimize_every_step);
}

TEST_F(ConfigDir, FullConfigParses) {
  json j = minimal();
  j["angles_deg"] = {5, -5};
  j["mask_tau"] = 0.25;
  j["background"] = {1, 1, 1};
  j["optim"] = {{"max_iters", 7}, {"optimize_position", true}};
  j["inpainter"] = {{"kind", "oracle-directory"}, {"path", "gt"}};
  j["prompter"] = {{"kind", "remote"}, {"url", "http://127.0.0.1:9"}, {"timeout_s", 3}};
  j["reconstructor"] = {{"kind", "rgbd-lifter"}, {"opacity_init", 0.5}};
  const RunConfig rc = parse_run_config(j.dump(), dir_);
  EXPECT_EQ(rc.pipeline.angles_deg, (std::vector<double>{5, -5}));
  EXPECT_EQ(rc.pipeline.background, Rgb::Ones());
  EXPECT_EQ(rc.pipeline.optim.max_iters, 7);
  EXPECT_TRUE(rc.pipeline.optim.flags.position);
  EXPECT_EQ(rc.pipeline.inpainter.kind, InpainterConfig::Kind::OracleDirectory);
  EXPECT_EQ(rc.pipeline.inpainter.oracle_dir, dir_ / "gt");
  EXPECT_EQ(rc.pipeline.prompter.kind, PrompterConfig::Kind::Remote);
  EXPECT_EQ(rc.pipeline.prompter.remote.timeout_s, 3.0);
  EXPECT_EQ(rc.pipeline.reconstructor.lifter.opacity_init, 0.5);
}

TEST_F(ConfigDir, RejectsUnknownKeysAtEveryLevel) {
  json top = minimal();
  top["angels_deg"] = {1};
  EXPECT_THROW(parse_run_config(top.dump(), dir_), ParseError);
  json nested = minimal();
  nested["optim"] = {{"max_iter", 3}};
  EXPECT_THROW(parse_run_config(nested.dump(), dir_), ParseError);
  json backend = minimal();
  backend["inpainter"] = {{"kind", "flat-fill"}, {"color", 1}};
  EXPECT_THROW(parse_run_config(backend.dump(), dir_), ParseError);
}

TEST_F(ConfigDir, RejectsBadValuesAndMissingFiles) {
  json j = minimal();
  j["mask_tau"] = 1.5;
  EXPECT_THROW(parse_run_config(j.dump(), dir_), ParseError);
  j = minimal();
  j["inpainter"] = {{"kind", "magic"}};
  EXPECT_THROW(parse_run_config(j.dump(), dir_), ParseError);
  j = minimal();
  j.erase("camera");
  EXPECT_THROW(parse_run_config(j.dump(), dir_), ParseError);
  j = minimal();
  j["image"] = "missing.png";
  EXPECT_THROW(parse_run_config(j.dump(), dir_), IoError);
  EXPECT_THROW(parse_run_config("{not json", dir_), ParseError);
  EXPECT_THROW(load_run_config(dir_ / "nope.json"), IoError);
}

TEST(Eval, UniformErrorGivesTwentyDecibels) {
  // MSE = 0.01 -> 10 log10(100) = 20 dB.
  const ImageBuffer a(6, 5, Rgb(0.5, 0.5, 0.5)), b(6, 5, Rgb(0.6, 0.4, 0.6));
  EXPECT_NEAR(mse(a, b), 0.01, 1e-15);
  EXPECT_NEAR(psnr(a, b), 20.0, 1e-9);
  EXPECT_TRUE(std::isinf(psnr(a, a)));
}

TEST(Eval, MaskRestrictsPixels) {
  ImageBuffer a(2, 1, Rgb::Zero()), b(2, 1, Rgb::Zero());
  b.set(1, 0, Rgb::Ones());
  const MaskBuffer first(2, 1, std::vector<std::uint8_t>{1, 0});
  EXPECT_EQ(mse(a, b, &first), 0.0);
  EXPECT_DOUBLE_EQ(mse(a, b), 0.5);
  EXPECT_THROW(mse(a, ImageBuffer(1, 1)), std::invalid_argument);
}

TEST(Eval, ViewsReportAndJson) {
  const Camera cam = dt::make_camera(8, 8);
  std::vector<FrameTarget> targets{{cam, ImageBuffer(8, 8, Rgb::Zero())}, {cam, ImageBuffer(8, 8, Rgb(0.1, 0.1, 0.1))}};
  const EvalReport r = eval_views(GaussianScene{}, targets, Rgb::Zero(), {"a", "b"});
  ASSERT_EQ(r.views.size(), 2u);
  EXPECT_TRUE(r.views[0].psnr_infinite);
  EXPECT_NEAR(r.views[1].psnr, 20.0, 1e-9);
  EXPECT_NEAR(r.views[1].l1, 0.1, 1e-15);
  EXPECT_NEAR(r.mean_l1, 0.05, 1e-15);
  const json j = json::parse(r.to_json());
  EXPECT_EQ(j.at("views").size(), 2u);
  EXPECT_TRUE(j.at("views").at(0).at("psnr_db").is_null());
  EXPECT_EQ(j.at("views").at(1).at("name"), "b");
}
