#include <filesystem>
#include <sstream>

#include <gtest/gtest.h>
#include <json.hpp>

#include "cli.hpp"
#include "dreamsplat/backends.hpp"
#include "dreamsplat/io.hpp"
#include "dreamsplat/rasterizer.hpp"
#include "random_scenes.hpp"
#include "stub_server.hpp"
#include "synthetic_room.hpp"

using namespace dreamsplat;
namespace dt = dreamsplat::testing;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class CliTest : public ::testing::Test {
protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           (std::string("dreamsplat_cli_") + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    cam_ = dt::make_camera(16, 12);
    dt::Rng rng(71);
    scene_ = dt::random_scene(rng, 30, cam_);
    save_ply(scene_, dir_ / "scene.ply");
    save_camera(cam_, dir_ / "cam.json");
  }
  void TearDown() override { fs::remove_all(dir_); }

  int run(std::vector<std::string> args) {
    args.insert(args.begin(), "dreamsplat");
    out_.str("");
    err_.str("");
    return cli::run(args, out_, err_);
  }

  std::string p(const std::string &name) const { return (dir_ / name).string(); }

  fs::path dir_;
  Camera cam_;
  GaussianScene scene_;
  std::ostringstream out_, err_;
};

} // namespace

TEST_F(CliTest, RenderWritesImage) {
  ASSERT_EQ(run({"render", "--ply", p("scene.ply"), "--camera", p("cam.json"), "--out", p("r.png")}), 0) << err_.str();
  const ImageBuffer img = load_png(dir_ / "r.png");
  const ImageBuffer expected = render(load_ply(dir_ / "scene.ply"), cam_).color;
  ASSERT_TRUE(img.same_shape(expected));
  for (std::size_t i = 0; i < img.data().size(); ++i)
    EXPECT_NEAR(img.data()[i], expected.data()[i], 0.5 / 255.0 + 1e-12);
}

TEST_F(CliTest, EmptySceneRendersBackground) {
  save_ply(GaussianScene{}, dir_ / "empty.ply");
  ASSERT_EQ(run({"render", "--ply", p("empty.ply"), "--camera", p("cam.json"), "--out", p("bg.png"), "--background",
                 "0", "1", "0"}),
            0)
      << err_.str();
  EXPECT_EQ(load_png(dir_ / "bg.png"), ImageBuffer(16, 12, Rgb(0, 1, 0)));
}

TEST_F(CliTest, MaskWritesCoverage) {
  ASSERT_EQ(run({"mask", "--ply", p("scene.ply"), "--camera", p("cam.json"), "--tau", "0.5", "--out", p("m.png")}),
            0);
  EXPECT_EQ(load_mask_png(dir_ / "m.png"), coverage_mask(load_ply(dir_ / "scene.ply"), cam_, 0.5));
}

TEST_F(CliTest, EvalWritesReport) {
  fs::create_directories(dir_ / "targets");
  save_png(render(load_ply(dir_ / "scene.ply"), cam_).color, dir_ / "targets" / "front.png");
  save_camera(cam_, dir_ / "targets" / "front.json");
  ASSERT_EQ(run({"eval", "--ply", p("scene.ply"), "--targets", p("targets"), "--out", p("eval.json")}), 0)
      << err_.str();
  const json j = json::parse(read_text(dir_ / "eval.json"));
  EXPECT_EQ(j.at("views").at(0).at("name"), "front");
  EXPECT_LT(j.at("mean_l1").get<double>(), 0.01);
}

TEST_F(CliTest, EvalOfExactMatchIsZero) {
  fs::create_directories(dir_ / "targets");
  save_ply(GaussianScene{}, dir_ / "empty.ply");
  save_png(ImageBuffer(16, 12), dir_ / "targets" / "a.png");
  save_camera(cam_, dir_ / "targets" / "a.json");
  ASSERT_EQ(run({"eval", "--ply", p("empty.ply"), "--targets", p("targets"), "--out", p("eval.json")}), 0);
  const json j = json::parse(read_text(dir_ / "eval.json"));
  EXPECT_EQ(j.at("mean_l1").get<double>(), 0.0);
  EXPECT_TRUE(j.at("views").at(0).at("psnr_infinite").get<bool>());
}

TEST_F(CliTest, ValidateReportsViolations) {
  EXPECT_EQ(run({"validate", "--ply", p("scene.ply")}), 0);
  std::vector<Gaussian3D> bad(scene_.gaussians().begin(), scene_.gaussians().end());
  bad[3].color.x() = 3.0;
  save_ply(GaussianScene(bad), dir_ / "bad.ply");
  EXPECT_EQ(run({"validate", "--ply", p("bad.ply")}), 3);
  EXPECT_NE(err_.str().find("gaussian 3"), std::string::npos) << err_.str();
}

TEST_F(CliTest, UsageErrorsExitOne) {
  EXPECT_EQ(run({}), 1);
  EXPECT_EQ(run({"frobnicate"}), 1);
  EXPECT_EQ(run({"render", "--ply", p("scene.ply")}), 1);
  EXPECT_EQ(run({"mask", "--ply", p("scene.ply"), "--camera", p("cam.json"), "--tau", "2", "--out", p("m.png")}), 1);
}

TEST_F(CliTest, MissingOrCorruptFilesExitThree) {
  EXPECT_EQ(run({"validate", "--ply", p("nope.ply")}), 3);
  write_text_atomic(dir_ / "junk.ply", "ply\nformat ascii 1.0\nend_header\n");
  EXPECT_EQ(run({"validate", "--ply", p("junk.ply")}), 3);
  EXPECT_EQ(run({"reconstruct", "--config", p("missing.json")}), 3);
}

TEST_F(CliTest, ReconstructWritesSceneAndTrace) {
  const dt::RoomView room = dt::render_room(cam_);
  save_png(room.image, dir_ / "in.png");
  save_depth(room.depth, dir_ / "depth.png");
  const json cfg = {{"image", "in.png"},       {"depth", "depth.png"},
                    {"camera", "cam.json"},     {"output_dir", "run"},
                    {"angles_deg", json::array()}};
  write_text_atomic(dir_ / "run.json", cfg.dump());
  ASSERT_EQ(run({"reconstruct", "--config", p("run.json")}), 0) << err_.str();
  const GaussianScene written = load_ply(dir_ / "run" / "scene.ply");
  const GaussianScene lifted =
      decode_ply(encode_ply(lift_rgbd(load_png(dir_ / "in.png"), load_depth(dir_ / "depth.png"), cam_)));
  ASSERT_EQ(written.size(), 16u * 12u);
  ASSERT_EQ(written.size(), lifted.size());
  for (std::size_t i = 0; i < written.size(); ++i) {
    EXPECT_EQ(written[i].mean, lifted[i].mean);
    EXPECT_EQ(written[i].color, lifted[i].color);
  }
  EXPECT_TRUE(fs::exists(dir_ / "run" / "trace" / "summary.json"));
}

TEST_F(CliTest, UnreachableBackendExitsTwoAndKeepsPartialScene) {
  const dt::RoomView room = dt::render_room(cam_);
  save_png(room.image, dir_ / "in.png");
  save_depth(room.depth, dir_ / "depth.png");
  const std::string url = "http://127.0.0.1:" + std::to_string(dt::unused_port());
  const json cfg = {{"image", "in.png"},   {"depth", "depth.png"}, {"camera", "cam.json"},
                    {"output_dir", "run"}, {"angles_deg", {10}},   {"inpainter", {{"kind", "remote"}, {"url", url}}}};
  write_text_atomic(dir_ / "run.json", cfg.dump());
  EXPECT_EQ(run({"reconstruct", "--config", p("run.json")}), 2);
  EXPECT_EQ(load_ply(dir_ / "run" / "partial.ply").size(), 16u * 12u);
}
