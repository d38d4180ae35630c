#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdio>
#include <fstream>
#include <json.hpp>

#include "dpsynth/image_io.hpp"
#include "dpsynth/lensfx.hpp"
#include "test_support.hpp"

using namespace dpsynth;
using dpsynth::testing::TempDir;
namespace fs = std::filesystem;

namespace {

struct RunResult {
  int code = -1;
  std::string out;
};

// Runs the CLI with stderr discarded and returns its exit code and stdout.
RunResult run(const std::string& args) {
  const std::string cmd = std::string("\"") + DPSYNTH_CLI_PATH + "\" " + args + " 2>/dev/null";
  RunResult r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

void write_scene(const TempDir& dir, int frames) {
  nlohmann::json inputs = nlohmann::json::array();
  for (int i = 0; i < frames; ++i) {
    const std::string name = "f" + std::to_string(i);
    save_image(dpsynth::testing::random_image(40, 30, 3, 7 + i), dir / (name + ".png"), 8);
    Image depth(40, 30, 1);
    for (int y = 0; y < 30; ++y)
      for (int x = 0; x < 40; ++x) depth.at(x, y) = (y < 15 ? 300.0 : 2000.0) / 65535.0;
    save_image(depth, dir / (name + "_d.png"), 16);
    inputs.push_back({{"image", name + ".png"}, {"depth", name + "_d.png"}, {"sequence", "s"}, {"frame", i}});
  }
  std::ofstream(dir / "cfg.json") << nlohmann::json{{"preset", "paper-synthia"}, {"inputs", inputs}, {"output_dir", "out"}}.dump();
}

}  // namespace

TEST(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(run("").code, 2);
  EXPECT_EQ(run("bogus").code, 2);
  EXPECT_EQ(run("generate").code, 2);
  EXPECT_EQ(run("generate --config x.json --bit-depth 12").code, 2);
  EXPECT_EQ(run("--help").code, 0);
}

TEST(Cli, ConfigErrorsExitTwo) {
  TempDir dir("cli_cfg");
  std::ofstream(dir / "bad.json") << R"({"preset": "paper-synthia", "unknown": 1})";
  EXPECT_EQ(run("generate --config " + q(dir / "bad.json")).code, 2);
  EXPECT_EQ(run("generate --config " + q(dir / "missing.json")).code, 2);
  EXPECT_EQ(run("psf export --radius 5 --alpha -1 --out " + q(dir / "k")).code, 2);
}

TEST(Cli, GenerateWritesQuintets) {
  TempDir dir("cli_gen");
  write_scene(dir, 1);
  const auto r = run("generate --config " + q(dir / "cfg.json") + " --jobs 2 --bit-depth 8");
  ASSERT_EQ(r.code, 0) << r.out;
  for (const char* suffix : {"_l.png", "_r.png", "_b.png", "_s.png", "_rd.png", ".json"})
    EXPECT_TRUE(fs::exists(dir / "out" / "s" / (std::string("000000_cam3") + suffix))) << suffix;
  EXPECT_EQ(load_image(dir / "out" / "s" / "000000_cam3_l.png").width(), 40);
}

TEST(Cli, GeneratePartialFailureExitsOne) {
  TempDir dir("cli_part");
  write_scene(dir, 2);
  std::ofstream(dir / "f1.png", std::ios::trunc) << "not a png";
  const auto r = run("generate --config " + q(dir / "cfg.json"));
  EXPECT_EQ(r.code, 1);
  EXPECT_TRUE(fs::exists(dir / "out" / "s" / "000000_cam0_b.png"));
  const auto manifest = nlohmann::json::parse(dpsynth::testing::read_file(dir / "out" / "manifest.json"));
  EXPECT_EQ(manifest["outputs"].size(), 5u);
  EXPECT_EQ(manifest["failures"].size(), 5u);
}

TEST(Cli, SeedOverrideChangesOutput) {
  TempDir dir("cli_seed");
  write_scene(dir, 1);
  ASSERT_EQ(run("generate --config " + q(dir / "cfg.json") + " --out " + q(dir / "a") + " --seed 1").code, 0);
  ASSERT_EQ(run("generate --config " + q(dir / "cfg.json") + " --out " + q(dir / "b") + " --seed 1").code, 0);
  ASSERT_EQ(run("generate --config " + q(dir / "cfg.json") + " --out " + q(dir / "c") + " --seed 2").code, 0);
  const auto read = [&](const char* sub) { return dpsynth::testing::read_file(dir / sub / "s" / "000000_cam0_l.png"); };
  EXPECT_EQ(read("a"), read("b"));
  EXPECT_NE(read("a"), read("c"));
}

TEST(Cli, EvaluateCsvAndUnmatched) {
  TempDir dir("cli_eval");
  fs::create_directories(dir / "p");
  fs::create_directories(dir / "g");
  const Image img = dpsynth::testing::random_image(16, 16, 1, 3);
  save_image(img, dir / "p" / "a_b.png", 16);
  save_image(img, dir / "g" / "a_s.png", 16);
  auto r = run("evaluate --pred " + q(dir / "p") + " --gt " + q(dir / "g") + " --pred-suffix _b --gt-suffix _s");
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out.substr(0, r.out.find('\n')), "id,psnr,ssim,mae,edge_total,edge_mse,edge_x,edge_y");
  EXPECT_NE(r.out.find("\na,100,1,0,0,0,0,0\n"), std::string::npos) << r.out;
  save_image(img, dir / "g" / "z_s.png", 16);
  r = run("evaluate --pred " + q(dir / "p") + " --gt " + q(dir / "g") + " --pred-suffix _b --gt-suffix _s --out " +
          q(dir / "m.csv"));
  EXPECT_EQ(r.code, 1);
  EXPECT_TRUE(fs::exists(dir / "m.csv"));
}

TEST(Cli, PsfExportAndGallery) {
  TempDir dir("cli_psf");
  ASSERT_EQ(run("psf export --radius -7.5 --order 6 --alpha 0.6 --beta 0.2 --out " + q(dir / "k")).code, 0);
  const Image left = read_pfm(dir / "k" / "left.pfm");
  const Image right = read_pfm(dir / "k" / "right.pfm");
  ASSERT_EQ(left.width(), right.width());
  for (int y = 0; y < left.height(); ++y)
    for (int x = 0; x < left.width(); ++x) EXPECT_EQ(left.at(x, y), right.at(left.width() - 1 - x, y));
  ASSERT_EQ(run("psf gallery --radii -4,4 --out " + q(dir / "g")).code, 0);
  const auto bank = nlohmann::json::parse(dpsynth::testing::read_file(dir / "g" / "bank.json"));
  EXPECT_EQ(bank["entries"].size(), 96u);
  EXPECT_TRUE(fs::exists(dir / "g" / "mosaic.png"));
}

TEST(Cli, CalibRoundTrip) {
  TempDir dir("cli_calib");
  ASSERT_EQ(run("calib pattern --type disk --rows 3 --cols 3 --feature 4 --spacing 14 --width 48 --height 48 --out " +
                q(dir / "p.png")).code,
            0);
  ASSERT_EQ(run("psf export --radius 4 --out " + q(dir / "k")).code, 0);
  const Image sharp = load_image(dir / "p.png");
  EXPECT_EQ(sharp.width(), 48);
  // Estimating from an identical pair gives a delta and converges.
  const auto est = run("calib estimate-psf --sharp " + q(dir / "p.png") + " --blurred " + q(dir / "p.png") +
                       " --kernel-size 5 --out " + q(dir / "e.pfm"));
  EXPECT_EQ(est.code, 0) << est.out;
  EXPECT_TRUE(nlohmann::json::parse(est.out)["converged"].get<bool>());
  EXPECT_EQ(run("calib estimate-psf --sharp " + q(dir / "p.png") + " --sharp " + q(dir / "p.png") + " --blurred " +
                q(dir / "p.png") + " --kernel-size 5 --out " + q(dir / "j.pfm")).code,
            2);
  EXPECT_EQ(run("calib estimate-psf --sharp " + q(dir / "p.png") + " --sharp " + q(dir / "p.png") + " --blurred " +
                q(dir / "p.png") + " --blurred " + q(dir / "p.png") + " --kernel-size 5 --out " + q(dir / "j.pfm")).code,
            0);
  const Image k = read_pfm(dir / "e.pfm");
  EXPECT_GT(k.at(2, 2), 0.9);
  const auto fit = run("calib fit-psf --kernel " + q(dir / "k" / "combined.pfm") + " --radii 2,4,6");
  ASSERT_EQ(fit.code, 0);
  const auto j = nlohmann::json::parse(fit.out);
  EXPECT_EQ(j["radius_px"], 4.0);
  EXPECT_EQ(j["order"], 3);
  EXPECT_EQ(j["alpha"], 0.8);
  EXPECT_EQ(j["beta"], 0.2);
}

TEST(Cli, DistortAndFit) {
  TempDir dir("cli_dist");
  ASSERT_EQ(run("calib pattern --type square --rows 6 --cols 6 --feature 8 --spacing 20 --width 128 --height 128 "
                "--out " + q(dir / "sq.png")).code,
            0);
  ASSERT_EQ(run("distort --in " + q(dir / "sq.png") + " --out " + q(dir / "d.png") + " --preset 2").code, 0);
  const auto r = run("calib fit-distortion --reference " + q(dir / "d.png") + " --pattern " + q(dir / "sq.png"));
  ASSERT_EQ(r.code, 0);
  const auto j = nlohmann::json::parse(r.out);
  const auto expected = standard_distortion_presets()[2];
  EXPECT_EQ(j["c1"], expected.c1);
  EXPECT_EQ(j["c2"], expected.c2);
  EXPECT_EQ(j["c3"], expected.c3);
  EXPECT_EQ(run("distort --in " + q(dir / "d.png") + " --out " + q(dir / "u.png") + " --preset 2 --inverse").code, 0);
  EXPECT_EQ(run("distort --in " + q(dir / "missing.png") + " --out " + q(dir / "x.png")).code, 1);
  EXPECT_EQ(run("distort --in " + q(dir / "sq.png") + " --out " + q(dir / "x.png") + " --preset 7").code, 2);
}

TEST(Cli, NoiseReproducible) {
  TempDir dir("cli_noise");
  save_image(Image(32, 32, 3, 0.5), dir / "g.png", 16);
  const std::string base = "noise --in " + q(dir / "g.png") + " --sigma 0.1 --seed 9 --frame 2 --view 1 --out ";
  ASSERT_EQ(run(base + q(dir / "a.png")).code, 0);
  ASSERT_EQ(run(base + q(dir / "b.png")).code, 0);
  EXPECT_EQ(dpsynth::testing::read_file(dir / "a.png"), dpsynth::testing::read_file(dir / "b.png"));
  ASSERT_EQ(run("noise --in " + q(dir / "g.png") + " --sigma 0 --out " + q(dir / "c.png")).code, 0);
  EXPECT_EQ(load_image(dir / "c.png").at(3, 3, 1), load_image(dir / "g.png").at(3, 3, 1));
}
