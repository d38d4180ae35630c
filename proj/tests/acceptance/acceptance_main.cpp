// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <functional>
#include <json.hpp>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "dpsynth/calib.hpp"
#include "dpsynth/convolve.hpp"
#include "dpsynth/image_io.hpp"
#include "dpsynth/lensfx.hpp"
#include "dpsynth/metrics.hpp"
#include "dpsynth/optics.hpp"
#include "dpsynth/psf.hpp"
#include "dpsynth/render.hpp"
#include "test_support.hpp"

using namespace dpsynth;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  const char* name;
  double budget_s;  ///< 0 = no runtime bound
  std::function<Outcome()> run;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double centroid_x(const Image& img) {
  double mass = 0.0, mx = 0.0;
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) {
      mass += img.at(x, y);
      mx += x * img.at(x, y);
    }
  return mx / mass;
}

Image view_sum(const DpFrame& f) {
  Image out = f.left;
  for (std::size_t i = 0; i < out.samples().size(); ++i) out.samples()[i] += f.right.samples()[i];
  return out;
}

std::vector<double> union_grid(double DistortionCoeffs::*member) {
  std::vector<double> values{0.0};
  for (const auto& c : standard_distortion_presets()) values.push_back(c.*member);
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end()), values.end());
  return values;
}

// C1
Outcome psf_constraints() {
  const PsfGrids g = PsfGrids::bank_defaults();
  std::size_t checked = 0;
  for (const auto& shape : g.shapes())
    for (double r : {2.0, 5.0, 10.0, 20.0})
      for (double sign : {1.0, -1.0}) {
        const DpPsf psf = split_dp_psf(PsfParams(shape, g.kappa, sign * r));
        const auto v = dp_psf_violations(psf);
        if (!v.empty()) return {false, PsfParams(shape, g.kappa, sign * r).describe() + ": " + v.front()};
        ++checked;
      }
  return {checked == 48 * 8, std::to_string(checked) + " PSFs satisfy mass, sign, mirror and sum constraints"};
}

// C2
Outcome in_focus_identity() {
  const CameraConfig cam = standard_camera_sets()[0];
  const Image sharp = dpsynth::testing::random_image(256, 256, 3, 2);
  const DpFrame f = render_dp_frame(sharp, DepthMap::constant(256, 256, cam.focus_distance_m), cam, {});
  const Image sum = view_sum(f);
  double err = 0.0;
  for (std::size_t i = 0; i < sum.samples().size(); ++i)
    err = std::max(err, std::abs(sum.samples()[i] - sharp.samples()[i]));
  return {err < 1e-5, "max |L + R - sharp| = " + fmt("%.3g", err)};
}

// C3
Outcome energy_conservation() {
  const CameraConfig cam = standard_camera_sets()[0];
  const int n = 128;
  std::mt19937 gen(3);
  std::uniform_real_distribution<double> depth(1.0, 20.0);
  std::vector<double> meters(static_cast<std::size_t>(n) * n);
  for (double& m : meters) m = depth(gen);
  const Image gray(n, n, 3, 0.5);
  const DpFrame f = render_dp_frame(gray, DepthMap(n, n, std::move(meters)), cam, {6, 0.6, 0.2});
  const int inset = psf_kernel_side(std::max(std::abs(f.meta.min_radius_px), std::abs(f.meta.max_radius_px)), 0.14) / 2;
  const Image sum = view_sum(f);
  double err = 0.0;
  for (int y = inset; y < n - inset; ++y)
    for (int x = inset; x < n - inset; ++x)
      for (int c = 0; c < 3; ++c) err = std::max(err, std::abs(sum.at(x, y, c) - 0.5));
  return {inset < n / 2 && err < 1e-3,
          std::to_string(f.meta.layer_count) + " layers, inset " + std::to_string(inset) + " px, max error " +
              fmt("%.3g", err)};
}

// C4
Outcome disparity_flip() {
  const CameraConfig cam = standard_camera_sets()[0];
  const int n = 101;
  Image point(n, n, 1);
  point.at(50, 50) = 1.0;
  const double s = cam.focus_distance_m;
  const DpFrame far = render_dp_frame(point, DepthMap::constant(n, n, 2.0 * s), cam, {});
  const DpFrame near = render_dp_frame(point, DepthMap::constant(n, n, 0.7 * s), cam, {});
  const double d_far = centroid_x(far.left) - centroid_x(far.right);
  const double d_near = centroid_x(near.left) - centroid_x(near.right);
  const bool flipped = (d_far > 0.0 && d_near < 0.0) || (d_far < 0.0 && d_near > 0.0);
  return {flipped, "L-R centroid offset " + fmt("%+.3f", d_far) + " px behind focus, " + fmt("%+.3f", d_near) +
                       " px in front"};
}

// C5
Outcome model_fidelity() {
  const double r = 10.0;
  const Kernel2D target = make_combined_psf({9, 0.6, 0.1, 0.14, r});
  const auto fit = fit_psf_params(target, PsfSearchGrids::bank_grid({8.0, 9.0, 10.0, 11.0, 12.0}));
  const double ncc_model = ncc2d(target, make_combined_psf(fit.params));
  const double ncc_disk = ncc2d(target, uniform_disk_psf(r, psf_kernel_side(r, 0.14)));
  return {ncc_model > ncc_disk,
          "NCC best fit " + fmt("%.4f", ncc_model) + " vs uniform disk " + fmt("%.4f", ncc_disk)};
}

// C6
Outcome calibration_loop() {
  GridPattern grid;
  grid.rows = grid.cols = 4;
  grid.feature_size = 4.0;
  grid.spacing = 15.0;
  grid.width = grid.height = 64;
  const PsfBank bank = PsfBank::build(PsfGrids::bank_defaults({10.0}));
  const PsfShape shape{6, 0.6, 0.2};
  const DpPsf* psf = bank.find(shape, 10.0);
  if (!psf || psf->combined.size() != 31) return {false, "bank PSF missing or not 31x31"};
  const Kernel2D& truth = psf->combined;
  EstimateOptions opt;
  opt.kernel_size = 31;

  const Image sharp = make_disk_pattern(grid);
  const auto clean = estimate_psf(sharp, convolve(sharp, truth), opt);
  const double ncc_clean = ncc2d(clean.kernel, truth);
  const auto fit = fit_psf_params(clean.kernel, PsfSearchGrids::bank_grid({8.0, 9.0, 10.0, 11.0, 12.0}));
  const bool exact = fit.params.shape() == shape && fit.params.kappa == 0.14 && fit.params.radius_px == 10.0;

  // Noisy capture: sixteen 64x64 disk patches at sub-pixel grid offsets, independent noise
  // draws, estimated jointly. A single noisy patch is reported for reference.
  constexpr int kPatches = 16;
  std::vector<CalibPatch> patches;
  for (int i = 0; i < kPatches; ++i) {
    GridPattern g = grid;
    g.offset = {(i % 4) * 0.5 - 0.75, (i / 4) * 0.5 - 0.75};
    const Image s = make_disk_pattern(g);
    patches.push_back({s, add_signal_noise(convolve(s, truth), {0.05, 6}, {static_cast<std::uint64_t>(i), 0})});
  }
  const double ncc_single = ncc2d(estimate_psf(std::span<const CalibPatch>(patches.data(), 1), opt).kernel, truth);
  const double ncc_noisy = ncc2d(estimate_psf(patches, opt).kernel, truth);
  return {ncc_clean > 0.98 && ncc_noisy > 0.90 && exact,
          "NCC " + fmt("%.4f", ncc_clean) + " noise-free; at sigma 0.05 " + fmt("%.4f", ncc_noisy) + " over " +
              std::to_string(kPatches) + " patches (" + fmt("%.4f", ncc_single) + " single); fit " +
              fit.params.describe()};
}

// C7
Outcome distortion_recovery() {
  GridPattern grid;
  grid.rows = grid.cols = 10;
  grid.feature_size = 10.0;
  grid.spacing = 24.0;
  grid.width = grid.height = 256;
  const Image pattern = make_square_pattern(grid);
  const DistortionGrids dgrid{union_grid(&DistortionCoeffs::c1), union_grid(&DistortionCoeffs::c2),
                              union_grid(&DistortionCoeffs::c3)};
  const auto centers = grid_centers(grid);
  std::ostringstream detail;
  bool pass = true;
  double worst_point = 0.0, worst_centroid = 0.0;
  const auto presets = standard_distortion_presets();
  for (std::size_t i = 0; i < presets.size(); ++i) {
    const Image distorted = distort(pattern, presets[i]);
    const auto fit = fit_distortion_coeffs(distorted, pattern, dgrid);
    if (!(fit.coeffs == presets[i])) {
      pass = false;
      detail << "preset " << i << " fit to (" << fit.coeffs.c1 << ", " << fit.coeffs.c2 << ", " << fit.coeffs.c3
             << "); ";
    }
    // Geometric round trip on the interior, inset by a tenth of the frame.
    const RadialDistortion model(grid.width, grid.height, presets[i]);
    for (int y = 26; y < 230; ++y)
      for (int x = 26; x < 230; ++x) {
        const Point p{static_cast<double>(x), static_cast<double>(y)};
        const auto back = model.undistort_point(model.distort_point(p));
        const double e = back ? std::hypot(back->x - p.x, back->y - p.y) : 1e9;
        worst_point = std::max(worst_point, e);
      }
    // Image round trip: interior feature centroids stay put.
    const Image restored = undistort(distorted, presets[i]);
    for (const Point& c : centers) {
      if (std::hypot(c.x - 127.5, c.y - 127.5) > 0.8 * 127.5) continue;
      double m = 0.0, mx = 0.0, my = 0.0;
      for (int y = static_cast<int>(c.y) - 11; y <= static_cast<int>(c.y) + 12; ++y)
        for (int x = static_cast<int>(c.x) - 11; x <= static_cast<int>(c.x) + 12; ++x) {
          const double v = restored.at(x, y);
          m += v;
          mx += v * x;
          my += v * y;
        }
      worst_centroid = std::max(worst_centroid, std::hypot(mx / m - c.x, my / m - c.y));
    }
  }
  pass = pass && worst_point < 0.5 && worst_centroid < 0.5;
  detail << presets.size() << " presets on a " << dgrid.size() << "-point grid; round trip " << fmt("%.2g", worst_point)
         << " px (points), " << fmt("%.3f", worst_centroid) << " px (feature centroids)";
  return {pass, detail.str()};
}

// C8
Outcome noise_statistics() {
  const Image gray(1000, 1000, 1, 0.5);
  const Image a = add_signal_noise(gray, {0.1, 1234}, {7, 0});
  const Image b = add_signal_noise(gray, {0.1, 1234}, {7, 0});
  double sum = 0.0, sq = 0.0;
  for (double v : a.samples()) {
    sum += v - 0.5;
    sq += (v - 0.5) * (v - 0.5);
  }
  const double n = static_cast<double>(a.samples().size());
  const double mean = sum / n;
  const double std = std::sqrt(sq / n - mean * mean);
  const Image zero = add_signal_noise(gray, {0.0, 1234}, {7, 0});
  const bool identity = std::memcmp(zero.samples().data(), gray.samples().data(), n * sizeof(double)) == 0;
  const bool repro = std::memcmp(a.samples().data(), b.samples().data(), n * sizeof(double)) == 0;
  return {std::abs(std - 0.05) <= 0.001 && identity && repro,
          "std " + fmt("%.5f", std) + ", sigma 0 identity " + (identity ? "yes" : "no") + ", reproducible " +
              (repro ? "yes" : "no")};
}

// C9
Outcome metric_sanity() {
  GridPattern grid;
  grid.rows = grid.cols = 3;
  grid.feature_size = 10.0;
  grid.spacing = 20.0;
  grid.width = grid.height = 64;
  const Image sharp = make_square_pattern(grid);
  const Image blurred = convolve(sharp, uniform_disk_psf(3.0, 7));
  const EdgeLoss self = edge_loss(sharp, sharp);
  const bool reflexive = psnr(sharp, sharp) == kPsnrCapDb && std::abs(ssim(sharp, sharp) - 1.0) < 1e-12 &&
                         mae(sharp, sharp) == 0.0 && self.total == 0.0;
  EdgeLossConfig cfg;
  cfg.scales = {3, 7, 11};
  cfg.lambda_x = 0.03;
  cfg.lambda_y = 0.02;
  bool monotone = true;
  double prev = INFINITY;
  std::ostringstream series;
  for (int k = 0; k <= 10; ++k) {
    const double t = k / 10.0;
    Image mix = blurred;
    for (std::size_t i = 0; i < mix.samples().size(); ++i)
      mix.samples()[i] = (1.0 - t) * blurred.samples()[i] + t * sharp.samples()[i];
    const double loss = edge_loss(mix, sharp, cfg).total;
    if (k < 10 ? !(loss < prev) : !(loss <= prev)) monotone = false;
    prev = loss;
    if (k == 0) series << "edge loss " << fmt("%.4g", loss);
  }
  series << " -> " << fmt("%.3g", prev) << " along blur->sharp";
  return {reflexive && monotone, std::string("reflexive extremes ") + (reflexive ? "ok" : "broken") + ", " +
                                     (monotone ? "monotone " : "NOT monotone ") + series.str()};
}

// C10
int run_cli(const std::string& args) {
  const std::string cmd = std::string("\"") + DPSYNTH_CLI_PATH + "\" " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void write_scene(const fs::path& dir, int index) {
  const int w = 640, h = 480;
  Image img(w, h, 3);
  Image depth(w, h, 1);
  std::mt19937 gen(100 + index);
  std::uniform_real_distribution<double> jitter(-0.08, 0.08);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const bool check = ((x / 16) + (y / 16)) % 2 == 0;
      for (int c = 0; c < 3; ++c)
        img.at(x, y, c) = std::clamp((check ? 0.7 : 0.25) + 0.1 * c + jitter(gen), 0.0, 1.0);
      // Piecewise planar: far wall, slanted floor, two boxes.
      double m = 60.0;
      if (y > h / 2) m = 3.0 + 40.0 * (h - 1 - y) / (h / 2.0);
      if (x > 80 + 20 * index && x < 260 + 20 * index && y > 140 && y < 400) m = 1.5 + 0.3 * index;
      if (x > 400 && x < 580 && y > 60 && y < 300) m = 8.0;
      depth.at(x, y) = std::round(m * 100.0) / 65535.0;
    }
  const std::string name = "frame" + std::to_string(index);
  save_image(img, dir / (name + ".png"), 8);
  save_image(depth, dir / (name + "_depth.png"), 16);
}

Outcome cli_determinism() {
  dpsynth::testing::TempDir dir("accept_det");
  nlohmann::json inputs = nlohmann::json::array();
  for (int i = 0; i < 5; ++i) {
    write_scene(dir.path(), i);
    const std::string name = "frame" + std::to_string(i);
    inputs.push_back({{"image", name + ".png"}, {"depth", name + "_depth.png"}, {"sequence", "scene"}, {"frame", i}});
  }
  std::ofstream(dir / "config.json") << nlohmann::json{{"preset", "paper-synthia"}, {"seed", 2024}, {"inputs", inputs}}.dump(2);
  std::ostringstream detail;
  double slowest = 0.0;
  for (const char* jobs : {"1", "8"}) {
    const auto t0 = std::chrono::steady_clock::now();
    const int code = run_cli("generate --config \"" + (dir / "config.json").string() + "\" --out \"" +
                             (dir / (std::string("out") + jobs)).string() + "\" --jobs " + jobs);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    slowest = std::max(slowest, secs);
    detail << "--jobs " << jobs << " " << fmt("%.1f", secs) << " s; ";
    if (code != 0) return {false, detail.str() + "exit code " + std::to_string(code)};
  }
  std::size_t files = 0, quintets = 0;
  for (const auto& e : fs::recursive_directory_iterator(dir / "out1")) {
    if (!e.is_regular_file()) continue;
    const fs::path rel = fs::relative(e.path(), dir / "out1");
    if (dpsynth::testing::read_file(e.path()) != dpsynth::testing::read_file(dir / "out8" / rel))
      return {false, detail.str() + rel.string() + " differs"};
    ++files;
    quintets += rel.string().size() > 5 && rel.string().ends_with("_rd.png");
  }
  std::size_t files8 = 0;
  for (const auto& e : fs::recursive_directory_iterator(dir / "out8")) files8 += e.is_regular_file();
  detail << quintets << " quintets, " << files << " files byte-identical";
  return {quintets == 25 && files == files8 && files == 25 * 6 + 1 && slowest < 120.0, detail.str()};
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {"psf-constraint-suite", 10.0, psf_constraints},
      {"in-focus-identity", 5.0, in_focus_identity},
      {"energy-conservation", 0.0, energy_conservation},
      {"dp-disparity-flip", 0.0, disparity_flip},
      {"psf-model-fidelity", 0.0, model_fidelity},
      {"calibration-loop-closure", 60.0, calibration_loop},
      {"distortion-recovery", 0.0, distortion_recovery},
      {"noise-statistics", 0.0, noise_statistics},
      {"metric-sanity", 0.0, metric_sanity},
      {"generate-determinism", 240.0, cli_determinism},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto& c = criteria[i];
    const auto t0 = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.budget_s > 0.0 && secs >= c.budget_s) {
      out.pass = false;
      out.detail += "; over the " + fmt("%.0f", c.budget_s) + " s budget";
    }
    failures += !out.pass;
    std::printf("%s C%zu %-26s %7.2f s  %s\n", out.pass ? "PASS" : "FAIL", i + 1, c.name, secs, out.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
