// dpsynth: dual-pixel defocus dataset generator and calibration tools.

#include <CLI11.hpp>
#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "dpsynth/calib.hpp"
#include "dpsynth/dataset.hpp"
#include "dpsynth/error.hpp"
#include "dpsynth/image_io.hpp"
#include "dpsynth/lensfx.hpp"
#include "dpsynth/psf.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace dpsynth;

namespace {

enum Exit { kOk = 0, kPartial = 1, kConfig = 2 };

int g_jobs = 1;

std::vector<double> preset_union_grid(double DistortionCoeffs::*member) {
  std::vector<double> values{0.0};
  for (const auto& c : standard_distortion_presets()) values.push_back(c.*member);
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end()), values.end());
  return values;
}

int run_generate(const std::string& config_path, std::optional<std::uint64_t> seed,
                 std::optional<std::string> out, std::optional<int> bit_depth) {
  GenerationConfig cfg = load_generation_config(config_path);
  if (seed) cfg.seed = *seed;
  if (out) cfg.output_dir = *out;
  if (bit_depth) cfg.bit_depth = *bit_depth;
  const auto report = generate(cfg, {g_jobs});
  for (const auto& f : report.failures) {
    std::cerr << "failed " << output_stem(f.sequence, f.frame, f.camera_id) << ": " << f.message << "\n";
  }
  std::cout << "wrote " << report.written_quintets << " quintets, " << report.failures.size()
            << " failures; manifest " << report.manifest.string() << "\n";
  return report.failures.empty() ? kOk : kPartial;
}

int run_evaluate(const std::string& pred, const std::string& gt, const EvalOptions& opt,
                 const std::string& out) {
  const auto report = evaluate(pred, gt, opt);
  const std::string csv = eval_report_csv(report);
  if (out.empty()) {
    std::cout << csv;
  } else {
    std::ofstream(out, std::ios::binary) << csv;
  }
  for (const auto& id : report.unmatched_pred) std::cerr << "unmatched prediction: " << id << "\n";
  for (const auto& id : report.unmatched_gt) std::cerr << "unmatched ground truth: " << id << "\n";
  return report.unmatched_pred.empty() && report.unmatched_gt.empty() ? kOk : kPartial;
}

PsfGrids gallery_grids(const std::string& config_path, const std::vector<double>& radii) {
  PsfGrids grids = PsfGrids::bank_defaults(radii);
  if (!config_path.empty()) {
    grids = load_generation_config(config_path).psf;
    grids.radii = radii;
  }
  return grids;
}

json fit_json(const PsfFit& fit) {
  return {{"order", fit.params.order},   {"alpha", fit.params.alpha},
          {"beta", fit.params.beta},     {"kappa", fit.params.kappa},
          {"radius_px", fit.params.radius_px}, {"objective", fit.objective},
          {"evaluated", fit.evaluated}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dual-pixel defocus synthesis: dataset generation, PSF tools and calibration"};
  app.require_subcommand(1);
  app.add_option("--jobs,-j", g_jobs, "Worker threads")->check(CLI::PositiveNumber);

  // generate
  auto* gen = app.add_subcommand("generate", "Render a DP dataset from a JSON config");
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<int> bit_depth;
  gen->add_option("--config,-c", config_path, "Config file")->required();
  gen->add_option("--seed", seed, "Override the master seed");
  gen->add_option("--out,-o", out_dir, "Override the output directory");
  gen->add_option("--bit-depth", bit_depth, "PNG bit depth")->check(CLI::IsMember({8, 16}));
  gen->add_option("--jobs,-j", g_jobs, "Worker threads")->check(CLI::PositiveNumber);

  // evaluate
  auto* eval = app.add_subcommand("evaluate", "Score predictions against ground truth (CSV)");
  std::string pred_dir, gt_dir, eval_out;
  EvalOptions eval_opt;
  eval->add_option("--pred", pred_dir, "Prediction directory")->required();
  eval->add_option("--gt", gt_dir, "Ground-truth directory")->required();
  eval->add_option("--pred-suffix", eval_opt.pred_suffix, "Suffix stripped from prediction stems, e.g. _b");
  eval->add_option("--gt-suffix", eval_opt.gt_suffix, "Suffix stripped from ground-truth stems, e.g. _s");
  eval->add_option("--out,-o", eval_out, "CSV path (default stdout)");

  // psf
  auto* psf = app.add_subcommand("psf", "PSF kernels");
  psf->require_subcommand(1);
  auto* psf_export = psf->add_subcommand("export", "Write one DP PSF as PFM kernels");
  PsfParams single;
  std::string psf_out;
  psf_export->add_option("--order,-n", single.order, "Butterworth order");
  psf_export->add_option("--alpha", single.alpha, "Cutoff fraction of the radius");
  psf_export->add_option("--beta", single.beta, "Center floor");
  psf_export->add_option("--kappa", single.kappa, "Smoothing fraction of the radius");
  psf_export->add_option("--radius,-r", single.radius_px, "Signed CoC radius, px")->required();
  psf_export->add_option("--out,-o", psf_out, "Output directory")->required();

  auto* gallery = psf->add_subcommand("gallery", "Export a PSF bank with a contact sheet");
  std::vector<double> gallery_radii{10.0};
  std::string gallery_config;
  gallery->add_option("--radii", gallery_radii, "Signed radii, px")->delimiter(',');
  gallery->add_option("--config,-c", gallery_config, "Take the shape grid from a config's psf section");
  gallery->add_option("--out,-o", psf_out, "Output directory")->required();

  // calib
  auto* calib = app.add_subcommand("calib", "Calibration patterns and solvers");
  calib->require_subcommand(1);
  auto* pattern = calib->add_subcommand("pattern", "Render a disk or square grid");
  GridPattern grid;
  std::string pattern_kind = "disk", pattern_out;
  pattern->add_option("--type", pattern_kind, "disk or square")->check(CLI::IsMember({"disk", "square"}));
  pattern->add_option("--rows", grid.rows, "Grid rows");
  pattern->add_option("--cols", grid.cols, "Grid columns");
  pattern->add_option("--feature", grid.feature_size, "Disk radius or square side, px");
  pattern->add_option("--spacing", grid.spacing, "Center spacing, px");
  pattern->add_option("--width", grid.width, "Frame width");
  pattern->add_option("--height", grid.height, "Frame height");
  pattern->add_option("--out,-o", pattern_out, "Output PNG")->required();
  pattern->add_option("--bit-depth", bit_depth, "PNG bit depth")->check(CLI::IsMember({8, 16}));

  auto* estimate = calib->add_subcommand("estimate-psf", "Non-blind PSF estimate from a sharp/blurred pair");
  std::vector<std::string> sharp_paths, blurred_paths;
  std::string kernel_out;
  EstimateOptions est;
  estimate->add_option("--sharp", sharp_paths, "Sharp patch; repeat for a joint estimate")->required();
  estimate->add_option("--blurred", blurred_paths, "Blurred patch, paired with --sharp in order")->required();
  estimate->add_option("--kernel-size", est.kernel_size, "Odd kernel side");
  estimate->add_option("--l1", est.l1_weight, "Relative L1 weight");
  estimate->add_option("--max-iters", est.max_iters, "Iteration limit");
  estimate->add_option("--out,-o", kernel_out, "Output PFM")->required();

  auto* fit_psf = calib->add_subcommand("fit-psf", "Fit model parameters to a kernel");
  std::string kernel_path, space = "final";
  std::vector<double> fit_radii;
  fit_psf->add_option("--kernel", kernel_path, "Kernel PFM")->required();
  fit_psf->add_option("--radii", fit_radii, "Candidate radii, px")->delimiter(',')->required();
  fit_psf->add_option("--space", space, "final (48 shapes) or full")->check(CLI::IsMember({"final", "full"}));

  auto* fit_dist = calib->add_subcommand("fit-distortion", "Fit division-model coefficients");
  std::string reference_path, pattern_path;
  DistortionGrids dgrid{preset_union_grid(&DistortionCoeffs::c1), preset_union_grid(&DistortionCoeffs::c2),
                        preset_union_grid(&DistortionCoeffs::c3)};
  fit_dist->add_option("--reference", reference_path, "Distorted capture")->required();
  fit_dist->add_option("--pattern", pattern_path, "Undistorted pattern")->required();
  fit_dist->add_option("--c1", dgrid.c1, "c1 candidates")->delimiter(',');
  fit_dist->add_option("--c2", dgrid.c2, "c2 candidates")->delimiter(',');
  fit_dist->add_option("--c3", dgrid.c3, "c3 candidates")->delimiter(',');

  // distort / noise
  auto* dist = app.add_subcommand("distort", "Apply (or invert) radial distortion");
  std::string in_path, out_path;
  DistortionCoeffs coeffs;
  std::optional<int> preset;
  bool inverse = false;
  dist->add_option("--in,-i", in_path, "Input image")->required();
  dist->add_option("--out,-o", out_path, "Output image")->required();
  dist->add_option("--c1", coeffs.c1);
  dist->add_option("--c2", coeffs.c2);
  dist->add_option("--c3", coeffs.c3);
  dist->add_option("--preset", preset, "Preset index 0-4")->check(CLI::Range(0, 4));
  dist->add_flag("--inverse", inverse, "Undistort instead");
  dist->add_option("--bit-depth", bit_depth, "PNG bit depth")->check(CLI::IsMember({8, 16}));

  auto* noise = app.add_subcommand("noise", "Add signal-dependent Gaussian noise");
  NoiseConfig ncfg;
  NoiseStream nstream;
  noise->add_option("--in,-i", in_path, "Input image")->required();
  noise->add_option("--out,-o", out_path, "Output image")->required();
  noise->add_option("--sigma", ncfg.sigma, "Noise strength")->required();
  noise->add_option("--seed", ncfg.seed, "Seed");
  noise->add_option("--frame", nstream.frame_id, "Frame id");
  noise->add_option("--view", nstream.view_id, "View id");
  noise->add_option("--bit-depth", bit_depth, "PNG bit depth")->check(CLI::IsMember({8, 16}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (*gen) return run_generate(config_path, seed, out_dir, bit_depth);
    if (*eval) return run_evaluate(pred_dir, gt_dir, eval_opt, eval_out);

    if (*psf_export) {
      single.validate();
      const DpPsf p = select_dp_psf(single.shape(), single.kappa, single.radius_px, nullptr);
      fs::create_directories(psf_out);
      write_pfm(kernel_to_image(p.left), fs::path(psf_out) / "left.pfm");
      write_pfm(kernel_to_image(p.right), fs::path(psf_out) / "right.pfm");
      write_pfm(kernel_to_image(p.combined), fs::path(psf_out) / "combined.pfm");
      std::cout << single.describe() << ": " << p.combined.size() << "x" << p.combined.size() << "\n";
      return kOk;
    }
    if (*gallery) {
      const PsfBank bank = PsfBank::build(gallery_grids(gallery_config, gallery_radii), g_jobs);
      const auto result = export_psf_bank(bank, psf_out, true);
      std::cout << result.entries << " entries"
                << (result.mosaic ? ", mosaic " + result.mosaic->string() : std::string(", no mosaic")) << "\n";
      return kOk;
    }

    if (*pattern) {
      const Image img = pattern_kind == "disk" ? make_disk_pattern(grid) : make_square_pattern(grid);
      save_image(img, pattern_out, bit_depth.value_or(16));
      return kOk;
    }
    if (*estimate) {
      if (sharp_paths.size() != blurred_paths.size()) {
        throw InvalidArgument("estimate-psf: got " + std::to_string(sharp_paths.size()) + " --sharp but " +
                              std::to_string(blurred_paths.size()) + " --blurred patches");
      }
      std::vector<CalibPatch> patches;
      for (std::size_t i = 0; i < sharp_paths.size(); ++i)
        patches.push_back({load_image(sharp_paths[i]), load_image(blurred_paths[i])});
      const auto result = estimate_psf(patches, est);
      write_pfm(kernel_to_image(result.kernel), kernel_out);
      std::cout << json{{"objective", result.objective},
                        {"iterations", result.iterations},
                        {"converged", result.converged}}.dump()
                << "\n";
      return result.converged ? kOk : kPartial;
    }
    if (*fit_psf) {
      const Kernel2D kernel = image_to_kernel(read_pfm(kernel_path));
      const auto grids = space == "final" ? PsfSearchGrids::bank_grid(fit_radii)
                                          : PsfSearchGrids::full_space(fit_radii);
      std::cout << fit_json(fit_psf_params(kernel, grids, g_jobs)).dump() << "\n";
      return kOk;
    }
    if (*fit_dist) {
      const auto fit = fit_distortion_coeffs(load_image(reference_path), load_image(pattern_path), dgrid, g_jobs);
      std::cout << json{{"c1", fit.coeffs.c1}, {"c2", fit.coeffs.c2}, {"c3", fit.coeffs.c3},
                        {"score", fit.score}, {"evaluated", fit.evaluated}}.dump()
                << "\n";
      return kOk;
    }

    if (*dist) {
      if (preset) coeffs = standard_distortion_presets()[static_cast<std::size_t>(*preset)];
      const Image img = load_image(in_path);
      WarpStats stats;
      const Image result = inverse ? undistort(img, coeffs) : distort(img, coeffs, &stats);
      save_image(result, out_path, bit_depth.value_or(16));
      if (stats.diverged_pixels > 0) std::cerr << stats.diverged_pixels << " pixels fell back to identity\n";
      return kOk;
    }
    if (*noise) {
      save_image(add_signal_noise(load_image(in_path), ncfg, nstream), out_path, bit_depth.value_or(16));
      return kOk;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const InvalidArgument& e) {
    std::cerr << "invalid argument: " << e.what() << "\n";
    return kConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kPartial;
  }
  return kOk;
}
