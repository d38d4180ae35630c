#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dpsynth/image_io.hpp"
#include "dpsynth/metrics.hpp"
#include "dpsynth/optics.hpp"
#include "dpsynth/psf.hpp"

namespace dpsynth {

/// One all-in-focus frame with its depth buffer.
struct FrameInput {
  std::filesystem::path image;
  std::filesystem::path depth;
  std::string sequence = "seq0";
  int frame = 0;
};

struct GenerationConfig {
  std::vector<FrameInput> inputs;
  std::vector<CameraConfig> cameras;
  PsfGrids psf;  ///< radii unused; layer radii come from the scene
  std::vector<double> noise_sigmas;
  DepthLoadOptions depth;
  int max_layers = 500;
  std::uint64_t seed = 0;
  std::filesystem::path output_dir = "out";
  int bit_depth = 16;
  bool linearize_srgb = false;

  /// Throws ConfigError naming the offending entry.
  void validate() const;
};

/// Five camera sets with their distortion presets, the 48-shape PSF grid, the
/// sigma grid {0.05, ..., 0.5}, SYNTHIA-style 16-bit depth in centimeters.
GenerationConfig synthia_preset();

/// Parses a JSON config; relative paths resolve against the file's directory.
/// A "preset" key seeds defaults that the remaining keys override.
GenerationConfig load_generation_config(const std::filesystem::path& path);
GenerationConfig parse_generation_config(const std::string& json_text,
                                         const std::filesystem::path& base_dir);

struct GenerateOptions {
  int jobs = 1;
};

struct FrameFailure {
  std::string sequence;
  int frame = 0;
  std::string camera_id;
  std::string message;
};

struct GenerateReport {
  std::size_t written_quintets = 0;
  std::vector<FrameFailure> failures;
  std::filesystem::path manifest;
};

/// Output stem `<seq>/<frame>_<camera>`; files append `_{l,r,b,s,rd}.png` and `.json`.
std::string output_stem(const std::string& sequence, int frame, const std::string& camera_id);

/// Renders every (frame, camera) pair, applies distortion and noise, writes the quintet,
/// a JSON sidecar and `manifest.json`. Output bytes depend only on the config.
GenerateReport generate(const GenerationConfig& config, const GenerateOptions& options = {});

struct EvalOptions {
  std::string pred_suffix;  ///< stripped from prediction stems before matching
  std::string gt_suffix;
  EdgeLossConfig edge;
};

struct EvalRow {
  std::string id;
  double psnr = 0.0;
  double ssim = 0.0;
  double mae = 0.0;
  EdgeLoss edge;
};

struct EvalReport {
  std::vector<EvalRow> rows;  ///< sorted by id
  EvalRow mean;
  std::vector<std::string> unmatched_pred;
  std::vector<std::string> unmatched_gt;
};

/// Pairs images (.png/.pfm, recursive) by relative stem and scores them.
EvalReport evaluate(const std::filesystem::path& pred_dir, const std::filesystem::path& gt_dir,
                    const EvalOptions& options = {});
std::string eval_report_csv(const EvalReport& report);

struct BankExport {
  std::size_t entries = 0;
  std::filesystem::path manifest;
  std::optional<std::filesystem::path> mosaic;
};

/// Writes every bank entry as `<stem>_{l,r,c}.pfm` plus `bank.json`; with `mosaic`,
/// also an 8-bit contact sheet (one cell per entry: left | right | combined, scaled by
/// the combined kernel's peak). An empty bank yields no mosaic file.
BankExport export_psf_bank(const PsfBank& bank, const std::filesystem::path& out_dir, bool mosaic);

/// Contact sheet raster used by export_psf_bank; empty for an empty bank.
Image psf_mosaic(const PsfBank& bank);

}  // namespace dpsynth
