#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "dpsynth/image.hpp"

namespace dpsynth {

/// Reads an 8/16-bit PNG (gray or RGB; palettes are expanded) or a PFM raster.
///
/// Integer codes are divided by the maximum code value. `bit_depth_hint`
/// overrides that maximum for containers holding fewer significant bits
/// (e.g. 12-bit data in a 16-bit PNG divides by 4095); results are clamped
/// to [0, 1]. PFM samples pass through clamped to [0, 1].
Image load_image(const std::filesystem::path& path,
                 std::optional<int> bit_depth_hint = std::nullopt);

/// Writes a PNG with round-half-up quantization: code = floor(v * max + 0.5).
void save_image(const Image& img, const std::filesystem::path& path, int bit_depth = 8);

enum class DepthFormat { Png16, Pfm };

struct DepthLoadOptions {
  double scale = 1.0;  ///< meters per raw code (png16) or per stored float (pfm)
  DepthFormat format = DepthFormat::Png16;
  double far_sentinel_m = 1000.0;  ///< replaces code 0
};

std::optional<DepthFormat> parse_depth_format(const std::string& name);

/// Loads a depth buffer in meters. Multi-channel PNGs use the first channel.
DepthMap load_depth(const std::filesystem::path& path, const DepthLoadOptions& options);

/// Raw PFM access. Rows are returned top-to-bottom; values are not clamped.
Image read_pfm(const std::filesystem::path& path);
/// Little-endian PFM ("PF" for 3 channels, "Pf" for 1).
void write_pfm(const Image& img, const std::filesystem::path& path);

Image kernel_to_image(const Kernel2D& kernel);
Kernel2D image_to_kernel(const Image& img);

}  // namespace dpsynth
