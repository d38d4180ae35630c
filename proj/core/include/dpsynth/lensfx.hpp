#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "dpsynth/image.hpp"
#include "dpsynth/optics.hpp"

namespace dpsynth {

/// The five calibrated division-model coefficient sets, ordered by increasing focal length.
std::vector<DistortionCoeffs> standard_distortion_presets();

/// Division-model geometry for one frame size.
///
/// Undistorted -> distorted: p_d = c + (p_u - c) / (1 + c1 R^2 + c2 R^4 + c3 R^6), with R
/// the distance of the undistorted point from the frame center c, normalized so the
/// corner pixel center has R = 1.
class RadialDistortion {
 public:
  static constexpr int kMaxIterations = 20;
  static constexpr double kTolerancePx = 1e-6;

  RadialDistortion(int width, int height, DistortionCoeffs coeffs);

  Point center() const noexcept { return center_; }
  double corner_distance() const noexcept { return corner_; }
  const DistortionCoeffs& coeffs() const noexcept { return coeffs_; }

  /// Closed-form forward map.
  Point distort_point(Point undistorted) const noexcept;
  /// Damped fixed-point inverse starting from the distorted point; nullopt on divergence.
  std::optional<Point> undistort_point(Point distorted) const noexcept;

 private:
  double denominator(double normalized_radius) const noexcept;

  DistortionCoeffs coeffs_;
  Point center_;
  double corner_;
};

struct WarpStats {
  std::size_t diverged_pixels = 0;
};

/// Produces the distorted image: each output pixel samples the input at its undistorted
/// location (bilinear, clamp-to-edge). Diverged pixels fall back to the identity mapping.
Image distort(const Image& img, const DistortionCoeffs& coeffs, WarpStats* stats = nullptr);

/// Inverse warp: each output pixel samples the distorted input at its forward-mapped location.
Image undistort(const Image& img, const DistortionCoeffs& coeffs);

struct NoiseConfig {
  double sigma = 0.0;
  std::uint64_t seed = 0;
};

/// Identifies one noise field; distinct views of a frame use distinct view ids.
struct NoiseStream {
  std::uint64_t frame_id = 0;
  std::uint32_t view_id = 0;
};

/// I + I * N with N ~ N(0, sigma^2), clamped to [0, 1]. Sample i of the image draws from
/// the counter (seed, frame_id, view_id, i), so output is independent of threading.
Image add_signal_noise(const Image& img, const NoiseConfig& cfg, NoiseStream stream = {});

/// sigma in {0.05, 0.055, ..., 0.5}.
std::vector<double> standard_noise_sigmas();

}  // namespace dpsynth
