#pragma once

#include <string>
#include <vector>

#include "dpsynth/image.hpp"

namespace dpsynth {

/// Division-model coefficients c1, c2, c3 (dimensionless, R normalized to the frame corner).
struct DistortionCoeffs {
  double c1 = 0.0;
  double c2 = 0.0;
  double c3 = 0.0;

  bool is_identity() const noexcept { return c1 == 0.0 && c2 == 0.0 && c3 == 0.0; }
  friend bool operator==(const DistortionCoeffs&, const DistortionCoeffs&) = default;
};

/// Thin-lens camera. Focal length in mm, aperture as f-number, focus distance in meters.
struct CameraConfig {
  std::string id = "camera";
  double focal_length_mm = 50.0;
  double f_number = 4.0;
  double focus_distance_m = 1.0;
  double pixels_per_mm = 100.0;
  DistortionCoeffs distortion;

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

struct LensGeometry {
  double sensor_distance_mm = 0.0;    ///< s' = f s / (s - f)
  double aperture_diameter_mm = 0.0;  ///< q = f / F
};

LensGeometry lens_derived(const CameraConfig& cam);

/// Pixel-space factor K such that r = K (d - s) / d.
double coc_scale_px(const CameraConfig& cam);

/// Signed circle-of-confusion radius in pixels for a point at `depth_m`.
/// Positive behind the focal plane (front focus), negative in front of it.
double coc_radius(const CameraConfig& cam, double depth_m);

/// Depth whose CoC radius is `radius_px`; +inf when the radius is at or beyond the d -> inf limit.
double depth_for_radius(const CameraConfig& cam, double radius_px);

struct CocField {
  int width = 0;
  int height = 0;
  std::vector<double> signed_radius;
  double scale_px = 0.0;          ///< K from coc_scale_px
  double focus_distance_m = 0.0;  ///< s, for mapping radii back to depths

  double at(int x, int y) const noexcept {
    return signed_radius[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) +
                         static_cast<std::size_t>(x)];
  }
  double depth_for(double radius_px) const noexcept;
};

CocField coc_field(const CameraConfig& cam, const DepthMap& depth);

/// Sensor density that maps the largest |r| over depths [near_m, inf) to `target_px`.
double pixels_per_mm_for_max_radius(const CameraConfig& cam, double near_m, double target_px);

/// The five (focal length, f-number, focus distance) sets used for dataset generation,
/// paired in order with the five calibrated distortion presets. Sensor density is
/// fitted with pixels_per_mm_for_max_radius(cam, 1 m, 30 px).
std::vector<CameraConfig> standard_camera_sets();

}  // namespace dpsynth
