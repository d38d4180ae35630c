#include "dpsynth/optics.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "dpsynth/error.hpp"
#include "dpsynth/lensfx.hpp"

namespace dpsynth {

namespace {

constexpr double kMmPerMeter = 1000.0;

}  // namespace

void CameraConfig::validate() const {
  const auto fail = [this](const std::string& what) {
    throw ConfigError("camera '" + id + "': " + what);
  };
  if (!(focal_length_mm > 0.0) || !std::isfinite(focal_length_mm)) fail("focal_length_mm must be > 0");
  if (!(f_number > 0.0) || !std::isfinite(f_number)) fail("f_number must be > 0");
  if (!(pixels_per_mm > 0.0) || !std::isfinite(pixels_per_mm)) fail("pixels_per_mm must be > 0");
  if (!std::isfinite(focus_distance_m) || focus_distance_m * kMmPerMeter <= focal_length_mm) {
    fail("focus_distance_m must exceed the focal length");
  }
  if (!std::isfinite(distortion.c1) || !std::isfinite(distortion.c2) ||
      !std::isfinite(distortion.c3)) {
    fail("distortion coefficients must be finite");
  }
}

LensGeometry lens_derived(const CameraConfig& cam) {
  cam.validate();
  const double f = cam.focal_length_mm;
  const double s = cam.focus_distance_m * kMmPerMeter;
  return {f * s / (s - f), f / cam.f_number};
}

double coc_scale_px(const CameraConfig& cam) {
  const LensGeometry lens = lens_derived(cam);
  const double s = cam.focus_distance_m * kMmPerMeter;
  return lens.aperture_diameter_mm / 2.0 * (lens.sensor_distance_mm / s) * cam.pixels_per_mm;
}

double coc_radius(const CameraConfig& cam, double depth_m) {
  const double s = cam.focus_distance_m;
  return coc_scale_px(cam) * ((depth_m - s) / depth_m);
}

double depth_for_radius(const CameraConfig& cam, double radius_px) {
  CocField probe;
  probe.scale_px = coc_scale_px(cam);
  probe.focus_distance_m = cam.focus_distance_m;
  return probe.depth_for(radius_px);
}

double CocField::depth_for(double radius_px) const noexcept {
  // r = K (d - s) / d  =>  d = s / (1 - r / K)
  const double denom = 1.0 - radius_px / scale_px;
  if (denom <= 0.0) return std::numeric_limits<double>::infinity();
  return focus_distance_m / denom;
}

CocField coc_field(const CameraConfig& cam, const DepthMap& depth) {
  CocField field;
  field.width = depth.width();
  field.height = depth.height();
  field.scale_px = coc_scale_px(cam);
  field.focus_distance_m = cam.focus_distance_m;
  const double s = cam.focus_distance_m;
  const auto meters = depth.meters();
  field.signed_radius.resize(meters.size());
  for (std::size_t i = 0; i < meters.size(); ++i)
    field.signed_radius[i] = field.scale_px * ((meters[i] - s) / meters[i]);
  return field;
}

double pixels_per_mm_for_max_radius(const CameraConfig& cam, double near_m, double target_px) {
  if (!(near_m > 0.0) || !(target_px > 0.0)) throw InvalidArgument("near depth and target must be > 0");
  CameraConfig unit = cam;
  unit.pixels_per_mm = 1.0;
  const double scale_mm = coc_scale_px(unit);
  // |r| peaks at one end of [near, inf): the near plane (back focus) or the d -> inf limit.
  const double near_factor = std::abs((near_m - cam.focus_distance_m) / near_m);
  const double widest_mm = scale_mm * std::max(near_factor, 1.0);
  return target_px / widest_mm;
}

std::vector<CameraConfig> standard_camera_sets() {
  struct Set {
    double f;
    double F;
    double s;
  };
  constexpr Set sets[] = {{4, 5, 6}, {5, 8, 6}, {7, 5, 8}, {10, 13, 12}, {22, 10, 30}};
  const auto presets = standard_distortion_presets();
  std::vector<CameraConfig> cams;
  for (std::size_t i = 0; i < std::size(sets); ++i) {
    CameraConfig cam;
    cam.id = "cam" + std::to_string(i);
    cam.focal_length_mm = sets[i].f;
    cam.f_number = sets[i].F;
    cam.focus_distance_m = sets[i].s;
    cam.distortion = presets[i];
    cam.pixels_per_mm = pixels_per_mm_for_max_radius(cam, 1.0, 30.0);
    cams.push_back(cam);
  }
  return cams;
}

}  // namespace dpsynth
