#include "dpsynth/lensfx.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "dpsynth/error.hpp"
#include "dpsynth/rng.hpp"

namespace dpsynth {

namespace {

// Residual accepted when the iteration budget runs out before the tolerance is met.
constexpr double kAcceptResidualPx = 1e-3;

void check_finite(const DistortionCoeffs& c) {
  if (!std::isfinite(c.c1) || !std::isfinite(c.c2) || !std::isfinite(c.c3)) {
    throw InvalidArgument("distortion coefficients must be finite");
  }
}

}  // namespace

std::vector<DistortionCoeffs> standard_distortion_presets() {
  return {
      {2e-2, 2e-2, 3e-2},
      {8e-3, 2e-3, 2.2e-3},
      {-4e-3, 9e-4, -9e-4},
      {-7e-3, -3.8e-3, -3.6e-3},
      {-8e-3, -5e-3, -4.5e-3},
  };
}

RadialDistortion::RadialDistortion(int width, int height, DistortionCoeffs coeffs)
    : coeffs_(coeffs), center_{(width - 1) / 2.0, (height - 1) / 2.0} {
  if (width <= 0 || height <= 0) throw InvalidArgument("distortion: frame must be non-empty");
  check_finite(coeffs);
  corner_ = std::hypot(center_.x, center_.y);
}

double RadialDistortion::denominator(double r) const noexcept {
  const double r2 = r * r;
  return 1.0 + r2 * (coeffs_.c1 + r2 * (coeffs_.c2 + r2 * coeffs_.c3));
}

Point RadialDistortion::distort_point(Point u) const noexcept {
  if (corner_ == 0.0) return u;
  const double dx = u.x - center_.x;
  const double dy = u.y - center_.y;
  const double d = denominator(std::hypot(dx, dy) / corner_);
  return {center_.x + dx / d, center_.y + dy / d};
}

std::optional<Point> RadialDistortion::undistort_point(Point p) const noexcept {
  const double dx = p.x - center_.x;
  const double dy = p.y - center_.y;
  const double rd_px = std::hypot(dx, dy);
  if (rd_px == 0.0 || corner_ == 0.0 || coeffs_.is_identity()) return p;
  const double rd = rd_px / corner_;

  // Solve ru = rd * D(ru) in normalized radius; the direction from the center is shared.
  const auto residual = [&](double ru) {
    const double d = denominator(ru);
    return d > 0.0 ? std::abs(ru / d - rd) * corner_ : HUGE_VAL;
  };
  double ru = rd;
  double res = residual(ru);
  double damping = 1.0;
  for (int it = 0; it < kMaxIterations && res >= kTolerancePx; ++it) {
    const double d = denominator(ru);
    if (!(d > 0.0)) return std::nullopt;
    const double next = ru + damping * (rd * d - ru);
    const double next_res = residual(next);
    if (!std::isfinite(next_res)) return std::nullopt;
    if (next_res > res) damping *= 0.5;
    if (next_res <= res || damping < 1e-3) {
      ru = next;
      res = next_res;
    }
  }
  if (!(res < kAcceptResidualPx) || !(ru >= 0.0)) return std::nullopt;
  const double s = ru / rd;
  return Point{center_.x + dx * s, center_.y + dy * s};
}

Image distort(const Image& img, const DistortionCoeffs& coeffs, WarpStats* stats) {
  check_finite(coeffs);
  if (stats) *stats = {};
  if (coeffs.is_identity()) return img;
  const RadialDistortion model(img.width(), img.height(), coeffs);
  Image out(img.width(), img.height(), img.channels());
  std::vector<double> px(static_cast<std::size_t>(img.channels()));
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const Point target{static_cast<double>(x), static_cast<double>(y)};
      auto src = model.undistort_point(target);
      if (!src) {
        if (stats) ++stats->diverged_pixels;
        src = target;
      }
      bilinear_sample(img, src->x, src->y, px);
      for (int c = 0; c < img.channels(); ++c) out.at(x, y, c) = px[static_cast<std::size_t>(c)];
    }
  }
  return out;
}

Image undistort(const Image& img, const DistortionCoeffs& coeffs) {
  check_finite(coeffs);
  if (coeffs.is_identity()) return img;
  const RadialDistortion model(img.width(), img.height(), coeffs);
  Image out(img.width(), img.height(), img.channels());
  std::vector<double> px(static_cast<std::size_t>(img.channels()));
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const Point src = model.distort_point({static_cast<double>(x), static_cast<double>(y)});
      bilinear_sample(img, src.x, src.y, px);
      for (int c = 0; c < img.channels(); ++c) out.at(x, y, c) = px[static_cast<std::size_t>(c)];
    }
  }
  return out;
}

Image add_signal_noise(const Image& img, const NoiseConfig& cfg, NoiseStream stream) {
  if (!(cfg.sigma >= 0.0) || !std::isfinite(cfg.sigma)) {
    throw InvalidArgument("noise sigma must be finite and >= 0");
  }
  if (cfg.sigma == 0.0) return img;
  const CounterRng rng(derive_key(cfg.seed, {stream.frame_id, stream.view_id}));
  Image out = img;
  auto s = out.samples();
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double v = s[i];
    if (v == 0.0) continue;
    s[i] = std::clamp(v + v * cfg.sigma * rng.normal(i), 0.0, 1.0);
  }
  return out;
}

std::vector<double> standard_noise_sigmas() {
  std::vector<double> out;
  for (int k = 0; k <= 90; ++k) out.push_back((50.0 + 5.0 * k) / 1000.0);
  return out;
}

}  // namespace dpsynth
