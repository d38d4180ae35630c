#include "dpsynth/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dpsynth/error.hpp"

namespace dpsynth {

namespace {

void require_same_shape(const Image& a, const Image& b, const char* what) {
  if (!a.same_shape(b)) {
    throw InvalidArgument(std::string(what) + ": shape mismatch (" + std::to_string(a.width()) + "x" +
                          std::to_string(a.height()) + "x" + std::to_string(a.channels()) + " vs " +
                          std::to_string(b.width()) + "x" + std::to_string(b.height()) + "x" +
                          std::to_string(b.channels()) + ")");
  }
}

std::vector<double> binomial_row(int length) {
  std::vector<double> row{1.0};
  for (int i = 1; i < length; ++i) {
    std::vector<double> next(row.size() + 1, 0.0);
    for (std::size_t k = 0; k < row.size(); ++k) {
      next[k] += row[k];
      next[k + 1] += row[k];
    }
    row = std::move(next);
  }
  return row;
}

constexpr int kSsimWindow = 11;
constexpr double kSsimSigma = 1.5;
constexpr double kSsimC1 = 0.01 * 0.01;
constexpr double kSsimC2 = 0.03 * 0.03;

// Valid-mode separable filtering with a symmetric 1D window.
std::vector<double> filter_valid(const std::vector<double>& src, int w, int h, const std::vector<double>& win) {
  const int n = static_cast<int>(win.size());
  const int ow = w - n + 1;
  const int oh = h - n + 1;
  std::vector<double> tmp(static_cast<std::size_t>(ow) * static_cast<std::size_t>(h));
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int k = 0; k < n; ++k) s += win[static_cast<std::size_t>(k)] * src[static_cast<std::size_t>(y) * w + x + k];
      tmp[static_cast<std::size_t>(y) * ow + x] = s;
    }
  std::vector<double> out(static_cast<std::size_t>(ow) * static_cast<std::size_t>(oh));
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int k = 0; k < n; ++k) s += win[static_cast<std::size_t>(k)] * tmp[static_cast<std::size_t>(y + k) * ow + x];
      out[static_cast<std::size_t>(y) * ow + x] = s;
    }
  return out;
}

// Derivative response on the rectangle [m, w-m) x [m, h-m) of one channel. Taps are
// antisymmetric along the derivative axis, so mirrored samples are differenced first;
// constant input yields exactly zero.
std::vector<double> edge_response(const Image& img, int channel, const Kernel2D& k, bool along_x, int margin) {
  const int r = k.radius();
  const int ow = img.width() - 2 * margin;
  const int oh = img.height() - 2 * margin;
  std::vector<double> out(static_cast<std::size_t>(ow) * static_cast<std::size_t>(oh), 0.0);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      const int px = x + margin;
      const int py = y + margin;
      double acc = 0.0;
      for (int j = -r; j <= r; ++j) {
        double line = 0.0;
        for (int i = 1; i <= r; ++i) {
          if (along_x) {
            line += k.at_offset(i, j) * (img.at(px - i, py - j, channel) - img.at(px + i, py - j, channel));
          } else {
            line += k.at_offset(j, i) * (img.at(px - j, py - i, channel) - img.at(px - j, py + i, channel));
          }
        }
        acc += line;
      }
      out[static_cast<std::size_t>(y) * ow + x] = acc;
    }
  }
  return out;
}

double mean_sq_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return a.empty() ? 0.0 : s / static_cast<double>(a.size());
}

}  // namespace

double mse(const Image& a, const Image& b) {
  require_same_shape(a, b, "mse");
  const auto sa = a.samples();
  const auto sb = b.samples();
  if (sa.empty()) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < sa.size(); ++i) s += (sa[i] - sb[i]) * (sa[i] - sb[i]);
  return s / static_cast<double>(sa.size());
}

double psnr(const Image& a, const Image& b, double cap_db) {
  const double m = mse(a, b);
  if (m == 0.0) return cap_db;
  return std::min(cap_db, 10.0 * std::log10(1.0 / m));
}

double mae(const Image& a, const Image& b) {
  require_same_shape(a, b, "mae");
  const auto sa = a.samples();
  const auto sb = b.samples();
  if (sa.empty()) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < sa.size(); ++i) s += std::abs(sa[i] - sb[i]);
  return s / static_cast<double>(sa.size());
}

double ssim(const Image& a, const Image& b) {
  require_same_shape(a, b, "ssim");
  if (a.width() < kSsimWindow || a.height() < kSsimWindow) {
    throw InvalidArgument("ssim: image must be at least 11x11");
  }
  std::vector<double> win(kSsimWindow);
  double total = 0.0;
  for (int i = 0; i < kSsimWindow; ++i) {
    const double d = i - kSsimWindow / 2;
    win[static_cast<std::size_t>(i)] = std::exp(-d * d / (2.0 * kSsimSigma * kSsimSigma));
    total += win[static_cast<std::size_t>(i)];
  }
  for (double& v : win) v /= total;

  const Image ga = channel_mean(a);
  const Image gb = channel_mean(b);
  const std::vector<double> x(ga.samples().begin(), ga.samples().end());
  const std::vector<double> y(gb.samples().begin(), gb.samples().end());
  std::vector<double> xx(x.size()), yy(x.size()), xy(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    xx[i] = x[i] * x[i];
    yy[i] = y[i] * y[i];
    xy[i] = x[i] * y[i];
  }
  const int w = a.width();
  const int h = a.height();
  const auto mx = filter_valid(x, w, h, win);
  const auto my = filter_valid(y, w, h, win);
  const auto sxx = filter_valid(xx, w, h, win);
  const auto syy = filter_valid(yy, w, h, win);
  const auto sxy = filter_valid(xy, w, h, win);
  double acc = 0.0;
  for (std::size_t i = 0; i < mx.size(); ++i) {
    const double vx = sxx[i] - mx[i] * mx[i];
    const double vy = syy[i] - my[i] * my[i];
    const double cxy = sxy[i] - mx[i] * my[i];
    acc += ((2.0 * mx[i] * my[i] + kSsimC1) * (2.0 * cxy + kSsimC2)) /
           ((mx[i] * mx[i] + my[i] * my[i] + kSsimC1) * (vx + vy + kSsimC2));
  }
  return acc / static_cast<double>(mx.size());
}

double ncc2d(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw InvalidArgument("ncc2d: size mismatch");
  if (a.empty()) throw InvalidArgument("ncc2d: empty input");
  const auto [amin, amax] = std::minmax_element(a.begin(), a.end());
  const auto [bmin, bmax] = std::minmax_element(b.begin(), b.end());
  const bool a_const = *amin == *amax;
  const bool b_const = *bmin == *bmax;
  if (a_const || b_const) return (a_const && b_const && *amin == *bmin) ? 1.0 : 0.0;

  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double num = 0.0, va = 0.0, vb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    num += da * db;
    va += da * da;
    vb += db * db;
  }
  if (va == 0.0 || vb == 0.0) return 0.0;
  return std::clamp(num / std::sqrt(va * vb), -1.0, 1.0);
}

double ncc2d(const Image& a, const Image& b) {
  require_same_shape(a, b, "ncc2d");
  return ncc2d(a.samples(), b.samples());
}

double ncc2d(const Kernel2D& a, const Kernel2D& b) {
  const int side = std::max(a.size(), b.size());
  const Kernel2D ea = a.embedded(side);
  const Kernel2D eb = b.embedded(side);
  return ncc2d(ea.taps(), eb.taps());
}

void EdgeLossConfig::validate() const {
  if (scales.empty()) throw InvalidArgument("edge loss: at least one scale is required");
  for (int m : scales) {
    if (m < 3 || m % 2 == 0) throw InvalidArgument("edge loss: scales must be odd and >= 3, got " + std::to_string(m));
  }
  if (!(lambda_x >= 0.0) || !(lambda_y >= 0.0)) throw InvalidArgument("edge loss: weights must be >= 0");
}

std::pair<Kernel2D, Kernel2D> sobel_kernels(int size) {
  if (size < 3 || size % 2 == 0) throw InvalidArgument("sobel size must be odd and >= 3");
  const auto smooth = binomial_row(size);
  const auto base = binomial_row(size - 2);
  std::vector<double> deriv(static_cast<std::size_t>(size), 0.0);
  for (std::size_t k = 0; k < base.size(); ++k) {
    deriv[k] -= base[k];
    deriv[k + 2] += base[k];
  }
  const int r = size / 2;
  // Convolution of a unit ramp: -sum_k k d(k) * sum s.
  double slope = 0.0, mass = 0.0;
  for (int i = 0; i < size; ++i) {
    slope -= (i - r) * deriv[static_cast<std::size_t>(i)];
    mass += smooth[static_cast<std::size_t>(i)];
  }
  const double norm = slope * mass;
  Kernel2D kx(size), ky(size);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      kx.at(x, y) = deriv[static_cast<std::size_t>(x)] * smooth[static_cast<std::size_t>(y)] / norm;
      ky.at(x, y) = smooth[static_cast<std::size_t>(x)] * deriv[static_cast<std::size_t>(y)] / norm;
    }
  return {kx, ky};
}

EdgeLoss edge_loss(const Image& out, const Image& gt, const EdgeLossConfig& cfg) {
  require_same_shape(out, gt, "edge_loss");
  cfg.validate();
  const int margin = *std::max_element(cfg.scales.begin(), cfg.scales.end()) / 2;
  if (out.width() <= 2 * margin || out.height() <= 2 * margin) {
    throw InvalidArgument("edge_loss: image too small for the largest Sobel scale");
  }
  EdgeLoss loss;
  loss.mse = mse(out, gt);
  for (int m : cfg.scales) {
    const auto [kx, ky] = sobel_kernels(m);
    double lx = 0.0, ly = 0.0;
    for (int c = 0; c < out.channels(); ++c) {
      lx += mean_sq_diff(edge_response(out, c, kx, true, margin), edge_response(gt, c, kx, true, margin));
      ly += mean_sq_diff(edge_response(out, c, ky, false, margin), edge_response(gt, c, ky, false, margin));
    }
    loss.x += lx / out.channels();
    loss.y += ly / out.channels();
  }
  loss.x /= static_cast<double>(cfg.scales.size());
  loss.y /= static_cast<double>(cfg.scales.size());
  loss.total = loss.mse + cfg.lambda_x * loss.x + cfg.lambda_y * loss.y;
  return loss;
}

}  // namespace dpsynth
