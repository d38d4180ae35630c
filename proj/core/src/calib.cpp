#include "dpsynth/calib.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <tuple>

#include "dpsynth/error.hpp"
#include "dpsynth/metrics.hpp"
#include "dpsynth/parallel.hpp"

namespace dpsynth {

namespace {

// Largest n x K system (pixels x kernel taps) estimate_psf will materialize.
constexpr std::size_t kMaxSystemEntries = std::size_t{64} << 20;
constexpr int kPowerIterations = 200;

Kernel2D kernel3(std::initializer_list<double> taps) { return Kernel2D(3, std::vector<double>(taps)); }

// Same-size convolution with zero padding; `transpose` applies the adjoint.
// Taps are visited in row-major order, so each output sums in a fixed order.
void apply3(const Kernel2D& d, const double* src, double* dst, int w, int h, bool transpose) {
  std::fill(dst, dst + static_cast<std::size_t>(w) * h, 0.0);
  for (int ty = -1; ty <= 1; ++ty) {
    for (int tx = -1; tx <= 1; ++tx) {
      const double k = d.at_offset(tx, ty);
      if (k == 0.0) continue;
      const int dx = transpose ? tx : -tx;
      const int dy = transpose ? ty : -ty;
      const int x0 = std::max(0, -dx), x1 = std::min(w, w - dx);
      for (int y = std::max(0, -dy); y < std::min(h, h - dy); ++y) {
        const double* s = src + static_cast<std::size_t>(y + dy) * w + dx;
        double* o = dst + static_cast<std::size_t>(y) * w;
        for (int x = x0; x < x1; ++x) o[x] += k * s[x];
      }
    }
  }
}

// Q v = v + sum_i D_i^T D_i v.
void apply_q(const DerivativeSet& ds, const double* src, double* dst, int w, int h, std::vector<double>& t1,
             std::vector<double>& t2) {
  const std::size_t n = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
  std::copy(src, src + n, dst);
  for (const Kernel2D* d : ds.all()) {
    apply3(*d, src, t1.data(), w, h, false);
    apply3(*d, t1.data(), t2.data(), w, h, true);
    for (std::size_t i = 0; i < n; ++i) dst[i] += t2[i];
  }
}

Image single_channel(const Image& img) { return img.channels() == 1 ? img : channel_mean(img); }

std::vector<double> tenths(int from, int to) {
  std::vector<double> out;
  for (int i = from; i <= to; ++i) out.push_back(i / 10.0);
  return out;
}

}  // namespace

DerivativeSet DerivativeSet::standard() {
  DerivativeSet s;
  // Taps in convolution order, so a unit ramp gives +1.
  s.dx = kernel3({0, 0, 0, 0.5, 0, -0.5, 0, 0, 0});
  s.dy = kernel3({0, 0.5, 0, 0, 0, 0, 0, -0.5, 0});
  s.dxx = kernel3({0, 0, 0, 1, -2, 1, 0, 0, 0});
  s.dyy = kernel3({0, 1, 0, 0, -2, 0, 0, 1, 0});
  s.dxy = Kernel2D(3);
  for (int y = 0; y < 3; ++y)
    for (int x = 0; x < 3; ++x) s.dxy.at(x, y) = s.dx.at(x, 1) * s.dy.at(1, y);
  return s;
}

std::vector<Point> grid_centers(const GridPattern& p) {
  if (p.rows < 1 || p.cols < 1) throw InvalidArgument("pattern grid must be at least 1x1");
  if (p.width < 1 || p.height < 1) throw InvalidArgument("pattern frame must be non-empty");
  if (!(p.feature_size > 0.0) || !(p.spacing > 0.0)) {
    throw InvalidArgument("pattern feature size and spacing must be positive");
  }
  const double cx = (p.width - 1) / 2.0 + p.offset.x;
  const double cy = (p.height - 1) / 2.0 + p.offset.y;
  std::vector<Point> out;
  for (int i = 0; i < p.rows; ++i)
    for (int j = 0; j < p.cols; ++j)
      out.push_back({cx + (j - (p.cols - 1) / 2.0) * p.spacing, cy + (i - (p.rows - 1) / 2.0) * p.spacing});
  return out;
}

namespace {

void check_fits(const GridPattern& p, double half_extent) {
  const auto centers = grid_centers(p);
  const Point& first = centers.front();
  const Point& last = centers.back();
  if (first.x - half_extent < -0.5 || first.y - half_extent < -0.5 || last.x + half_extent > p.width - 0.5 ||
      last.y + half_extent > p.height - 0.5) {
    throw InvalidArgument("pattern grid " + std::to_string(p.rows) + "x" + std::to_string(p.cols) +
                          " does not fit in a " + std::to_string(p.width) + "x" + std::to_string(p.height) +
                          " frame");
  }
}

double overlap(double a0, double a1, double b0, double b1) {
  return std::max(0.0, std::min(a1, b1) - std::max(a0, b0));
}

}  // namespace

Image make_disk_pattern(const GridPattern& p) {
  const double radius = p.feature_size;
  check_fits(p, radius);
  constexpr int kSub = 8;
  Image out(p.width, p.height, 1);
  for (const Point& c : grid_centers(p)) {
    const int x0 = std::max(0, static_cast<int>(std::floor(c.x - radius)));
    const int x1 = std::min(p.width - 1, static_cast<int>(std::ceil(c.x + radius)));
    const int y0 = std::max(0, static_cast<int>(std::floor(c.y - radius)));
    const int y1 = std::min(p.height - 1, static_cast<int>(std::ceil(c.y + radius)));
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        int inside = 0;
        for (int sy = 0; sy < kSub; ++sy)
          for (int sx = 0; sx < kSub; ++sx) {
            const double px = x - 0.5 + (sx + 0.5) / kSub - c.x;
            const double py = y - 0.5 + (sy + 0.5) / kSub - c.y;
            if (px * px + py * py <= radius * radius) ++inside;
          }
        out.at(x, y) = std::min(1.0, out.at(x, y) + static_cast<double>(inside) / (kSub * kSub));
      }
    }
  }
  return out;
}

Image make_square_pattern(const GridPattern& p) {
  const double half = p.feature_size / 2.0;
  check_fits(p, half);
  Image out(p.width, p.height, 1);
  for (const Point& c : grid_centers(p)) {
    const int x0 = std::max(0, static_cast<int>(std::floor(c.x - half)));
    const int x1 = std::min(p.width - 1, static_cast<int>(std::ceil(c.x + half)));
    const int y0 = std::max(0, static_cast<int>(std::floor(c.y - half)));
    const int y1 = std::min(p.height - 1, static_cast<int>(std::ceil(c.y + half)));
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) {
        const double a = overlap(x - 0.5, x + 0.5, c.x - half, c.x + half) *
                         overlap(y - 0.5, y + 0.5, c.y - half, c.y + half);
        out.at(x, y) = std::min(1.0, out.at(x, y) + a);
      }
  }
  return out;
}

namespace {

// Normal equations of one patch: G += U^T Q U, b += U^T Q B, c += B^T Q B.
void accumulate_patch(const Image& sharp_in, const Image& blurred_in, int ks, Eigen::MatrixXd& gram,
                      Eigen::VectorXd& b, double& c) {
  if (!sharp_in.same_size(blurred_in)) throw InvalidArgument("estimate_psf: sharp and blurred sizes differ");
  const Image sharp = single_channel(sharp_in);
  const Image blurred = single_channel(blurred_in);
  const int w = sharp.width();
  const int h = sharp.height();
  const int kr = ks / 2;
  const auto n = static_cast<Eigen::Index>(w) * h;
  const auto k = static_cast<Eigen::Index>(ks) * ks;
  if (static_cast<std::size_t>(n) * static_cast<std::size_t>(k) > kMaxSystemEntries) {
    throw InvalidArgument("estimate_psf: patch " + std::to_string(w) + "x" + std::to_string(h) +
                          " is too large for a " + std::to_string(ks) + " px kernel; crop it");
  }

  // Column j of U is the sharp patch shifted by kernel offset j, so U E = S * E.
  Eigen::MatrixXd u = Eigen::MatrixXd::Zero(n, k);
  for (int ky = 0; ky < ks; ++ky)
    for (int kx = 0; kx < ks; ++kx) {
      const int ox = kx - kr;
      const int oy = ky - kr;
      double* col = u.col(static_cast<Eigen::Index>(ky) * ks + kx).data();
      for (int y = std::max(0, oy); y < std::min(h, h + oy); ++y)
        for (int x = std::max(0, ox); x < std::min(w, w + ox); ++x)
          col[static_cast<std::size_t>(y) * w + x] = sharp.at(x - ox, y - oy);
    }

  const DerivativeSet ds = DerivativeSet::standard();
  std::vector<double> t1(static_cast<std::size_t>(n)), t2(static_cast<std::size_t>(n));
  Eigen::MatrixXd qu(n, k);
  for (Eigen::Index j = 0; j < k; ++j) apply_q(ds, u.col(j).data(), qu.col(j).data(), w, h, t1, t2);
  Eigen::MatrixXd g = qu.transpose() * u;
  gram += 0.5 * (g + g.transpose());
  qu.resize(0, 0);

  Eigen::VectorXd bvec(n);
  for (Eigen::Index i = 0; i < n; ++i) bvec[i] = blurred.samples()[static_cast<std::size_t>(i)];
  Eigen::VectorXd qb(n);
  apply_q(ds, bvec.data(), qb.data(), w, h, t1, t2);
  b += u.transpose() * qb;
  c += bvec.dot(qb);
}

}  // namespace

PsfEstimate estimate_psf(const Image& sharp, const Image& blurred, const EstimateOptions& opt) {
  const CalibPatch patch{sharp, blurred};
  return estimate_psf(std::span<const CalibPatch>(&patch, 1), opt);
}

PsfEstimate estimate_psf(std::span<const CalibPatch> patches, const EstimateOptions& opt) {
  if (patches.empty()) throw InvalidArgument("estimate_psf: no patches");
  if (opt.kernel_size < 1 || opt.kernel_size % 2 == 0) throw InvalidArgument("estimate_psf: kernel size must be odd");
  if (!(opt.l1_weight >= 0.0)) throw InvalidArgument("estimate_psf: l1 weight must be >= 0");
  if (opt.max_iters < 1) throw InvalidArgument("estimate_psf: max_iters must be >= 1");
  const int ks = opt.kernel_size;
  const auto k = static_cast<Eigen::Index>(ks) * ks;
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(k, k);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(k);
  double c = 0.0;
  for (const auto& p : patches) accumulate_patch(p.sharp, p.blurred, ks, gram, b, c);

  const double lambda = opt.l1_weight * std::max(0.0, 2.0 * b.maxCoeff());
  const auto objective = [&](const Eigen::VectorXd& e, const Eigen::VectorXd& ge) {
    return std::max(0.0, e.dot(ge) - 2.0 * b.dot(e) + c) + lambda * e.sum();
  };

  Eigen::VectorXd v = Eigen::VectorXd::Ones(k);
  double top = 0.0;
  for (int i = 0; i < kPowerIterations; ++i) {
    Eigen::VectorXd gv = gram * v;
    const double norm = gv.norm();
    if (norm == 0.0) break;
    top = norm / v.norm();
    v = gv / norm;
  }
  double lipschitz = std::max(2.0 * top * 1.01, std::numeric_limits<double>::min());

  PsfEstimate out;
  Eigen::VectorXd x = Eigen::VectorXd::Zero(k);
  Eigen::VectorXd gx = Eigen::VectorXd::Zero(k);
  Eigen::VectorXd y = x;
  Eigen::VectorXd gy = gx;
  double fx = objective(x, gx);
  double t = 1.0;
  bool momentum = false;
  out.objective_history.push_back(fx);
  int it = 0;
  while (it < opt.max_iters) {
    ++it;
    const Eigen::VectorXd step = y - (2.0 * (gy - b) + Eigen::VectorXd::Constant(k, lambda)) / lipschitz;
    const Eigen::VectorXd xn = step.cwiseMax(0.0);
    const Eigen::VectorXd gxn = gram * xn;
    const double fn = objective(xn, gxn);
    if (fn > fx) {
      if (momentum) {
        y = x;
        gy = gx;
        t = 1.0;
        momentum = false;
      } else {
        lipschitz *= 2.0;
      }
      continue;
    }
    const double rel = (fx - fn) / std::max(std::abs(fx), std::numeric_limits<double>::min());
    const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    const double beta = (t - 1.0) / tn;
    y = xn + beta * (xn - x);
    gy = gxn + beta * (gxn - gx);
    momentum = beta > 0.0;
    x = xn;
    gx = gxn;
    fx = fn;
    t = tn;
    out.objective_history.push_back(fx);
    if (rel < opt.rel_tolerance) {
      out.converged = true;
      break;
    }
  }
  out.iterations = it;
  out.objective = fx;
  out.kernel = Kernel2D(ks, std::vector<double>(x.data(), x.data() + k));
  return out;
}

PsfSearchGrids PsfSearchGrids::bank_grid(std::vector<double> radii) {
  return {{3, 6, 9}, {0.4, 0.6, 0.8, 1.0}, {0.1, 0.2, 0.3, 0.4}, {0.14}, std::move(radii)};
}

PsfSearchGrids PsfSearchGrids::full_space(std::vector<double> radii) {
  PsfSearchGrids g;
  for (int n = 1; n <= 15; ++n) g.orders.push_back(n);
  g.alphas = tenths(1, 10);
  g.betas = tenths(1, 10);
  for (int i = 2; i <= 6; ++i) g.kappas.push_back(i * 7 / 100.0);
  g.radii = std::move(radii);
  return g;
}

double psf_fit_objective(const Kernel2D& a, const Kernel2D& b) {
  // One extra ring so every derivative response is captured in full.
  const int side = std::max(a.size(), b.size()) + 2;
  const Kernel2D ea = a.embedded(side);
  const Kernel2D eb = b.embedded(side);
  std::vector<double> diff(ea.taps().size());
  for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = ea.taps()[i] - eb.taps()[i];
  std::vector<double> resp(diff.size());
  static const DerivativeSet ds = DerivativeSet::standard();
  double total = 0.0;
  for (const Kernel2D* d : ds.all()) {
    apply3(*d, diff.data(), resp.data(), side, side, false);
    for (double v : resp) total += v * v;
  }
  return total;
}

PsfFit fit_psf_params(const Kernel2D& estimate, const PsfSearchGrids& grids, int jobs) {
  if (grids.size() == 0) throw InvalidArgument("fit_psf_params: empty search grid");
  Kernel2D target = estimate;
  const double mass = target.sum();
  if (mass > 0.0)
    for (double& v : target.taps()) v /= mass;

  const std::size_t nr = grids.radii.size();
  const std::size_t nk = grids.kappas.size() * nr;
  const std::size_t nb = grids.betas.size() * nk;
  const std::size_t na = grids.alphas.size() * nb;
  const auto params_at = [&](std::size_t i) {
    return PsfParams(grids.orders[i / na], grids.alphas[i % na / nb], grids.betas[i % nb / nk],
                     grids.kappas[i % nk / nr], grids.radii[i % nr]);
  };
  std::vector<double> scores(grids.size());
  parallel_for(scores.size(), jobs, [&](std::size_t i) {
    const PsfParams p = params_at(i);
    p.validate();
    scores[i] = psf_fit_objective(target, make_combined_psf(p));
  });

  const auto key = [](const PsfParams& p) { return std::tuple(p.order, p.alpha, p.beta, p.kappa, p.radius_px); };
  PsfFit best;
  best.evaluated = scores.size();
  std::size_t winner = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (scores[i] < scores[winner] || (scores[i] == scores[winner] && key(params_at(i)) < key(params_at(winner)))) {
      winner = i;
    }
  }
  best.params = params_at(winner);
  best.objective = scores[winner];
  return best;
}

DistortionFit fit_distortion_coeffs(const Image& reference, const Image& pattern, const DistortionGrids& grids,
                                    int jobs) {
  if (!reference.same_shape(pattern)) throw InvalidArgument("fit_distortion_coeffs: image shapes differ");
  if (grids.size() == 0) throw InvalidArgument("fit_distortion_coeffs: empty coefficient grid");
  const std::size_t n3 = grids.c3.size();
  const std::size_t n2 = grids.c2.size() * n3;
  const auto coeffs_at = [&](std::size_t i) {
    return DistortionCoeffs{grids.c1[i / n2], grids.c2[i % n2 / n3], grids.c3[i % n3]};
  };
  std::vector<double> scores(grids.size());
  parallel_for(scores.size(), jobs,
               [&](std::size_t i) { scores[i] = ncc2d(reference, distort(pattern, coeffs_at(i))); });

  const auto key = [](const DistortionCoeffs& c) { return std::tuple(c.c1, c.c2, c.c3); };
  std::size_t winner = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (scores[i] > scores[winner] || (scores[i] == scores[winner] && key(coeffs_at(i)) < key(coeffs_at(winner)))) {
      winner = i;
    }
  }
  return {coeffs_at(winner), scores[winner], scores.size()};
}

}  // namespace dpsynth
