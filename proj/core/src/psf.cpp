#include "dpsynth/psf.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "dpsynth/error.hpp"
#include "dpsynth/parallel.hpp"

namespace dpsynth {

void PsfParams::validate() const {
  if (order < 1) throw InvalidArgument("Butterworth order must be >= 1");
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw InvalidArgument("alpha must be > 0");
  if (!(beta > 0.0 && beta <= 1.0)) throw InvalidArgument("beta must be in (0, 1]");
  if (!(kappa > 0.0 && kappa < 1.0)) throw InvalidArgument("kappa must be in (0, 1)");
  if (!std::isfinite(radius_px)) throw InvalidArgument("radius must be finite");
}

std::string PsfParams::describe() const {
  std::ostringstream os;
  os << "n=" << order << " alpha=" << alpha << " beta=" << beta << " kappa=" << kappa
     << " r=" << radius_px;
  return os.str();
}

int psf_kernel_side(double radius_px, double kappa) noexcept {
  const double r = std::abs(radius_px);
  if (r < kInFocusRadiusPx) return 1;
  return 2 * static_cast<int>(std::ceil(r * (1.0 + 3.0 * kappa))) + 1;
}

Kernel2D butterworth_2d(int size, double cutoff_px, int order, double beta) {
  if (!(cutoff_px > 0.0)) throw InvalidArgument("Butterworth cutoff must be > 0");
  Kernel2D out(size);
  const int c = out.radius();
  const double two_n = 2.0 * order;
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double rho = std::hypot(static_cast<double>(x - c), static_cast<double>(y - c));
      // (1 + (D_o / rho)^2n)^-1 tends to 0 at the center and saturates at 1 far out.
      const double raw = rho == 0.0 ? 0.0 : 1.0 / (1.0 + std::pow(cutoff_px / rho, two_n));
      out.at(x, y) = beta + (1.0 - beta) * raw;
    }
  }
  return out;
}

Kernel2D disk_coverage(int size, double radius_px) {
  constexpr int kSub = 4;
  Kernel2D out(size);
  const int c = out.radius();
  const double r2 = radius_px * radius_px;
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      int inside = 0;
      for (int sy = 0; sy < kSub; ++sy) {
        const double py = (y - c) + (sy + 0.5) / kSub - 0.5;
        for (int sx = 0; sx < kSub; ++sx) {
          const double px = (x - c) + (sx + 0.5) / kSub - 0.5;
          if (px * px + py * py <= r2) ++inside;
        }
      }
      out.at(x, y) = static_cast<double>(inside) / (kSub * kSub);
    }
  }
  return out;
}

Kernel2D uniform_disk_psf(double radius_px, int size) {
  Kernel2D disk = disk_coverage(size, std::abs(radius_px));
  const double mass = disk.sum();
  if (mass <= 0.0) return Kernel2D::delta().embedded(size);
  for (double& t : disk.taps()) t /= mass;
  return disk;
}

Kernel2D gaussian_smooth(const Kernel2D& kernel, double sigma) {
  if (!(sigma > 0.0)) return kernel;
  const int half = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> g(static_cast<std::size_t>(2 * half + 1));
  double total = 0.0;
  for (int i = -half; i <= half; ++i) {
    const double w = std::exp(-0.5 * (i * i) / (sigma * sigma));
    g[static_cast<std::size_t>(i + half)] = w;
    total += w;
  }
  for (double& w : g) w /= total;

  const int n = kernel.size();
  Kernel2D rows(n);
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      double acc = 0.0;
      for (int i = -half; i <= half; ++i) {
        const int sx = x - i;
        if (sx >= 0 && sx < n) acc += g[static_cast<std::size_t>(i + half)] * kernel.at(sx, y);
      }
      rows.at(x, y) = acc;
    }
  }
  Kernel2D out(n);
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      double acc = 0.0;
      for (int i = -half; i <= half; ++i) {
        const int sy = y - i;
        if (sy >= 0 && sy < n) acc += g[static_cast<std::size_t>(i + half)] * rows.at(x, sy);
      }
      out.at(x, y) = acc;
    }
  }
  return out;
}

Kernel2D make_combined_psf(const PsfParams& params) {
  params.validate();
  const double r = std::abs(params.radius_px);
  if (r < kInFocusRadiusPx) return Kernel2D::delta();

  const int side = psf_kernel_side(r, params.kappa);
  const Kernel2D depletion = butterworth_2d(side, params.alpha * r, params.order, params.beta);
  Kernel2D h = disk_coverage(side, r);
  for (std::size_t i = 0; i < h.taps().size(); ++i) h.taps()[i] *= depletion.taps()[i];
  h = gaussian_smooth(h, params.kappa * r);

  // Every factor is radially symmetric; enforce the horizontal mirror bit-exactly so
  // the left/right split sums back to H without drift from summation order.
  const Kernel2D mirrored = h.flipped_horizontal();
  for (std::size_t i = 0; i < h.taps().size(); ++i)
    h.taps()[i] = 0.5 * (h.taps()[i] + mirrored.taps()[i]);
  const double mass = h.sum();
  for (double& t : h.taps()) t /= mass;
  return h;
}

Kernel2D ramp_mask(int size, FocusSide side) {
  Kernel2D m(size, 0.5);
  const int c = m.radius();
  if (c == 0) return m;
  const double span = 2.0 * c;
  for (int d = 1; d <= c; ++d) {
    const double low = std::clamp(0.5 - d / span, 0.0, 1.0);
    const double high = 1.0 - low;  // low + (1 - low) rounds to exactly 1
    const int falling = side == FocusSide::Front ? c + d : c - d;
    const int rising = side == FocusSide::Front ? c - d : c + d;
    for (int y = 0; y < size; ++y) {
      m.at(falling, y) = low;
      m.at(rising, y) = high;
    }
  }
  return m;
}

DpPsf split_dp_psf(const PsfParams& params) {
  DpPsf psf;
  psf.params = params;
  psf.combined = make_combined_psf(params);
  if (psf.combined.size() == 1) {
    psf.left = Kernel2D::delta(0.5);
    psf.right = Kernel2D::delta(0.5);
    return psf;
  }
  const Kernel2D mask = ramp_mask(psf.combined.size(), focus_side(params.radius_px));
  psf.left = psf.combined;
  for (std::size_t i = 0; i < psf.left.taps().size(); ++i) psf.left.taps()[i] *= mask.taps()[i];
  psf.right = psf.left.flipped_horizontal();
  return psf;
}

std::vector<std::string> dp_psf_violations(const DpPsf& psf, const DpPsfTolerances& tol) {
  std::vector<std::string> issues;
  const auto note = [&](const std::string& what) {
    issues.push_back(psf.params.describe() + ": " + what);
  };
  if (psf.left.size() != psf.right.size() || psf.left.size() != psf.combined.size()) {
    note("kernel sides differ");
    return issues;
  }
  if (std::abs(psf.left.sum() - 0.5) > tol.half_mass) note("sum(left) != 0.5");
  if (std::abs(psf.right.sum() - 0.5) > tol.half_mass) note("sum(right) != 0.5");
  if (std::abs(psf.combined.sum() - 1.0) > tol.half_mass) note("sum(combined) != 1");
  const Kernel2D flipped = psf.left.flipped_horizontal();
  double mirror_err = 0.0;
  double sum_err = 0.0;
  bool negative = false;
  for (std::size_t i = 0; i < psf.left.taps().size(); ++i) {
    const double l = psf.left.taps()[i];
    const double r = psf.right.taps()[i];
    const double h = psf.combined.taps()[i];
    negative = negative || l < 0.0 || r < 0.0 || h < 0.0;
    mirror_err = std::max(mirror_err, std::abs(r - flipped.taps()[i]));
    sum_err = std::max(sum_err, std::abs(l + r - h));
  }
  if (negative) note("negative tap");
  if (mirror_err > tol.mirror) note("right != mirror(left)");
  if (sum_err > tol.sum_identity) note("left + right != combined");
  return issues;
}

PsfGrids PsfGrids::bank_defaults(std::vector<double> radii) {
  PsfGrids g;
  g.orders = {3, 6, 9};
  g.alphas = {0.4, 0.6, 0.8, 1.0};
  g.betas = {0.1, 0.2, 0.3, 0.4};
  g.kappa = 0.14;
  g.radii = std::move(radii);
  return g;
}

std::vector<PsfShape> PsfGrids::shapes() const {
  std::vector<PsfShape> out;
  for (int n : orders)
    for (double a : alphas)
      for (double b : betas) out.push_back({n, a, b});
  return out;
}

int quantize_radius(double radius_px) noexcept {
  return static_cast<int>(std::lround(radius_px * 2.0));
}

double dequantize_radius(int key) noexcept { return key * 0.5; }

PsfBank PsfBank::build(const PsfGrids& grids, int jobs) {
  PsfBank bank(grids.kappa);
  std::vector<int> keys;
  for (double r : grids.radii) {
    const int key = quantize_radius(r);
    if (std::find(keys.begin(), keys.end(), key) != keys.end()) {
      throw InvalidArgument("radius grid has two entries quantizing to " +
                            std::to_string(dequantize_radius(key)) + " px");
    }
    keys.push_back(key);
  }
  const auto shapes = grids.shapes();
  std::vector<DpPsf> built(shapes.size() * keys.size());
  parallel_for(built.size(), jobs, [&](std::size_t i) {
    const PsfShape& shape = shapes[i / keys.size()];
    const double r = dequantize_radius(keys[i % keys.size()]);
    built[i] = split_dp_psf(PsfParams(shape, grids.kappa, r));
  });
  for (auto& psf : built) bank.insert(std::move(psf));
  return bank;
}

const DpPsf* PsfBank::find(const PsfShape& shape, double radius_px) const {
  auto it = entries_.find({shape, quantize_radius(radius_px)});
  return it == entries_.end() ? nullptr : &it->second;
}

void PsfBank::insert(DpPsf psf) {
  Key key{psf.params.shape(), quantize_radius(psf.params.radius_px)};
  entries_.insert_or_assign(key, std::move(psf));
}

DpPsf select_dp_psf(const PsfShape& shape, double kappa, double radius_px, const PsfBank* bank) {
  if (std::abs(radius_px) < kInFocusRadiusPx) {
    return split_dp_psf(PsfParams(shape, kappa, radius_px));
  }
  const double snapped = dequantize_radius(quantize_radius(radius_px));
  if (bank) {
    if (const DpPsf* hit = bank->find(shape, snapped)) return *hit;
  }
  return split_dp_psf(PsfParams(shape, kappa, snapped));
}

}  // namespace dpsynth
