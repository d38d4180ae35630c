#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "dpsynth/image.hpp"

namespace dpsynth {

/// Radii below this are in focus and use a delta PSF.
inline constexpr double kInFocusRadiusPx = 0.5;

/// Lens character independent of defocus: Butterworth order, cutoff scale and depletion floor.
struct PsfShape {
  int order = 3;
  double alpha = 0.8;
  double beta = 0.2;

  friend auto operator<=>(const PsfShape&, const PsfShape&) = default;
};

struct PsfParams {
  int order = 3;        ///< Butterworth order n >= 1
  double alpha = 0.8;   ///< cutoff D_o = alpha * |r|
  double beta = 0.2;    ///< center depletion floor, (0, 1]
  double kappa = 0.14;  ///< Gaussian smoothing sigma = kappa * |r|
  double radius_px = 0.0;  ///< signed CoC radius; > 0 front focus, < 0 back focus

  PsfParams() = default;
  PsfParams(int n, double a, double b, double k, double r)
      : order(n), alpha(a), beta(b), kappa(k), radius_px(r) {}
  PsfParams(const PsfShape& shape, double k, double r)
      : order(shape.order), alpha(shape.alpha), beta(shape.beta), kappa(k), radius_px(r) {}

  PsfShape shape() const noexcept { return {order, alpha, beta}; }
  /// Throws InvalidArgument.
  void validate() const;
  std::string describe() const;
};

/// Left/right dual-pixel kernels; combined = left + right, right = mirror(left).
struct DpPsf {
  Kernel2D left;
  Kernel2D right;
  Kernel2D combined;
  PsfParams params;
};

/// Kernel side 2 ceil(|r| (1 + 3 kappa)) + 1, or 1 when in focus.
int psf_kernel_side(double radius_px, double kappa) noexcept;

/// Butterworth profile rescaled to [beta, 1]; beta at the center, midpoint at distance D_o.
Kernel2D butterworth_2d(int size, double cutoff_px, int order, double beta);

/// Anti-aliased disk coverage (4x4 supersampling), values in [0, 1], unnormalized.
Kernel2D disk_coverage(int size, double radius_px);

/// Uniform disk normalized to unit mass.
Kernel2D uniform_disk_psf(double radius_px, int size);

/// Same-size zero-padded Gaussian blur, truncated at 3 sigma and renormalized.
Kernel2D gaussian_smooth(const Kernel2D& kernel, double sigma);

/// Combined PSF H = normalize(gauss(B o C)); a 1x1 delta when |r| < 0.5 px.
Kernel2D make_combined_psf(const PsfParams& params);

enum class FocusSide { Front, Back };

inline FocusSide focus_side(double signed_radius) noexcept {
  return signed_radius >= 0.0 ? FocusSide::Front : FocusSide::Back;
}

/// Horizontal ramp clamp(0.5 - sgn (x - x_o) / (2 r_eff), 0, 1), r_eff = (size - 1) / 2.
/// Front focus falls off to the right. M + mirror(M) == 1 holds exactly.
Kernel2D ramp_mask(int size, FocusSide side);

/// Splits the combined PSF into its dual-pixel halves.
DpPsf split_dp_psf(const PsfParams& params);

struct DpPsfTolerances {
  double half_mass = 1e-6;
  double mirror = 1e-12;
  double sum_identity = 1e-9;
};

/// Empty when the PSF satisfies its invariants, otherwise one message per violation.
std::vector<std::string> dp_psf_violations(const DpPsf& psf, const DpPsfTolerances& tol = {});

struct PsfGrids {
  std::vector<int> orders;
  std::vector<double> alphas;
  std::vector<double> betas;
  double kappa = 0.14;
  std::vector<double> radii;  ///< signed, px

  /// n in {3,6,9}, alpha in {0.4,0.6,0.8,1.0}, beta in {0.1,...,0.4}, kappa = 0.14.
  static PsfGrids bank_defaults(std::vector<double> radii = {});
  std::vector<PsfShape> shapes() const;
  std::size_t entry_count() const noexcept {
    return orders.size() * alphas.size() * betas.size() * radii.size();
  }
};

/// Radius quantization used as a bank key: 0.5 px steps.
int quantize_radius(double radius_px) noexcept;
double dequantize_radius(int key) noexcept;

/// Precomputed dual-pixel PSFs keyed by (shape, quantized signed radius).
class PsfBank {
 public:
  PsfBank() = default;
  explicit PsfBank(double kappa) : kappa_(kappa) {}

  /// One entry per grid point; throws InvalidArgument if two radii share a key.
  static PsfBank build(const PsfGrids& grids, int jobs = 1);

  double kappa() const noexcept { return kappa_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }

  /// Exact lookup on the quantized key; nullptr if absent.
  const DpPsf* find(const PsfShape& shape, double radius_px) const;
  void insert(DpPsf psf);

  template <typename Fn>
  void for_each(Fn&& fn) const {
    for (const auto& [key, psf] : entries_) fn(psf);
  }

 private:
  using Key = std::tuple<PsfShape, int>;
  double kappa_ = 0.14;
  std::map<Key, DpPsf> entries_;
};

/// PSF for a layer radius: delta halves when in focus, otherwise the bank entry at the
/// quantized radius, computed on the fly when the bank lacks it.
DpPsf select_dp_psf(const PsfShape& shape, double kappa, double radius_px, const PsfBank* bank);

}  // namespace dpsynth
