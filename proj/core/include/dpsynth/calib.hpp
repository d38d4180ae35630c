#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "dpsynth/image.hpp"
#include "dpsynth/lensfx.hpp"
#include "dpsynth/psf.hpp"

namespace dpsynth {

/// Fixed first- and second-order derivative filters (3x3 each).
struct DerivativeSet {
  Kernel2D dx;   ///< [-1, 0, 1] / 2
  Kernel2D dy;
  Kernel2D dxx;  ///< [1, -2, 1]
  Kernel2D dyy;
  Kernel2D dxy;  ///< outer(dx, dy)

  static DerivativeSet standard();
  std::array<const Kernel2D*, 5> all() const noexcept { return {&dx, &dy, &dxx, &dyy, &dxy}; }
};

/// Regular grid of features centered in the frame.
struct GridPattern {
  int rows = 1;
  int cols = 1;
  double feature_size = 4.0;  ///< disk radius or square side, px
  double spacing = 16.0;      ///< center-to-center distance, px
  int width = 64;
  int height = 64;
  Point offset{0.0, 0.0};  ///< shift of the whole grid from the frame center, px
};

std::vector<Point> grid_centers(const GridPattern& pattern);

/// White anti-aliased disks on black. Throws InvalidArgument if the grid overflows the frame.
Image make_disk_pattern(const GridPattern& pattern);
/// White squares on black with exact area coverage at the boundary.
Image make_square_pattern(const GridPattern& pattern);

struct EstimateOptions {
  int kernel_size = 31;
  double l1_weight = 1e-3;  ///< relative to the largest initial data gradient
  int max_iters = 5000;
  double rel_tolerance = 1e-8;
};

struct PsfEstimate {
  Kernel2D kernel;
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> objective_history;  ///< one value per accepted iterate, starting at E = 0
};

/// Non-blind PSF estimation:
///   argmin_E ||S*E - B||^2 + sum_i ||D_i (S*E - B)||^2 + lambda ||E||_1,  E >= 0
/// by projected proximal gradient with momentum restart and backtracking; the objective
/// never increases between accepted iterates.
PsfEstimate estimate_psf(const Image& sharp, const Image& blurred, const EstimateOptions& options = {});

/// One sharp/blurred pair cut from a calibration capture.
struct CalibPatch {
  Image sharp;
  Image blurred;
};

/// Joint estimate over several patches sharing one PSF: the data terms are summed, so
/// every patch constrains the same kernel. Patches may differ in size.
PsfEstimate estimate_psf(std::span<const CalibPatch> patches, const EstimateOptions& options = {});

struct PsfSearchGrids {
  std::vector<int> orders;
  std::vector<double> alphas;
  std::vector<double> betas;
  std::vector<double> kappas;
  std::vector<double> radii;

  /// The 48 shapes of the generator bank (n 3/6/9, alpha .4-1, beta .1-.4, kappa .14).
  static PsfSearchGrids bank_grid(std::vector<double> radii);
  /// The coarse exploration space (n 1-15, alpha/beta .1-1, kappa .14-.42).
  static PsfSearchGrids full_space(std::vector<double> radii);
  std::size_t size() const noexcept {
    return orders.size() * alphas.size() * betas.size() * kappas.size() * radii.size();
  }
};

struct PsfFit {
  PsfParams params;
  double objective = 0.0;
  std::size_t evaluated = 0;
};

/// sum_i ||D_i (a - b)||^2 with both kernels centered on a common zero-padded canvas.
double psf_fit_objective(const Kernel2D& a, const Kernel2D& b);

/// Exhaustive search; ties go to the lexicographically smallest (n, alpha, beta, kappa, r).
PsfFit fit_psf_params(const Kernel2D& estimate, const PsfSearchGrids& grids, int jobs = 1);

struct DistortionGrids {
  std::vector<double> c1;
  std::vector<double> c2;
  std::vector<double> c3;
  std::size_t size() const noexcept { return c1.size() * c2.size() * c3.size(); }
};

struct DistortionFit {
  DistortionCoeffs coeffs;
  double score = 0.0;  ///< zero-mean NCC between the reference and the distorted pattern
  std::size_t evaluated = 0;
};

/// Maximizes ncc2d(reference, distort(pattern, c)) over the grid; ties go to the
/// lexicographically smallest (c1, c2, c3).
DistortionFit fit_distortion_coeffs(const Image& reference, const Image& pattern,
                                    const DistortionGrids& grids, int jobs = 1);

}  // namespace dpsynth
