#pragma once

#include <span>
#include <utility>
#include <vector>

#include "dpsynth/image.hpp"

namespace dpsynth {

inline constexpr double kPsnrCapDb = 100.0;

/// 10 log10(1 / MSE) over all samples; `cap_db` for identical images.
double psnr(const Image& a, const Image& b, double cap_db = kPsnrCapDb);
double mae(const Image& a, const Image& b);
double mse(const Image& a, const Image& b);

/// Mean SSIM over valid 11x11 Gaussian (sigma 1.5) windows of the channel-mean images,
/// C1 = 0.01^2, C2 = 0.03^2. Throws InvalidArgument when smaller than the window.
double ssim(const Image& a, const Image& b);

/// Zero-mean normalized cross-correlation at zero lag. Constant inputs score 1 when
/// both are constant and equal, 0 otherwise.
double ncc2d(std::span<const double> a, std::span<const double> b);
double ncc2d(const Image& a, const Image& b);
/// Kernels of different sides are compared on a common centered canvas.
double ncc2d(const Kernel2D& a, const Kernel2D& b);

struct EdgeLossConfig {
  std::vector<int> scales{3, 7, 11};
  double lambda_x = 0.03;
  double lambda_y = 0.02;

  void validate() const;
};

struct EdgeLoss {
  double total = 0.0;
  double mse = 0.0;
  double x = 0.0;
  double y = 0.0;
};

/// Extended Sobel pair (x-derivative, y-derivative) of odd side m >= 3: binomial
/// smoothing across the gradient and a binomial-smoothed central difference along it,
/// scaled so a unit ramp yields gradient 1.
std::pair<Kernel2D, Kernel2D> sobel_kernels(int size);

/// L = MSE + lambda_x L_x + lambda_y L_y, where L_x / L_y average over scales the MSE
/// between Sobel responses of both images. Responses are compared on the valid region
/// (where the largest kernel fits) so padding never contributes.
EdgeLoss edge_loss(const Image& out, const Image& gt, const EdgeLossConfig& cfg = {});

}  // namespace dpsynth
