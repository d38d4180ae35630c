#pragma once

#include <span>
#include <vector>

#include "dpsynth/image.hpp"

namespace dpsynth {

enum class ConvMethod { Auto, Direct, Fft };

/// Auto picks direct convolution up to this kernel side, FFT above it.
inline constexpr int kDirectMaxKernelSide = 11;

ConvMethod resolve_method(ConvMethod method, int kernel_side) noexcept;

/// Zero-padded 2D convolution of one plane, output the same size as the input:
/// out(p) = sum_k kernel(k) * src(p - k).
/// A white pixel on black therefore stamps the kernel itself, unflipped.
void convolve_plane(std::span<const double> src, int width, int height,
                    const Kernel2D& kernel, std::span<double> dst,
                    ConvMethod method = ConvMethod::Auto);

/// Convolves every plane with every kernel; result[k][p] is plane p under kernel k.
/// The FFT path shares one forward transform per plane across all kernels.
std::vector<std::vector<std::vector<double>>> convolve_planes(
    std::span<const std::span<const double>> planes, int width, int height,
    std::span<const Kernel2D* const> kernels, ConvMethod method = ConvMethod::Auto);

/// Channel-wise convolution of an image.
Image convolve(const Image& img, const Kernel2D& kernel, ConvMethod method = ConvMethod::Auto);

/// Smallest n >= minimum whose only prime factors are 2, 3, 5 and 7.
int fft_friendly_size(int minimum) noexcept;

}  // namespace dpsynth
