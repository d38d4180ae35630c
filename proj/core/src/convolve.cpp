#include "dpsynth/convolve.hpp"

#include <fftw3.h>

#include <algorithm>
#include <complex>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <utility>

#include "dpsynth/error.hpp"

namespace dpsynth {

namespace {

// FFTW planning is not thread-safe; execution with the new-array interface is.
// Plans are cached for the life of the process and shared by all threads.
struct FftPlans {
  fftw_plan forward = nullptr;
  fftw_plan inverse = nullptr;
};

struct FftwFree {
  void operator()(void* p) const noexcept { fftw_free(p); }
};
template <typename T>
using FftwBuffer = std::unique_ptr<T[], FftwFree>;

template <typename T>
FftwBuffer<T> fftw_buffer(std::size_t count) {
  auto* p = static_cast<T*>(fftw_malloc(sizeof(T) * count));
  if (!p) throw std::bad_alloc();
  return FftwBuffer<T>(p);
}

std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

FftPlans plans_for(int width, int height) {
  static std::map<std::pair<int, int>, FftPlans> cache;
  std::lock_guard lock(planner_mutex());
  auto it = cache.find({width, height});
  if (it != cache.end()) return it->second;
  const std::size_t real_count = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  const std::size_t complex_count =
      static_cast<std::size_t>(height) * static_cast<std::size_t>(width / 2 + 1);
  auto real = fftw_buffer<double>(real_count);
  auto spec = fftw_buffer<fftw_complex>(complex_count);
  FftPlans plans;
  plans.forward = fftw_plan_dft_r2c_2d(height, width, real.get(), spec.get(), FFTW_ESTIMATE);
  plans.inverse = fftw_plan_dft_c2r_2d(height, width, spec.get(), real.get(), FFTW_ESTIMATE);
  if (!plans.forward || !plans.inverse) throw Error("FFTW planning failed");
  cache.emplace(std::make_pair(width, height), plans);
  return plans;
}

void check_plane(std::span<const double> src, int width, int height) {
  if (width <= 0 || height <= 0 ||
      src.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
    throw InvalidArgument("plane size does not match " + std::to_string(width) + "x" +
                          std::to_string(height));
  }
}

// Scatter form: every nonzero input sample stamps the kernel. Zero samples are
// skipped, which makes sparse layer cutouts cheap.
void convolve_direct(std::span<const double> src, int width, int height, const Kernel2D& kernel,
                     std::span<double> dst) {
  std::fill(dst.begin(), dst.end(), 0.0);
  const int r = kernel.radius();
  const int size = kernel.size();
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double v = src[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) +
                           static_cast<std::size_t>(x)];
      if (v == 0.0) continue;
      const int ky0 = std::max(0, r - y);
      const int ky1 = std::min(size, height + r - y);
      const int kx0 = std::max(0, r - x);
      const int kx1 = std::min(size, width + r - x);
      for (int ky = ky0; ky < ky1; ++ky) {
        double* out = dst.data() +
                      static_cast<std::size_t>(y + ky - r) * static_cast<std::size_t>(width) +
                      static_cast<std::size_t>(x - r);
        for (int kx = kx0; kx < kx1; ++kx) out[kx] += v * kernel.at(kx, ky);
      }
    }
  }
}

struct FftGeometry {
  int width;
  int height;
  std::size_t real_count() const noexcept {
    return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  }
  std::size_t complex_count() const noexcept {
    return static_cast<std::size_t>(height) * static_cast<std::size_t>(width / 2 + 1);
  }
};

FftGeometry fft_geometry(int width, int height, int kernel_radius) {
  // Circular wrap must land in zero padding: need padded >= size + radius.
  return {fft_friendly_size(width + kernel_radius), fft_friendly_size(height + kernel_radius)};
}

FftwBuffer<fftw_complex> forward_plane(std::span<const double> src, int width, int height,
                                       const FftGeometry& g, const FftPlans& plans) {
  auto real = fftw_buffer<double>(g.real_count());
  std::fill_n(real.get(), g.real_count(), 0.0);
  for (int y = 0; y < height; ++y) {
    std::copy_n(src.data() + static_cast<std::size_t>(y) * static_cast<std::size_t>(width), width,
                real.get() + static_cast<std::size_t>(y) * static_cast<std::size_t>(g.width));
  }
  auto spec = fftw_buffer<fftw_complex>(g.complex_count());
  fftw_execute_dft_r2c(plans.forward, real.get(), spec.get());
  return spec;
}

FftwBuffer<fftw_complex> forward_kernel(const Kernel2D& kernel, const FftGeometry& g,
                                        const FftPlans& plans) {
  auto real = fftw_buffer<double>(g.real_count());
  std::fill_n(real.get(), g.real_count(), 0.0);
  const int r = kernel.radius();
  for (int ky = 0; ky < kernel.size(); ++ky) {
    const int py = ((ky - r) % g.height + g.height) % g.height;
    for (int kx = 0; kx < kernel.size(); ++kx) {
      const int px = ((kx - r) % g.width + g.width) % g.width;
      real[static_cast<std::size_t>(py) * static_cast<std::size_t>(g.width) +
           static_cast<std::size_t>(px)] += kernel.at(kx, ky);
    }
  }
  auto spec = fftw_buffer<fftw_complex>(g.complex_count());
  fftw_execute_dft_r2c(plans.forward, real.get(), spec.get());
  return spec;
}

void inverse_product(const fftw_complex* a, const fftw_complex* b, int width, int height,
                     const FftGeometry& g, const FftPlans& plans, std::span<double> dst) {
  auto spec = fftw_buffer<fftw_complex>(g.complex_count());
  for (std::size_t i = 0; i < g.complex_count(); ++i) {
    const double re = a[i][0] * b[i][0] - a[i][1] * b[i][1];
    const double im = a[i][0] * b[i][1] + a[i][1] * b[i][0];
    spec[i][0] = re;
    spec[i][1] = im;
  }
  auto real = fftw_buffer<double>(g.real_count());
  fftw_execute_dft_c2r(plans.inverse, spec.get(), real.get());
  const double norm = 1.0 / static_cast<double>(g.real_count());
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      dst[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) +
          static_cast<std::size_t>(x)] =
          real[static_cast<std::size_t>(y) * static_cast<std::size_t>(g.width) +
               static_cast<std::size_t>(x)] *
          norm;
    }
  }
}

}  // namespace

ConvMethod resolve_method(ConvMethod method, int kernel_side) noexcept {
  if (method != ConvMethod::Auto) return method;
  return kernel_side <= kDirectMaxKernelSide ? ConvMethod::Direct : ConvMethod::Fft;
}

int fft_friendly_size(int minimum) noexcept {
  for (int n = std::max(minimum, 1);; ++n) {
    int m = n;
    for (int p : {2, 3, 5, 7})
      while (m % p == 0) m /= p;
    if (m == 1) return n;
  }
}

void convolve_plane(std::span<const double> src, int width, int height, const Kernel2D& kernel,
                    std::span<double> dst, ConvMethod method) {
  check_plane(src, width, height);
  if (dst.size() != src.size()) throw InvalidArgument("destination plane size mismatch");
  if (resolve_method(method, kernel.size()) == ConvMethod::Direct) {
    convolve_direct(src, width, height, kernel, dst);
    return;
  }
  const FftGeometry g = fft_geometry(width, height, kernel.radius());
  const FftPlans plans = plans_for(g.width, g.height);
  auto plane = forward_plane(src, width, height, g, plans);
  auto kern = forward_kernel(kernel, g, plans);
  inverse_product(plane.get(), kern.get(), width, height, g, plans, dst);
}

std::vector<std::vector<std::vector<double>>> convolve_planes(
    std::span<const std::span<const double>> planes, int width, int height,
    std::span<const Kernel2D* const> kernels, ConvMethod method) {
  const std::size_t n = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  std::vector<std::vector<std::vector<double>>> out(
      kernels.size(), std::vector<std::vector<double>>(planes.size(), std::vector<double>(n)));
  if (kernels.empty() || planes.empty()) return out;
  for (auto plane : planes) check_plane(plane, width, height);

  int largest = 1;
  for (const Kernel2D* k : kernels) largest = std::max(largest, k->size());
  if (resolve_method(method, largest) == ConvMethod::Direct) {
    for (std::size_t k = 0; k < kernels.size(); ++k)
      for (std::size_t p = 0; p < planes.size(); ++p)
        convolve_direct(planes[p], width, height, *kernels[k], out[k][p]);
    return out;
  }
  const FftGeometry g = fft_geometry(width, height, (largest - 1) / 2);
  const FftPlans plans = plans_for(g.width, g.height);
  std::vector<FftwBuffer<fftw_complex>> plane_specs;
  plane_specs.reserve(planes.size());
  for (auto plane : planes) plane_specs.push_back(forward_plane(plane, width, height, g, plans));
  for (std::size_t k = 0; k < kernels.size(); ++k) {
    auto kern = forward_kernel(*kernels[k], g, plans);
    for (std::size_t p = 0; p < planes.size(); ++p)
      inverse_product(plane_specs[p].get(), kern.get(), width, height, g, plans, out[k][p]);
  }
  return out;
}

Image convolve(const Image& img, const Kernel2D& kernel, ConvMethod method) {
  const int ch = img.channels();
  std::vector<std::vector<double>> channels(static_cast<std::size_t>(ch),
                                            std::vector<double>(img.pixel_count()));
  for (std::size_t p = 0; p < img.pixel_count(); ++p)
    for (int c = 0; c < ch; ++c)
      channels[static_cast<std::size_t>(c)][p] = img.samples()[p * static_cast<std::size_t>(ch) +
                                                               static_cast<std::size_t>(c)];
  std::vector<std::span<const double>> views(channels.begin(), channels.end());
  const Kernel2D* kernels[] = {&kernel};
  auto result = convolve_planes(views, img.width(), img.height(), kernels, method);
  Image out(img.width(), img.height(), ch);
  for (std::size_t p = 0; p < img.pixel_count(); ++p)
    for (int c = 0; c < ch; ++c)
      out.samples()[p * static_cast<std::size_t>(ch) + static_cast<std::size_t>(c)] =
          result[0][static_cast<std::size_t>(c)][p];
  return out;
}

}  // namespace dpsynth
