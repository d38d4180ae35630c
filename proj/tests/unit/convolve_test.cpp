#include <gtest/gtest.h>

#include <vector>

#include "dpsynth/convolve.hpp"
#include "dpsynth/error.hpp"
#include "test_support.hpp"

using namespace dpsynth;

namespace {

// Naive same-size zero-padded convolution: out(p) = sum_k K(k) src(p - k).
Image naive(const Image& img, const Kernel2D& k) {
  Image out(img.width(), img.height(), img.channels());
  const int r = k.radius();
  for (int c = 0; c < img.channels(); ++c)
    for (int y = 0; y < img.height(); ++y)
      for (int x = 0; x < img.width(); ++x) {
        double acc = 0;
        for (int dy = -r; dy <= r; ++dy)
          for (int dx = -r; dx <= r; ++dx) {
            const int sx = x - dx, sy = y - dy;
            if (sx < 0 || sy < 0 || sx >= img.width() || sy >= img.height()) continue;
            acc += k.at_offset(dx, dy) * img.at(sx, sy, c);
          }
        out.at(x, y, c) = acc;
      }
  return out;
}

Kernel2D random_kernel(int side, unsigned seed) {
  const Image taps = dpsynth::testing::random_image(side, side, 1, seed, -0.2, 1.0);
  return Kernel2D(side, std::vector<double>(taps.samples().begin(), taps.samples().end()));
}

}  // namespace

TEST(Convolve, DirectMatchesNaive) {
  const Image img = dpsynth::testing::random_image(23, 17, 3, 1);
  const Kernel2D k = random_kernel(5, 2);
  EXPECT_LE(max_abs_diff(convolve(img, k, ConvMethod::Direct), naive(img, k)), 1e-12);
}

TEST(Convolve, FftMatchesNaive) {
  const Image img = dpsynth::testing::random_image(31, 20, 1, 3);
  const Kernel2D k = random_kernel(9, 4);
  EXPECT_LE(max_abs_diff(convolve(img, k, ConvMethod::Fft), naive(img, k)), 1e-10);
}

class DirectVsFft : public ::testing::TestWithParam<int> {};

TEST_P(DirectVsFft, AgreeWithin1e5) {
  const int side = GetParam();
  const Image img = dpsynth::testing::random_image(64, 48, 1, 7);
  const Kernel2D k = random_kernel(side, 8);
  EXPECT_LE(max_abs_diff(convolve(img, k, ConvMethod::Direct), convolve(img, k, ConvMethod::Fft)), 1e-5);
}

INSTANTIATE_TEST_SUITE_P(Sides, DirectVsFft, ::testing::Values(1, 3, 15, 17, 41, 63, 99));

TEST(Convolve, KernelLargerThanImage) {
  const Image img = dpsynth::testing::random_image(5, 4, 1, 9);
  const Kernel2D k = random_kernel(21, 10);
  EXPECT_LE(max_abs_diff(convolve(img, k, ConvMethod::Fft), naive(img, k)), 1e-10);
}

TEST(Convolve, ImpulseStampsKernelUnflipped) {
  Image img(9, 9, 1);
  img.at(4, 4) = 1.0;
  Kernel2D k(3, std::vector<double>{1, 2, 3, 4, 5, 6, 7, 8, 9});
  for (auto m : {ConvMethod::Direct, ConvMethod::Fft}) {
    const Image out = convolve(img, k, m);
    EXPECT_NEAR(out.at(3, 3), 1, 1e-12);
    EXPECT_NEAR(out.at(5, 3), 3, 1e-12);
    EXPECT_NEAR(out.at(3, 5), 7, 1e-12);
  }
}

TEST(Convolve, PlanesShareTransforms) {
  const Image a = dpsynth::testing::random_image(40, 30, 1, 11);
  const Image b = dpsynth::testing::random_image(40, 30, 1, 12);
  const Kernel2D k1 = random_kernel(21, 13), k2 = random_kernel(25, 14);
  const std::span<const double> planes[] = {a.samples(), b.samples()};
  const Kernel2D* kernels[] = {&k1, &k2};
  const auto out = convolve_planes(planes, 40, 30, kernels, ConvMethod::Fft);
  ASSERT_EQ(out.size(), 2u);
  const Image ref = naive(b, k2);
  for (std::size_t i = 0; i < ref.sample_count(); ++i) EXPECT_NEAR(out[1][1][i], ref.samples()[i], 1e-10);
}

TEST(Convolve, AutoThreshold) {
  EXPECT_EQ(resolve_method(ConvMethod::Auto, kDirectMaxKernelSide), ConvMethod::Direct);
  EXPECT_EQ(resolve_method(ConvMethod::Auto, kDirectMaxKernelSide + 2), ConvMethod::Fft);
  EXPECT_EQ(resolve_method(ConvMethod::Fft, 3), ConvMethod::Fft);
}

TEST(Convolve, FriendlySizes) {
  EXPECT_EQ(fft_friendly_size(1), 1);
  EXPECT_EQ(fft_friendly_size(11), 12);
  EXPECT_EQ(fft_friendly_size(97), 98);
  EXPECT_EQ(fft_friendly_size(121), 125);
}

TEST(Convolve, SizeMismatchThrows) {
  std::vector<double> src(10), dst(9);
  EXPECT_THROW(convolve_plane(src, 5, 2, Kernel2D::delta(), dst), InvalidArgument);
}
