#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "dpsynth/error.hpp"
#include "dpsynth/psf.hpp"

using namespace dpsynth;

TEST(KernelSide, Formula) {
  EXPECT_EQ(psf_kernel_side(10, 0.14), 31);  // 2 ceil(14.2) + 1
  EXPECT_EQ(psf_kernel_side(-10, 0.14), 31);
  EXPECT_EQ(psf_kernel_side(0.49, 0.14), 1);
  EXPECT_EQ(psf_kernel_side(2, 0.14), 7);  // 2 ceil(2.84) + 1
}

TEST(Butterworth, CenterMidpointAndTail) {
  const double beta = 0.2;
  const Kernel2D b = butterworth_2d(21, 5.0, 3, beta);
  EXPECT_DOUBLE_EQ(b.at_offset(0, 0), beta);
  EXPECT_NEAR(b.at_offset(5, 0), (1.0 + beta) / 2.0, 1e-12);
  EXPECT_NEAR(b.at_offset(0, -5), (1.0 + beta) / 2.0, 1e-12);
  const Kernel2D tail = butterworth_2d(21, 1.0, 3, beta);
  EXPECT_NEAR(tail.at_offset(10, 0), 1.0, 1e-6);
  for (double t : b.taps()) {
    EXPECT_GE(t, beta);
    EXPECT_LE(t, 1.0);
  }
}

TEST(DiskCoverage, AreaAndRange) {
  const Kernel2D d = disk_coverage(41, 12.3);
  EXPECT_NEAR(d.sum(), M_PI * 12.3 * 12.3, 0.01 * M_PI * 12.3 * 12.3);
  EXPECT_EQ(d.at_offset(0, 0), 1.0);
  EXPECT_EQ(d.at_offset(20, 20), 0.0);
}

TEST(GaussianSmooth, PreservesInteriorMass) {
  Kernel2D k(21);
  k.at(10, 10) = 1.0;
  const Kernel2D g = gaussian_smooth(k, 1.5);
  EXPECT_NEAR(g.sum(), 1.0, 1e-12);
  EXPECT_GT(g.at_offset(0, 0), g.at_offset(1, 0));
  EXPECT_NEAR(g.at_offset(2, 1), g.at_offset(-1, -2), 1e-15);
}

TEST(CombinedPsf, InFocusIsDelta) {
  const Kernel2D h = make_combined_psf({3, 0.8, 0.2, 0.14, 0.3});
  EXPECT_EQ(h.size(), 1);
  EXPECT_EQ(h.at(0, 0), 1.0);
}

TEST(CombinedPsf, DonutOrderingAndMass) {
  const Kernel2D h = make_combined_psf({3, 0.8, 0.2, 0.14, 10});
  EXPECT_LT(h.at_offset(0, 0), h.max());
  EXPECT_NEAR(h.sum(), 1.0, 1e-6);
  for (double t : h.taps()) EXPECT_GE(t, 0.0);
  EXPECT_EQ(h, h.flipped_horizontal());
}

TEST(CombinedPsf, FlatFloorApproachesUniformDisk) {
  const PsfParams p(15, 1.0, 1.0, 1e-3, 8.0);
  const Kernel2D h = make_combined_psf(p);
  const Kernel2D disk = uniform_disk_psf(8.0, h.size());
  for (std::size_t i = 0; i < h.taps().size(); ++i) EXPECT_NEAR(h.taps()[i], disk.taps()[i], 1e-4);
}

TEST(CombinedPsf, RejectsBadParams) {
  EXPECT_THROW(make_combined_psf({0, 0.8, 0.2, 0.14, 5}), InvalidArgument);
  EXPECT_THROW(make_combined_psf({3, 0.8, 0.0, 0.14, 5}), InvalidArgument);
  EXPECT_THROW(make_combined_psf({3, 0.8, 1.2, 0.14, 5}), InvalidArgument);
  EXPECT_THROW(make_combined_psf({3, -1, 0.2, 0.14, 5}), InvalidArgument);
  EXPECT_THROW(make_combined_psf({3, 0.8, 0.2, 0.14, NAN}), InvalidArgument);
}

TEST(RampMask, EndpointsMidpointAndComplement) {
  const Kernel2D front = ramp_mask(11, FocusSide::Front);
  EXPECT_EQ(front.at(5, 3), 0.5);
  EXPECT_EQ(front.at(0, 0), 1.0);
  EXPECT_EQ(front.at(10, 0), 0.0);
  const Kernel2D flipped = front.flipped_horizontal();
  for (std::size_t i = 0; i < front.taps().size(); ++i) EXPECT_EQ(front.taps()[i] + flipped.taps()[i], 1.0);
  EXPECT_EQ(ramp_mask(11, FocusSide::Back), flipped);
}

TEST(SplitPsf, InFocusHalves) {
  const DpPsf p = split_dp_psf({3, 0.8, 0.2, 0.14, 0.2});
  EXPECT_EQ(p.left.size(), 1);
  EXPECT_EQ(p.left.at(0, 0), 0.5);
  EXPECT_EQ(p.right.at(0, 0), 0.5);
  EXPECT_TRUE(dp_psf_violations(p).empty());
}

TEST(SplitPsf, FrontFocusLeftMassShiftsLeft) {
  const DpPsf p = split_dp_psf({3, 0.8, 0.2, 0.14, 10});
  EXPECT_LT(p.left.centroid_x(), 0.0);
  EXPECT_GT(p.right.centroid_x(), 0.0);
}

TEST(SplitPsf, BackFocusMirrorsFront) {
  const DpPsf front = split_dp_psf({6, 0.6, 0.3, 0.14, 10});
  const DpPsf back = split_dp_psf({6, 0.6, 0.3, 0.14, -10});
  EXPECT_EQ(back.left, front.left.flipped_horizontal());
  EXPECT_GT(back.left.centroid_x(), 0.0);
}

TEST(SplitPsf, ConstraintSuiteOverBankGrid) {
  for (const auto& shape : PsfGrids::bank_defaults().shapes())
    for (double r : {-20.0, -5.0, -2.0, 2.0, 5.0, 20.0}) {
      const DpPsf p = split_dp_psf(PsfParams(shape, 0.14, r));
      const auto issues = dp_psf_violations(p);
      EXPECT_TRUE(issues.empty()) << issues.front();
    }
}

TEST(Violations, DetectsBrokenPsf) {
  DpPsf p = split_dp_psf({3, 0.8, 0.2, 0.14, 5});
  p.right.at(0, 0) += 1e-6;
  EXPECT_FALSE(dp_psf_violations(p).empty());
  DpPsf q = split_dp_psf({3, 0.8, 0.2, 0.14, 5});
  q.left.taps()[0] = -1e-3;
  EXPECT_FALSE(dp_psf_violations(q).empty());
}

TEST(Quantize, HalfPixelSteps) {
  EXPECT_EQ(quantize_radius(10.0), 20);
  EXPECT_EQ(quantize_radius(10.2), 20);
  EXPECT_EQ(quantize_radius(10.3), 21);
  EXPECT_EQ(quantize_radius(-3.3), -7);
  EXPECT_EQ(dequantize_radius(21), 10.5);
}

TEST(PsfBank, BankGridSingleRadius) {
  const PsfBank bank = PsfBank::build(PsfGrids::bank_defaults({7.0}), 2);
  EXPECT_EQ(bank.size(), 48u);
  bank.for_each([](const DpPsf& p) { EXPECT_TRUE(dp_psf_violations(p).empty()); });
}

TEST(PsfBank, SingletonGridAndLookup) {
  PsfGrids g{{3}, {0.8}, {0.2}, 0.14, {4.0}};
  const PsfBank bank = PsfBank::build(g);
  ASSERT_EQ(bank.size(), 1u);
  const PsfShape shape{3, 0.8, 0.2};
  ASSERT_NE(bank.find(shape, 4.1), nullptr);
  EXPECT_EQ(bank.find(shape, 5.0), nullptr);
  EXPECT_EQ(bank.find({6, 0.8, 0.2}, 4.0), nullptr);
  // Bank hit and on-the-fly computation agree exactly.
  EXPECT_EQ(select_dp_psf(shape, 0.14, 4.0, &bank).left, select_dp_psf(shape, 0.14, 4.0, nullptr).left);
}

TEST(PsfBank, DuplicateKeysRejected) {
  PsfGrids g{{3}, {0.8}, {0.2}, 0.14, {4.0, 4.1}};
  EXPECT_THROW(PsfBank::build(g), InvalidArgument);
}

TEST(PsfBank, DeterministicAcrossJobs) {
  const auto grids = PsfGrids::bank_defaults({3.0, -6.0});
  const PsfBank a = PsfBank::build(grids, 1);
  const PsfBank b = PsfBank::build(grids, 4);
  std::vector<Kernel2D> ka, kb;
  a.for_each([&](const DpPsf& p) { ka.push_back(p.left); });
  b.for_each([&](const DpPsf& p) { kb.push_back(p.left); });
  EXPECT_EQ(ka, kb);
}
