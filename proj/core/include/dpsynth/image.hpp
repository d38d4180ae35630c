#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace dpsynth {

/// Floating-point raster, row-major, channel-interleaved, top-left origin.
///
/// Samples are nominally in [0, 1]; intermediate results (e.g. blurred layers
/// before compositing) may leave that range until clamp01() is applied.
class Image {
 public:
  Image() = default;
  Image(int width, int height, int channels, double fill = 0.0);
  Image(int width, int height, int channels, std::vector<double> samples);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  int channels() const noexcept { return channels_; }
  bool empty() const noexcept { return samples_.empty(); }

  std::size_t pixel_count() const noexcept {
    return static_cast<std::size_t>(width_) * static_cast<std::size_t>(height_);
  }
  std::size_t sample_count() const noexcept { return samples_.size(); }

  std::size_t index(int x, int y, int c = 0) const noexcept {
    return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
            static_cast<std::size_t>(x)) *
               static_cast<std::size_t>(channels_) +
           static_cast<std::size_t>(c);
  }

  double& at(int x, int y, int c = 0) noexcept { return samples_[index(x, y, c)]; }
  double at(int x, int y, int c = 0) const noexcept { return samples_[index(x, y, c)]; }

  std::span<double> samples() noexcept { return samples_; }
  std::span<const double> samples() const noexcept { return samples_; }

  bool same_shape(const Image& other) const noexcept {
    return width_ == other.width_ && height_ == other.height_ && channels_ == other.channels_;
  }
  bool same_size(const Image& other) const noexcept {
    return width_ == other.width_ && height_ == other.height_;
  }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  std::vector<double> samples_;
};

/// Per-pixel scene distance in meters. Every sample is finite and > 0.
class DepthMap {
 public:
  DepthMap() = default;
  /// Throws InvalidArgument if any depth is non-finite or <= 0.
  DepthMap(int width, int height, std::vector<double> meters);
  static DepthMap constant(int width, int height, double meters);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  double at(int x, int y) const noexcept {
    return meters_[static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
                   static_cast<std::size_t>(x)];
  }
  std::span<const double> meters() const noexcept { return meters_; }

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<double> meters_;
};

/// Square filter with an odd side; tap (radius, radius) is the center.
class Kernel2D {
 public:
  Kernel2D() : Kernel2D(1, 0.0) {}
  explicit Kernel2D(int size, double fill = 0.0);
  Kernel2D(int size, std::vector<double> taps);

  static Kernel2D delta(double mass = 1.0) { return Kernel2D(1, mass); }

  int size() const noexcept { return size_; }
  int radius() const noexcept { return (size_ - 1) / 2; }

  double& at(int x, int y) noexcept {
    return taps_[static_cast<std::size_t>(y) * static_cast<std::size_t>(size_) +
                 static_cast<std::size_t>(x)];
  }
  double at(int x, int y) const noexcept {
    return taps_[static_cast<std::size_t>(y) * static_cast<std::size_t>(size_) +
                 static_cast<std::size_t>(x)];
  }
  /// Tap at an offset from the center; zero outside the support.
  double at_offset(int dx, int dy) const noexcept;

  std::span<double> taps() noexcept { return taps_; }
  std::span<const double> taps() const noexcept { return taps_; }

  double sum() const noexcept;
  double max() const noexcept;
  Kernel2D flipped_horizontal() const;
  /// Zero-pads (centered) to a larger odd side.
  Kernel2D embedded(int new_size) const;
  /// Horizontal centroid offset from the center column, mass weighted.
  double centroid_x() const noexcept;

  friend bool operator==(const Kernel2D&, const Kernel2D&) = default;

 private:
  int size_ = 1;
  std::vector<double> taps_;
};

struct Point {
  double x = 0.0;
  double y = 0.0;
};

/// Axis-aligned pixel rectangle, half-open on the right/bottom.
struct Rect {
  int x = 0;
  int y = 0;
  int width = 0;
  int height = 0;

  bool empty() const noexcept { return width <= 0 || height <= 0; }
  int right() const noexcept { return x + width; }
  int bottom() const noexcept { return y + height; }
  Rect expanded(int margin, int frame_width, int frame_height) const noexcept;
};

Image clamp01(Image img);
/// Average of the channels, as a single-channel image.
Image channel_mean(const Image& img);
Image extract_channel(const Image& img, int channel);
Image mirror_horizontal(const Image& img);
/// Clockwise quarter turn.
Image rotate90(const Image& img);
Image add(const Image& a, const Image& b);
Image scale(Image img, double factor);
/// Largest absolute per-sample difference; shapes must match.
double max_abs_diff(const Image& a, const Image& b);

/// Per-channel bilinear interpolation with clamp-to-edge addressing.
/// `out` must hold img.channels() values.
void bilinear_sample(const Image& img, double x, double y, std::span<double> out) noexcept;

double srgb_to_linear(double v) noexcept;
double linear_to_srgb(double v) noexcept;
Image srgb_to_linear(Image img);
Image linear_to_srgb(Image img);

}  // namespace dpsynth
