#include "dpsynth/image.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "dpsynth/error.hpp"

namespace dpsynth {

namespace {

void check_dims(int width, int height, int channels) {
  if (width <= 0 || height <= 0) {
    throw InvalidArgument("image dimensions must be positive, got " + std::to_string(width) +
                          "x" + std::to_string(height));
  }
  if (channels != 1 && channels != 3) {
    throw InvalidArgument("unsupported channel count " + std::to_string(channels));
  }
}

}  // namespace

Image::Image(int width, int height, int channels, double fill)
    : width_(width), height_(height), channels_(channels) {
  check_dims(width, height, channels);
  samples_.assign(pixel_count() * static_cast<std::size_t>(channels), fill);
}

Image::Image(int width, int height, int channels, std::vector<double> samples)
    : width_(width), height_(height), channels_(channels), samples_(std::move(samples)) {
  check_dims(width, height, channels);
  if (samples_.size() != pixel_count() * static_cast<std::size_t>(channels)) {
    throw InvalidArgument("sample buffer has " + std::to_string(samples_.size()) +
                          " values, expected " +
                          std::to_string(pixel_count() * static_cast<std::size_t>(channels)));
  }
}

DepthMap::DepthMap(int width, int height, std::vector<double> meters)
    : width_(width), height_(height), meters_(std::move(meters)) {
  if (width <= 0 || height <= 0) throw InvalidArgument("depth map dimensions must be positive");
  if (meters_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
    throw InvalidArgument("depth buffer size does not match its dimensions");
  }
  for (std::size_t i = 0; i < meters_.size(); ++i) {
    if (!std::isfinite(meters_[i]) || meters_[i] <= 0.0) {
      throw InvalidArgument("depth must be finite and > 0 (pixel " + std::to_string(i) +
                            " = " + std::to_string(meters_[i]) + ")");
    }
  }
}

DepthMap DepthMap::constant(int width, int height, double meters) {
  return DepthMap(width, height,
                  std::vector<double>(static_cast<std::size_t>(width) *
                                          static_cast<std::size_t>(height),
                                      meters));
}

Kernel2D::Kernel2D(int size, double fill) : size_(size) {
  if (size < 1 || size % 2 == 0) {
    throw InvalidArgument("kernel side must be odd and positive, got " + std::to_string(size));
  }
  taps_.assign(static_cast<std::size_t>(size) * static_cast<std::size_t>(size), fill);
}

Kernel2D::Kernel2D(int size, std::vector<double> taps) : Kernel2D(size) {
  if (taps.size() != taps_.size()) throw InvalidArgument("kernel tap count mismatch");
  taps_ = std::move(taps);
}

double Kernel2D::at_offset(int dx, int dy) const noexcept {
  const int r = radius();
  if (dx < -r || dx > r || dy < -r || dy > r) return 0.0;
  return at(dx + r, dy + r);
}

double Kernel2D::sum() const noexcept { return std::accumulate(taps_.begin(), taps_.end(), 0.0); }

double Kernel2D::max() const noexcept { return *std::max_element(taps_.begin(), taps_.end()); }

Kernel2D Kernel2D::flipped_horizontal() const {
  Kernel2D out(size_);
  for (int y = 0; y < size_; ++y)
    for (int x = 0; x < size_; ++x) out.at(size_ - 1 - x, y) = at(x, y);
  return out;
}

Kernel2D Kernel2D::embedded(int new_size) const {
  if (new_size < size_) throw InvalidArgument("cannot embed a kernel into a smaller side");
  Kernel2D out(new_size);
  const int off = (new_size - size_) / 2;
  for (int y = 0; y < size_; ++y)
    for (int x = 0; x < size_; ++x) out.at(x + off, y + off) = at(x, y);
  return out;
}

double Kernel2D::centroid_x() const noexcept {
  double mass = 0.0;
  double moment = 0.0;
  const int r = radius();
  for (int y = 0; y < size_; ++y) {
    for (int x = 0; x < size_; ++x) {
      mass += at(x, y);
      moment += at(x, y) * (x - r);
    }
  }
  return mass != 0.0 ? moment / mass : 0.0;
}

Rect Rect::expanded(int margin, int frame_width, int frame_height) const noexcept {
  const int x0 = std::max(0, x - margin);
  const int y0 = std::max(0, y - margin);
  const int x1 = std::min(frame_width, right() + margin);
  const int y1 = std::min(frame_height, bottom() + margin);
  return {x0, y0, x1 - x0, y1 - y0};
}

Image clamp01(Image img) {
  for (double& v : img.samples()) v = std::clamp(v, 0.0, 1.0);
  return img;
}

Image channel_mean(const Image& img) {
  if (img.channels() == 1) return img;
  Image out(img.width(), img.height(), 1);
  const auto src = img.samples();
  auto dst = out.samples();
  const auto ch = static_cast<std::size_t>(img.channels());
  for (std::size_t p = 0; p < img.pixel_count(); ++p) {
    double acc = 0.0;
    for (std::size_t c = 0; c < ch; ++c) acc += src[p * ch + c];
    dst[p] = acc / static_cast<double>(ch);
  }
  return out;
}

Image extract_channel(const Image& img, int channel) {
  if (channel < 0 || channel >= img.channels()) throw InvalidArgument("channel out of range");
  Image out(img.width(), img.height(), 1);
  const auto ch = static_cast<std::size_t>(img.channels());
  for (std::size_t p = 0; p < img.pixel_count(); ++p)
    out.samples()[p] = img.samples()[p * ch + static_cast<std::size_t>(channel)];
  return out;
}

Image mirror_horizontal(const Image& img) {
  Image out(img.width(), img.height(), img.channels());
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      for (int c = 0; c < img.channels(); ++c)
        out.at(img.width() - 1 - x, y, c) = img.at(x, y, c);
  return out;
}

Image rotate90(const Image& img) {
  // (x, y) -> (h - 1 - y, x)
  Image out(img.height(), img.width(), img.channels());
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      for (int c = 0; c < img.channels(); ++c) out.at(img.height() - 1 - y, x, c) = img.at(x, y, c);
  return out;
}

Image add(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw InvalidArgument("add: image shapes differ");
  Image out = a;
  auto dst = out.samples();
  const auto src = b.samples();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  return out;
}

Image scale(Image img, double factor) {
  for (double& v : img.samples()) v *= factor;
  return img;
}

double max_abs_diff(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw InvalidArgument("max_abs_diff: image shapes differ");
  double worst = 0.0;
  const auto sa = a.samples();
  const auto sb = b.samples();
  for (std::size_t i = 0; i < sa.size(); ++i) worst = std::max(worst, std::abs(sa[i] - sb[i]));
  return worst;
}

void bilinear_sample(const Image& img, double x, double y, std::span<double> out) noexcept {
  const double cx = std::clamp(x, 0.0, static_cast<double>(img.width() - 1));
  const double cy = std::clamp(y, 0.0, static_cast<double>(img.height() - 1));
  const int x0 = static_cast<int>(std::floor(cx));
  const int y0 = static_cast<int>(std::floor(cy));
  const int x1 = std::min(x0 + 1, img.width() - 1);
  const int y1 = std::min(y0 + 1, img.height() - 1);
  const double fx = cx - x0;
  const double fy = cy - y0;
  for (int c = 0; c < img.channels(); ++c) {
    const double top = img.at(x0, y0, c) * (1.0 - fx) + img.at(x1, y0, c) * fx;
    const double bottom = img.at(x0, y1, c) * (1.0 - fx) + img.at(x1, y1, c) * fx;
    out[static_cast<std::size_t>(c)] = top * (1.0 - fy) + bottom * fy;
  }
}

double srgb_to_linear(double v) noexcept {
  return v <= 0.04045 ? v / 12.92 : std::pow((v + 0.055) / 1.055, 2.4);
}

double linear_to_srgb(double v) noexcept {
  return v <= 0.0031308 ? v * 12.92 : 1.055 * std::pow(v, 1.0 / 2.4) - 0.055;
}

Image srgb_to_linear(Image img) {
  for (double& v : img.samples()) v = srgb_to_linear(v);
  return img;
}

Image linear_to_srgb(Image img) {
  for (double& v : img.samples()) v = linear_to_srgb(v);
  return img;
}

}  // namespace dpsynth
