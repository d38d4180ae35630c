#include "dpsynth/render.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>

#include "dpsynth/error.hpp"

namespace dpsynth {

namespace {

std::size_t linear(int x, int y, int width) {
  return static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x);
}

}  // namespace

Image DepthLayer::mask() const {
  Image out(bounds.width, bounds.height, 1);
  for (std::uint32_t p : pixels) {
    const int x = static_cast<int>(p % static_cast<std::uint32_t>(frame_width));
    const int y = static_cast<int>(p / static_cast<std::uint32_t>(frame_width));
    out.at(x - bounds.x, y - bounds.y) = 1.0;
  }
  return out;
}

Image DepthLayer::color(const Image& sharp) const {
  if (sharp.width() != frame_width || sharp.height() != frame_height) {
    throw InvalidArgument("layer color: image size does not match the layer's frame");
  }
  Image out(bounds.width, bounds.height, sharp.channels());
  for (std::uint32_t p : pixels) {
    const int x = static_cast<int>(p % static_cast<std::uint32_t>(frame_width));
    const int y = static_cast<int>(p / static_cast<std::uint32_t>(frame_width));
    for (int c = 0; c < sharp.channels(); ++c) out.at(x - bounds.x, y - bounds.y, c) = sharp.at(x, y, c);
  }
  return out;
}

std::vector<DepthLayer> decompose_layers(const Image& sharp, const CocField& coc, int max_layers) {
  if (sharp.width() != coc.width || sharp.height() != coc.height) {
    throw InvalidArgument("decompose_layers: image is " + std::to_string(sharp.width()) + "x" +
                          std::to_string(sharp.height()) + " but the CoC field is " +
                          std::to_string(coc.width) + "x" + std::to_string(coc.height));
  }
  if (max_layers < 1) throw InvalidArgument("max_layers must be >= 1");
  const auto& radii = coc.signed_radius;
  if (radii.empty()) return {};
  const auto [lo_it, hi_it] = std::minmax_element(radii.begin(), radii.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  const int bins = hi > lo ? max_layers : 1;
  const double width = (hi - lo) / bins;

  std::vector<int> bin_of(radii.size());
  std::vector<std::size_t> counts(static_cast<std::size_t>(bins), 0);
  for (std::size_t i = 0; i < radii.size(); ++i) {
    int b = 0;
    if (bins > 1) b = std::min(bins - 1, static_cast<int>(std::floor((radii[i] - lo) / width)));
    bin_of[i] = b;
    ++counts[static_cast<std::size_t>(b)];
  }

  // Highest radius first: r grows with depth, so this is far to near.
  std::vector<int> slot(static_cast<std::size_t>(bins), -1);
  std::vector<DepthLayer> layers;
  for (int b = bins - 1; b >= 0; --b) {
    if (counts[static_cast<std::size_t>(b)] == 0) continue;
    DepthLayer layer;
    layer.index = static_cast<int>(layers.size());
    layer.signed_radius = bins == 1 ? (hi > lo ? 0.5 * (lo + hi) : lo) : lo + (b + 0.5) * width;
    layer.representative_depth = coc.depth_for(layer.signed_radius);
    layer.frame_width = coc.width;
    layer.frame_height = coc.height;
    layer.pixels.reserve(counts[static_cast<std::size_t>(b)]);
    slot[static_cast<std::size_t>(b)] = layer.index;
    layers.push_back(std::move(layer));
  }
  std::vector<int> x0(layers.size(), coc.width), y0(layers.size(), coc.height);
  std::vector<int> x1(layers.size(), -1), y1(layers.size(), -1);
  for (int y = 0; y < coc.height; ++y) {
    for (int x = 0; x < coc.width; ++x) {
      const std::size_t i = linear(x, y, coc.width);
      const auto l = static_cast<std::size_t>(slot[static_cast<std::size_t>(bin_of[i])]);
      layers[l].pixels.push_back(static_cast<std::uint32_t>(i));
      x0[l] = std::min(x0[l], x);
      y0[l] = std::min(y0[l], y);
      x1[l] = std::max(x1[l], x);
      y1[l] = std::max(y1[l], y);
    }
  }
  for (std::size_t l = 0; l < layers.size(); ++l)
    layers[l].bounds = {x0[l], y0[l], x1[l] - x0[l] + 1, y1[l] - y0[l] + 1};
  return layers;
}

BlurredLayer blur_layer(const DepthLayer& layer, const Image& sharp, const DpPsf& psf,
                        ConvMethod method) {
  const int margin = psf.combined.radius();
  BlurredLayer out;
  out.bounds = layer.bounds.expanded(margin, layer.frame_width, layer.frame_height);
  const Rect& r = out.bounds;
  const int ch = sharp.channels();
  const std::size_t n = static_cast<std::size_t>(r.width) * static_cast<std::size_t>(r.height);

  // Planes: color channels, then the mask, all on the expanded bounds.
  std::vector<std::vector<double>> planes(static_cast<std::size_t>(ch) + 1, std::vector<double>(n, 0.0));
  for (std::uint32_t p : layer.pixels) {
    const int x = static_cast<int>(p % static_cast<std::uint32_t>(layer.frame_width));
    const int y = static_cast<int>(p / static_cast<std::uint32_t>(layer.frame_width));
    const std::size_t local = linear(x - r.x, y - r.y, r.width);
    for (int c = 0; c < ch; ++c) planes[static_cast<std::size_t>(c)][local] = sharp.at(x, y, c);
    planes[static_cast<std::size_t>(ch)][local] = 1.0;
  }
  std::vector<std::span<const double>> views(planes.begin(), planes.end());
  const Kernel2D* kernels[] = {&psf.left, &psf.right};
  auto blurred = convolve_planes(views, r.width, r.height, kernels, method);

  const auto pack = [&](const std::vector<std::vector<double>>& src, Image& color, Image& mask) {
    color = Image(r.width, r.height, ch);
    mask = Image(r.width, r.height, 1);
    for (std::size_t i = 0; i < n; ++i) {
      for (int c = 0; c < ch; ++c)
        color.samples()[i * static_cast<std::size_t>(ch) + static_cast<std::size_t>(c)] =
            std::max(0.0, src[static_cast<std::size_t>(c)][i]);
      mask.samples()[i] = std::max(0.0, src[static_cast<std::size_t>(ch)][i]);
    }
  };
  pack(blurred[0], out.left_color, out.left_mask);
  pack(blurred[1], out.right_color, out.right_mask);
  return out;
}

Compositor::Compositor(int width, int height, int channels)
    : width_(width), height_(height), channels_(channels) {
  const std::size_t n = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  for (View* v : {&left_, &right_}) {
    v->color.assign(n * static_cast<std::size_t>(channels), 0.0);
    v->alpha.assign(n, 0.0);
  }
}

void Compositor::blend(View& view, const Rect& bounds, const Image& color, const Image& mask) {
  const auto ch = static_cast<std::size_t>(channels_);
  for (int y = 0; y < bounds.height; ++y) {
    for (int x = 0; x < bounds.width; ++x) {
      const double m = mask.at(x, y);
      if (m <= kCompositeEpsilon) continue;
      const double a = std::min(1.0, 2.0 * m);
      const std::size_t p = linear(bounds.x + x, bounds.y + y, width_);
      for (std::size_t c = 0; c < ch; ++c) {
        double& acc = view.color[p * ch + c];
        acc = color.at(x, y, static_cast<int>(c)) / m * a + acc * (1.0 - a);
      }
      view.alpha[p] = a + view.alpha[p] * (1.0 - a);
    }
  }
}

void Compositor::add(const BlurredLayer& layer) {
  if (layer.left_color.channels() != channels_) throw InvalidArgument("compositor: channel mismatch");
  if (layer.bounds.right() > width_ || layer.bounds.bottom() > height_) {
    throw InvalidArgument("compositor: layer bounds exceed the frame");
  }
  blend(left_, layer.bounds, layer.left_color, layer.left_mask);
  blend(right_, layer.bounds, layer.right_color, layer.right_mask);
}

Image Compositor::resolve(const View& view) const {
  Image out(width_, height_, channels_);
  const auto ch = static_cast<std::size_t>(channels_);
  for (std::size_t p = 0; p < view.alpha.size(); ++p) {
    const double a = view.alpha[p];
    for (std::size_t c = 0; c < ch; ++c) {
      const double v = a > kCompositeEpsilon ? view.color[p * ch + c] / a * 0.5 : 0.0;
      out.samples()[p * ch + c] = std::clamp(v, 0.0, 1.0);
    }
  }
  return out;
}

std::pair<Image, Image> Compositor::finish() const { return {resolve(left_), resolve(right_)}; }

std::pair<Image, Image> composite(std::span<const BlurredLayer> far_to_near, int width, int height,
                                  int channels) {
  if (far_to_near.empty()) throw InvalidArgument("composite: no layers");
  Compositor comp(width, height, channels);
  for (const auto& layer : far_to_near) comp.add(layer);
  return comp.finish();
}

Image radial_distance_map(int width, int height) {
  Image out(width, height, 1);
  const double cx = (width - 1) / 2.0;
  const double cy = (height - 1) / 2.0;
  const double corner = std::hypot(cx, cy);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      out.at(x, y) = corner > 0.0 ? std::hypot(x - cx, y - cy) / corner : 0.0;
  return out;
}

DpFrame render_dp_frame(const Image& sharp, const DepthMap& depth, const CameraConfig& cam,
                        const PsfShape& shape, const PsfBank* bank, const RenderOptions& options) {
  if (sharp.width() != depth.width() || sharp.height() != depth.height()) {
    throw InvalidArgument("render: image is " + std::to_string(sharp.width()) + "x" +
                          std::to_string(sharp.height()) + " but depth is " +
                          std::to_string(depth.width()) + "x" + std::to_string(depth.height()));
  }
  cam.validate();
  const double kappa = bank ? bank->kappa() : options.kappa;
  const CocField coc = coc_field(cam, depth);
  const auto layers = decompose_layers(sharp, coc, options.max_layers);

  Compositor comp(sharp.width(), sharp.height(), sharp.channels());
  std::map<int, DpPsf> cache;
  const int in_focus_key = std::numeric_limits<int>::min();
  for (const auto& layer : layers) {
    const int key = std::abs(layer.signed_radius) < kInFocusRadiusPx
                        ? in_focus_key
                        : quantize_radius(layer.signed_radius);
    auto it = cache.find(key);
    if (it == cache.end())
      it = cache.emplace(key, select_dp_psf(shape, kappa, layer.signed_radius, bank)).first;
    comp.add(blur_layer(layer, sharp, it->second, options.method));
  }

  DpFrame frame;
  std::tie(frame.left, frame.right) = comp.finish();
  frame.combined_blur = clamp01(add(frame.left, frame.right));
  frame.sharp = sharp;
  frame.radial_distance = radial_distance_map(sharp.width(), sharp.height());
  frame.meta.camera_id = cam.id;
  frame.meta.shape = shape;
  frame.meta.kappa = kappa;
  frame.meta.layer_count = static_cast<int>(layers.size());
  if (!coc.signed_radius.empty()) {
    const auto [lo, hi] = std::minmax_element(coc.signed_radius.begin(), coc.signed_radius.end());
    frame.meta.min_radius_px = *lo;
    frame.meta.max_radius_px = *hi;
  }
  return frame;
}

}  // namespace dpsynth
