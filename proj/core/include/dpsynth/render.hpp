#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dpsynth/convolve.hpp"
#include "dpsynth/image.hpp"
#include "dpsynth/optics.hpp"
#include "dpsynth/psf.hpp"

namespace dpsynth {

inline constexpr int kMaxDepthLayers = 500;
inline constexpr double kCompositeEpsilon = 1e-6;

/// One slice of the scene at a single representative CoC radius.
///
/// Pixels are stored as ascending frame-linear indices; mask() and color()
/// materialize bounds-sized rasters on demand so large layer counts stay cheap.
struct DepthLayer {
  int index = 0;  ///< 0 = farthest
  double representative_depth = 0.0;
  double signed_radius = 0.0;
  int frame_width = 0;
  int frame_height = 0;
  Rect bounds;
  std::vector<std::uint32_t> pixels;

  Image mask() const;
  Image color(const Image& sharp) const;
};

/// Bins pixels uniformly in signed CoC radius over the range present (at most
/// `max_layers` bins, empty bins dropped) and returns the layers far-to-near.
std::vector<DepthLayer> decompose_layers(const Image& sharp, const CocField& coc,
                                         int max_layers = kMaxDepthLayers);

/// A layer after per-view blurring, cropped to `bounds` (layer bounds grown by the kernel radius).
struct BlurredLayer {
  Rect bounds;
  Image left_color;
  Image right_color;
  Image left_mask;
  Image right_mask;
};

BlurredLayer blur_layer(const DepthLayer& layer, const Image& sharp, const DpPsf& psf,
                        ConvMethod method = ConvMethod::Auto);

/// Back-to-front normalized alpha compositing of blurred layers.
///
/// Per view, a layer contributes color / mask with opacity clamp(2 mask, 0, 1)
/// wherever its blurred mask exceeds kCompositeEpsilon. Accumulated color is
/// divided by accumulated opacity, then halved so each view carries half the energy.
class Compositor {
 public:
  Compositor(int width, int height, int channels);

  void add(const BlurredLayer& layer);
  /// Left and right views.
  std::pair<Image, Image> finish() const;

 private:
  struct View {
    std::vector<double> color;
    std::vector<double> alpha;
  };
  void blend(View& view, const Rect& bounds, const Image& color, const Image& mask);
  Image resolve(const View& view) const;

  int width_;
  int height_;
  int channels_;
  View left_;
  View right_;
};

std::pair<Image, Image> composite(std::span<const BlurredLayer> far_to_near, int width,
                                  int height, int channels);

/// Distance from the frame center over the center-to-corner distance; 0 at center, 1 at corners.
Image radial_distance_map(int width, int height);

struct FrameMeta {
  std::string camera_id;
  PsfShape shape;
  double kappa = 0.14;
  int layer_count = 0;
  double min_radius_px = 0.0;
  double max_radius_px = 0.0;
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;
};

struct DpFrame {
  Image left;
  Image right;
  Image combined_blur;
  Image sharp;
  Image radial_distance;
  FrameMeta meta;
};

struct RenderOptions {
  int max_layers = kMaxDepthLayers;
  double kappa = 0.14;  ///< used when no bank is supplied
  ConvMethod method = ConvMethod::Auto;
};

/// coc_field -> decompose_layers -> blur_layer -> composite. No distortion or noise.
/// Throws InvalidArgument on size mismatch between the image and depth map.
DpFrame render_dp_frame(const Image& sharp, const DepthMap& depth, const CameraConfig& cam,
                        const PsfShape& shape, const PsfBank* bank = nullptr,
                        const RenderOptions& options = {});

}  // namespace dpsynth
