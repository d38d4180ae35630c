#include "dpsynth/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>
#include <vector>

#include "dpsynth/error.hpp"

namespace dpsynth {

namespace fs = std::filesystem;

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const noexcept {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const fs::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw IoError("cannot open '" + path.string() + "'");
  return f;
}

[[noreturn]] void png_error_handler(png_structp png, png_const_charp message) {
  auto* what = static_cast<std::string*>(png_get_error_ptr(png));
  if (what) *what = message;
  png_longjmp(png, 1);
}

void png_warning_handler(png_structp, png_const_charp) {}

struct RawRaster {
  int width = 0;
  int height = 0;
  int channels = 0;
  int bit_depth = 0;
  std::vector<std::uint16_t> codes;
};

// libpng uses setjmp/longjmp for errors, so nothing with a destructor may live in
// the frames between setjmp and the longjmp inside these two functions.
bool read_png_codes(std::FILE* file, RawRaster& raster, std::string& error) {
  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, &error, png_error_handler, png_warning_handler);
  if (!png) {
    error = "png_create_read_struct failed";
    return false;
  }
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    error = "png_create_info_struct failed";
    return false;
  }
  std::vector<png_bytep>* volatile rows = nullptr;
  std::vector<png_byte>* volatile buffer = nullptr;
  if (setjmp(png_jmpbuf(png))) {
    delete rows;
    delete buffer;
    png_destroy_read_struct(&png, &info, nullptr);
    return false;
  }
  png_init_io(png, file);
  png_read_info(png, info);

  const int color_type = png_get_color_type(png, info);
  int depth = png_get_bit_depth(png, info);
  if (color_type == PNG_COLOR_TYPE_PALETTE) {
    png_set_palette_to_rgb(png);
    depth = 8;
  }
  if (color_type == PNG_COLOR_TYPE_GRAY && depth < 8) {
    png_set_expand_gray_1_2_4_to_8(png);
    depth = 8;
  }
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (depth == 16 && std::endian::native == std::endian::little) png_set_swap(png);
  png_read_update_info(png, info);

  raster.width = static_cast<int>(png_get_image_width(png, info));
  raster.height = static_cast<int>(png_get_image_height(png, info));
  raster.channels = png_get_channels(png, info);
  raster.bit_depth = depth;

  const std::size_t row_bytes = png_get_rowbytes(png, info);
  buffer = new std::vector<png_byte>(row_bytes * static_cast<std::size_t>(raster.height));
  rows = new std::vector<png_bytep>(static_cast<std::size_t>(raster.height));
  for (int y = 0; y < raster.height; ++y)
    (*rows)[static_cast<std::size_t>(y)] = buffer->data() + row_bytes * static_cast<std::size_t>(y);
  png_read_image(png, rows->data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  const std::size_t count = static_cast<std::size_t>(raster.width) *
                            static_cast<std::size_t>(raster.height) *
                            static_cast<std::size_t>(raster.channels);
  raster.codes.resize(count);
  if (depth == 16) {
    for (std::size_t y = 0; y < static_cast<std::size_t>(raster.height); ++y) {
      const auto* src = buffer->data() + row_bytes * y;
      const std::size_t n = static_cast<std::size_t>(raster.width) *
                            static_cast<std::size_t>(raster.channels);
      std::memcpy(raster.codes.data() + y * n, src, n * sizeof(std::uint16_t));
    }
  } else {
    for (std::size_t y = 0; y < static_cast<std::size_t>(raster.height); ++y) {
      const auto* src = buffer->data() + row_bytes * y;
      const std::size_t n = static_cast<std::size_t>(raster.width) *
                            static_cast<std::size_t>(raster.channels);
      for (std::size_t i = 0; i < n; ++i) raster.codes[y * n + i] = src[i];
    }
  }
  delete rows;
  delete buffer;
  return true;
}

bool write_png_codes(std::FILE* file, const std::vector<png_bytep>& rows, int width, int height,
                     int channels, int bit_depth, std::string& error) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &error, png_error_handler,
                                            png_warning_handler);
  if (!png) {
    error = "png_create_write_struct failed";
    return false;
  }
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    error = "png_create_info_struct failed";
    return false;
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    return false;
  }
  png_init_io(png, file);
  png_set_compression_level(png, 3);
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height),
               bit_depth, channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  if (bit_depth == 16 && std::endian::native == std::endian::little) png_set_swap(png);
  png_write_image(png, const_cast<png_bytepp>(rows.data()));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return true;
}

RawRaster read_png(const fs::path& path) {
  auto file = open_file(path, "rb");
  std::array<unsigned char, 8> sig{};
  if (std::fread(sig.data(), 1, sig.size(), file.get()) != sig.size() ||
      png_sig_cmp(sig.data(), 0, sig.size()) != 0) {
    throw IoError("'" + path.string() + "' is not a PNG file");
  }
  std::rewind(file.get());
  RawRaster raster;
  std::string error;
  if (!read_png_codes(file.get(), raster, error)) {
    throw IoError("cannot decode '" + path.string() + "': " + error);
  }
  return raster;
}

enum class FileKind { Png, Pfm, Unknown };

FileKind sniff(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::array<char, 8> head{};
  in.read(head.data(), head.size());
  const auto n = in.gcount();
  if (n >= 8 && png_sig_cmp(reinterpret_cast<png_const_bytep>(head.data()), 0, 8) == 0)
    return FileKind::Png;
  if (n >= 2 && head[0] == 'P' && (head[1] == 'F' || head[1] == 'f')) return FileKind::Pfm;
  return FileKind::Unknown;
}

float swap_bytes(float f) noexcept {
  const auto u = std::bit_cast<std::uint32_t>(f);
  return std::bit_cast<float>((u >> 24) | ((u >> 8) & 0xff00u) | ((u << 8) & 0xff0000u) | (u << 24));
}

std::uint16_t quantize(double v, double max_code) {
  const double code = std::floor(std::clamp(v, 0.0, 1.0) * max_code + 0.5);
  return static_cast<std::uint16_t>(std::min(code, max_code));
}

}  // namespace

Image load_image(const fs::path& path, std::optional<int> bit_depth_hint) {
  switch (sniff(path)) {
    case FileKind::Pfm: {
      Image img = read_pfm(path);
      for (double v : img.samples()) {
        if (!std::isfinite(v)) throw IoError("'" + path.string() + "' contains NaN or Inf");
      }
      return clamp01(std::move(img));
    }
    case FileKind::Png: {
      RawRaster raster = read_png(path);
      if (raster.channels != 1 && raster.channels != 3) {
        throw IoError("'" + path.string() + "' has unsupported channel count " +
                      std::to_string(raster.channels));
      }
      int significant = raster.bit_depth;
      if (bit_depth_hint) {
        if (*bit_depth_hint < 1 || *bit_depth_hint > raster.bit_depth) {
          throw IoError("bit depth hint " + std::to_string(*bit_depth_hint) +
                        " does not fit the " + std::to_string(raster.bit_depth) +
                        "-bit container of '" + path.string() + "'");
        }
        significant = *bit_depth_hint;
      }
      const double max_code = std::ldexp(1.0, significant) - 1.0;
      std::vector<double> samples(raster.codes.size());
      for (std::size_t i = 0; i < samples.size(); ++i)
        samples[i] = std::min(1.0, raster.codes[i] / max_code);
      return Image(raster.width, raster.height, raster.channels, std::move(samples));
    }
    case FileKind::Unknown:
      break;
  }
  throw IoError("'" + path.string() + "' is neither PNG nor PFM");
}

void save_image(const Image& img, const fs::path& path, int bit_depth) {
  if (bit_depth != 8 && bit_depth != 16) {
    throw InvalidArgument("bit depth must be 8 or 16, got " + std::to_string(bit_depth));
  }
  if (img.empty()) throw InvalidArgument("cannot save an empty image");
  const double max_code = bit_depth == 8 ? 255.0 : 65535.0;
  const std::size_t bytes_per_sample = bit_depth == 8 ? 1 : 2;
  const std::size_t row_samples =
      static_cast<std::size_t>(img.width()) * static_cast<std::size_t>(img.channels());
  std::vector<unsigned char> buffer(row_samples * bytes_per_sample *
                                    static_cast<std::size_t>(img.height()));
  const auto src = img.samples();
  for (std::size_t i = 0; i < src.size(); ++i) {
    const std::uint16_t code = quantize(src[i], max_code);
    if (bit_depth == 8) {
      buffer[i] = static_cast<unsigned char>(code);
    } else {
      std::memcpy(buffer.data() + 2 * i, &code, 2);
    }
  }
  std::vector<png_bytep> rows(static_cast<std::size_t>(img.height()));
  for (std::size_t y = 0; y < rows.size(); ++y)
    rows[y] = buffer.data() + y * row_samples * bytes_per_sample;

  auto file = open_file(path, "wb");
  std::string error;
  if (!write_png_codes(file.get(), rows, img.width(), img.height(), img.channels(), bit_depth,
                       error)) {
    throw IoError("cannot encode '" + path.string() + "': " + error);
  }
  if (std::fflush(file.get()) != 0) throw IoError("write failed for '" + path.string() + "'");
}

std::optional<DepthFormat> parse_depth_format(const std::string& name) {
  if (name == "png16") return DepthFormat::Png16;
  if (name == "pfm") return DepthFormat::Pfm;
  return std::nullopt;
}

DepthMap load_depth(const fs::path& path, const DepthLoadOptions& options) {
  if (!(options.scale > 0.0) || !std::isfinite(options.scale)) {
    throw InvalidArgument("depth scale must be > 0");
  }
  if (!(options.far_sentinel_m > 0.0)) throw InvalidArgument("far sentinel must be > 0");
  int width = 0;
  int height = 0;
  std::vector<double> meters;
  if (options.format == DepthFormat::Png16) {
    RawRaster raster = read_png(path);
    if (raster.bit_depth != 16) {
      throw IoError("'" + path.string() + "' is " + std::to_string(raster.bit_depth) +
                    "-bit; png16 depth needs a 16-bit PNG");
    }
    width = raster.width;
    height = raster.height;
    meters.resize(static_cast<std::size_t>(width) * static_cast<std::size_t>(height));
    const auto ch = static_cast<std::size_t>(raster.channels);
    for (std::size_t i = 0; i < meters.size(); ++i) {
      const std::uint16_t code = raster.codes[i * ch];
      meters[i] = code == 0 ? options.far_sentinel_m : code * options.scale;
    }
  } else {
    Image raw = read_pfm(path);
    width = raw.width();
    height = raw.height();
    meters.resize(raw.pixel_count());
    const auto ch = static_cast<std::size_t>(raw.channels());
    for (std::size_t i = 0; i < meters.size(); ++i) {
      const double v = raw.samples()[i * ch];
      if (!std::isfinite(v)) throw IoError("'" + path.string() + "' contains NaN or Inf depth");
      if (v < 0.0) {
        throw IoError("'" + path.string() + "' has negative depth at pixel " + std::to_string(i));
      }
      meters[i] = v == 0.0 ? options.far_sentinel_m : v * options.scale;
    }
  }
  return DepthMap(width, height, std::move(meters));
}

Image read_pfm(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::string magic;
  int width = 0;
  int height = 0;
  double scale = 0.0;
  in >> magic >> width >> height >> scale;
  if (!in || (magic != "PF" && magic != "Pf")) {
    throw IoError("'" + path.string() + "' has a malformed PFM header");
  }
  in.get();  // single whitespace before the raster
  const int channels = magic == "PF" ? 3 : 1;
  if (width <= 0 || height <= 0 || scale == 0.0) {
    throw IoError("'" + path.string() + "' has invalid PFM dimensions or scale");
  }
  const bool little = scale < 0.0;
  const std::size_t row = static_cast<std::size_t>(width) * static_cast<std::size_t>(channels);
  std::vector<float> raw(row * static_cast<std::size_t>(height));
  in.read(reinterpret_cast<char*>(raw.data()),
          static_cast<std::streamsize>(raw.size() * sizeof(float)));
  if (static_cast<std::size_t>(in.gcount()) != raw.size() * sizeof(float)) {
    throw IoError("'" + path.string() + "' is truncated");
  }
  if (little != (std::endian::native == std::endian::little)) {
    for (float& f : raw) f = swap_bytes(f);
  }
  std::vector<double> samples(raw.size());
  // PFM stores scanlines bottom-to-top.
  for (std::size_t y = 0; y < static_cast<std::size_t>(height); ++y) {
    const std::size_t src_row = static_cast<std::size_t>(height) - 1 - y;
    for (std::size_t i = 0; i < row; ++i) samples[y * row + i] = raw[src_row * row + i];
  }
  return Image(width, height, channels, std::move(samples));
}

void write_pfm(const Image& img, const fs::path& path) {
  if (img.empty()) throw InvalidArgument("cannot save an empty image");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << (img.channels() == 3 ? "PF" : "Pf") << '\n'
      << img.width() << ' ' << img.height() << '\n'
      << "-1.0\n";
  const std::size_t row =
      static_cast<std::size_t>(img.width()) * static_cast<std::size_t>(img.channels());
  std::vector<float> raw(row);
  for (std::size_t y = static_cast<std::size_t>(img.height()); y-- > 0;) {
    for (std::size_t i = 0; i < row; ++i) {
      float f = static_cast<float>(img.samples()[y * row + i]);
      if constexpr (std::endian::native == std::endian::big) {
        f = swap_bytes(f);
      }
      raw[i] = f;
    }
    out.write(reinterpret_cast<const char*>(raw.data()),
              static_cast<std::streamsize>(row * sizeof(float)));
  }
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

Image kernel_to_image(const Kernel2D& kernel) {
  return Image(kernel.size(), kernel.size(), 1,
               std::vector<double>(kernel.taps().begin(), kernel.taps().end()));
}

Kernel2D image_to_kernel(const Image& img) {
  if (img.width() != img.height() || img.width() % 2 == 0) {
    throw InvalidArgument("kernel raster must be square with an odd side");
  }
  const Image gray = img.channels() == 1 ? img : extract_channel(img, 0);
  return Kernel2D(gray.width(), std::vector<double>(gray.samples().begin(), gray.samples().end()));
}

}  // namespace dpsynth
