#include <png.h>

#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <memory>

#include "matx/io.hpp"

namespace matx {

namespace {

struct File {
  std::FILE* f = nullptr;
  ~File() {
    if (f) std::fclose(f);
  }
};

struct ErrorSink {
  std::string message;
};

void on_error(png_structp png, png_const_charp msg) {
  static_cast<ErrorSink*>(png_get_error_ptr(png))->message = msg;
  png_longjmp(png, 1);
}

void on_warning(png_structp, png_const_charp) {}

}  // namespace

Image read_png(const std::filesystem::path& path) {
  File file;
  file.f = std::fopen(path.c_str(), "rb");
  if (!file.f) throw IoError(path.string() + ": cannot open file");
  png_byte sig[8];
  if (std::fread(sig, 1, 8, file.f) != 8 || png_sig_cmp(sig, 0, 8) != 0)
    throw IoError(path.string() + ": not a PNG file");

  ErrorSink sink;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &sink, on_error, on_warning);
  if (!png) throw IoError(path.string() + ": out of memory");
  png_infop info = png_create_info_struct(png);
  Image img;
  std::vector<png_bytep> rows;
  std::vector<png_byte> raw;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError(path.string() + ": " + sink.message);
  }
  png_init_io(png, file.f);
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  png_set_interlace_handling(png);
  png_read_update_info(png, info);

  img.width = png_get_image_width(png, info);
  img.height = png_get_image_height(png, info);
  img.channels = png_get_channels(png, info);
  img.bit_depth = png_get_bit_depth(png, info) == 16 ? 16 : 8;
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  raw.resize(rowbytes * static_cast<std::size_t>(img.height));
  rows.resize(static_cast<std::size_t>(img.height));
  for (std::size_t y = 0; y < rows.size(); ++y) rows[y] = raw.data() + y * rowbytes;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  const std::size_t n = static_cast<std::size_t>(img.width * img.height * img.channels);
  img.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    img.samples[i] = img.bit_depth == 16
                         ? static_cast<std::uint16_t>(raw[2 * i] << 8 | raw[2 * i + 1])
                         : raw[i];
  return img;
}

void write_png(const std::filesystem::path& path, const Image& img) {
  if (img.channels < 1 || img.channels > 4) throw IoError(path.string() + ": bad channel count");
  if (img.bit_depth != 8 && img.bit_depth != 16)
    throw IoError(path.string() + ": bit depth must be 8 or 16");
  if (img.samples.size() != static_cast<std::size_t>(img.width * img.height * img.channels))
    throw IoError(path.string() + ": sample count does not match the image size");
  static constexpr int kColor[] = {PNG_COLOR_TYPE_GRAY, PNG_COLOR_TYPE_GRAY_ALPHA,
                                   PNG_COLOR_TYPE_RGB, PNG_COLOR_TYPE_RGB_ALPHA};
  const std::size_t bps = img.bit_depth / 8;
  const std::size_t rowbytes = static_cast<std::size_t>(img.width * img.channels) * bps;
  std::vector<png_byte> raw(rowbytes * static_cast<std::size_t>(img.height));
  for (std::size_t i = 0; i < img.samples.size(); ++i) {
    if (bps == 2) {
      raw[2 * i] = static_cast<png_byte>(img.samples[i] >> 8);
      raw[2 * i + 1] = static_cast<png_byte>(img.samples[i] & 0xff);
    } else {
      raw[i] = static_cast<png_byte>(img.samples[i]);
    }
  }
  std::vector<png_bytep> rows(static_cast<std::size_t>(img.height));
  for (std::size_t y = 0; y < rows.size(); ++y) rows[y] = raw.data() + y * rowbytes;

  File file;
  file.f = std::fopen(path.c_str(), "wb");
  if (!file.f) throw IoError(path.string() + ": cannot create file");
  ErrorSink sink;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &sink, on_error, on_warning);
  if (!png) throw IoError(path.string() + ": out of memory");
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError(path.string() + ": " + sink.message);
  }
  png_init_io(png, file.f);
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height),
               img.bit_depth, kColor[img.channels - 1], PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

double srgb_to_linear(double v) {
  return v <= 0.04045 ? v / 12.92 : std::pow((v + 0.055) / 1.055, 2.4);
}

double linear_to_srgb(double v) {
  return v <= 0.0031308 ? v * 12.92 : 1.055 * std::pow(v, 1.0 / 2.4) - 0.055;
}

Tensor image_to_tensor(const Image& img, int channels, DType dtype) {
  const std::int64_t hw = img.width * img.height;
  std::vector<double> v(static_cast<std::size_t>(channels * hw));
  const double scale = 1.0 / img.max_value();
  // Gray (+alpha) images feed every requested colour channel.
  const int color = img.channels <= 2 ? 1 : 3;
  for (int c = 0; c < channels; ++c) {
    const int src = std::min(c, color - 1);
    for (std::int64_t i = 0; i < hw; ++i)
      v[static_cast<std::size_t>(c * hw + i)] =
          img.samples[static_cast<std::size_t>(i * img.channels + src)] * scale;
  }
  return Tensor::from_values({channels, img.height, img.width}, v, dtype);
}

Image tensor_to_image(const Tensor& t, int bit_depth) {
  if (!t.defined() || t.rank() != 3) throw ShapeError("tensor_to_image: expected [C,H,W]");
  Image img;
  img.channels = static_cast<int>(t.channels());
  img.height = t.height();
  img.width = t.width();
  img.bit_depth = bit_depth;
  const auto v = t.values();
  const std::int64_t hw = img.width * img.height;
  const double mx = img.max_value();
  img.samples.resize(v.size());
  for (int c = 0; c < img.channels; ++c)
    for (std::int64_t i = 0; i < hw; ++i) {
      const double x = std::clamp(v[static_cast<std::size_t>(c * hw + i)], 0.0, 1.0);
      img.samples[static_cast<std::size_t>(i * img.channels + c)] =
          static_cast<std::uint16_t>(std::lround(x * mx));
    }
  return img;
}

void write_preview(const std::filesystem::path& path, const Tensor& image) {
  write_png(path, tensor_to_image(image, 8));
}

}  // namespace matx
