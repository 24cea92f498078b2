#pragma once

// PNG files, material packs, label maps and target photographs.

#include <cstdint>
#include <filesystem>
#include <vector>

#include "matx/featnet.hpp"
#include "matx/gradtensor.hpp"
#include "matx/render.hpp"

namespace matx {

// Unreadable or malformed files; the message names the file.
struct IoError : Error {
  using Error::Error;
};

struct Image {
  std::int64_t width = 0, height = 0;
  int channels = 0;   // 1, 2, 3 or 4
  int bit_depth = 8;  // 8 or 16
  std::vector<std::uint16_t> samples;  // interleaved, row-major

  std::uint16_t max_value() const { return bit_depth == 16 ? 65535 : 255; }
  std::uint16_t at(std::int64_t y, std::int64_t x, int c) const {
    return samples[static_cast<std::size_t>((y * width + x) * channels + c)];
  }
};

// Palettes are expanded and low bit depths widened to 8.
Image read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const Image& image);

// IEC 61966-2-1 transfer curves on [0,1].
double srgb_to_linear(double encoded);
double linear_to_srgb(double linear);

// [C,H,W] tensor with values in [0,1] from the first `channels` channels of
// the image (a gray image is repeated when more channels are requested).
Tensor image_to_tensor(const Image& image, int channels, DType dtype);
// Quantizes [0,1] values with rounding; out-of-range values are clamped.
Image tensor_to_image(const Tensor& chw, int bit_depth);

// Display image (e.g. a render) to an 8-bit PNG.
void write_preview(const std::filesystem::path& path, const Tensor& image);

inline constexpr const char* kPackFiles[] = {"albedo.png", "normal.png", "roughness.png",
                                             "specular.png"};

struct MaterialPack {
  MaterialMaps maps;
  int bit_depth = 8;  // of the albedo file
};

MaterialPack load_pack(const std::filesystem::path& dir, DType dtype = DType::f32);
// Writes the four maps. Normals are stored as the encoded unit vector with
// z recomputed from the quantized x and y, so reloading and saving again
// reproduces the same files.
void save_pack(const std::filesystem::path& dir, const MaterialMaps& maps, int bit_depth = 16);

// Single-channel 8-bit PNG, value = label id.
LabelGrid load_labels(const std::filesystem::path& path);
void save_labels(const std::filesystem::path& path, const LabelGrid& labels);

// Largest centered square, box-filtered down to size x size. Photos smaller
// than size are rejected.
Tensor load_photo(const std::filesystem::path& path, std::int64_t size, DType dtype = DType::f32);
// Same crop for label maps, sampled by nearest neighbour.
LabelGrid load_photo_labels(const std::filesystem::path& path, std::int64_t size);

// Box downscale of a [C,S,S] image to [C,size,size] by area averaging.
Tensor box_downscale(const Tensor& image, std::int64_t size);

}  // namespace matx
