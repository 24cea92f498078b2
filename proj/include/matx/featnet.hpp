#pragma once

// Fixed four-scale convolutional feature extractor: two 3x3 conv+ReLU layers
// per scale, 2x average pooling between scales, zero padding.

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "matx/gradtensor.hpp"
#include "matx/render.hpp"

namespace matx {

enum class Tap : std::uint8_t { s1c1, s1c2, s2c1, s2c2, s3c1, s3c2, s4c1, s4c2 };

inline constexpr std::array<Tap, 8> kAllTaps = {Tap::s1c1, Tap::s1c2, Tap::s2c1, Tap::s2c2,
                                                Tap::s3c1, Tap::s3c2, Tap::s4c1, Tap::s4c2};

const char* tap_name(Tap tap);
Tap parse_tap(std::string_view name);
// 1-based scale; features at scale s have resolution H / 2^(s-1).
int tap_scale(Tap tap);
inline int tap_index(Tap tap) { return static_cast<int>(tap); }

inline constexpr std::uint8_t kUnlabeled = 255;

struct LabelGrid {
  std::int64_t height = 0, width = 0;
  std::vector<std::uint8_t> labels;  // row-major

  static LabelGrid uniform(std::int64_t height, std::int64_t width, std::uint8_t label);
  std::uint8_t at(std::int64_t y, std::int64_t x) const {
    return labels[static_cast<std::size_t>(y * width + x)];
  }
  bool contains(std::uint8_t label) const;
  bool operator==(const LabelGrid&) const = default;
};

// Nearest-neighbour subsampling at the tap's stride.
LabelGrid downsample_labels(const LabelGrid& labels, Tap tap);

struct FeaturePyramid {
  std::map<Tap, Tensor> features;
  std::map<Tap, LabelGrid> labels;

  const Tensor& at(Tap tap) const;
  bool has(Tap tap) const { return features.count(tap) != 0; }
};

class FeatureExtractor {
 public:
  struct Layer {
    Tensor weight;  // [K,C,3,3], f32
    Tensor bias;    // [K], f32
  };

  static constexpr std::array<std::int64_t, 4> kDefaultWidths = {64, 128, 256, 512};

  // Orthogonal filters (QR of a Gaussian matrix, one per conv), zero biases.
  static FeatureExtractor init_random(std::uint64_t seed,
                                      std::array<std::int64_t, 4> widths = kDefaultWidths);
  static FeatureExtractor from_layers(std::vector<Layer> layers, std::string provenance);
  static FeatureExtractor load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  // image: [3,H,W], H and W divisible by 8. Runs up to the deepest requested
  // tap; the pyramid carries the requested taps only.
  FeaturePyramid extract(const Tensor& image, std::span<const Tap> taps) const;
  // Same, but attaches labels downsampled to every returned tap.
  FeaturePyramid extract(const Tensor& image, std::span<const Tap> taps,
                         const LabelGrid& labels) const;

  const Layer& layer(Tap tap) const { return layers_[static_cast<std::size_t>(tap_index(tap))]; }
  std::int64_t channels(Tap tap) const { return layer(tap).weight.dim(0); }
  const std::string& provenance() const { return provenance_; }

 private:
  const std::vector<Layer>& layers_for(DType dtype) const;

  std::vector<Layer> layers_;
  std::vector<Layer> layers_f64_;
  std::string provenance_;
};

// Per-group extraction for 9-channel maps: albedo, encoded normal, specular
// and roughness broadcast to 3 channels, concatenated per tap.
FeaturePyramid extract_maps(const FeatureExtractor& extractor, const MaterialMaps& maps,
                            std::span<const Tap> taps);

}  // namespace matx
