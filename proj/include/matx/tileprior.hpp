#pragma once

// Tileable style-based generator. Every conv is 3x3 circular and every
// upsample is circular-bilinear, and the base input is constant per channel,
// so outputs are seamless on the torus by construction.
//
// Block b (0-based) runs at base * 2^b:
//   x = (b == 0 ? base : upsample(x)); x = conv(x);
//   x = x * (gain_b * scale_b) + gain_b * bias_b;
//   x = x + strength_b * noise_b; x = leaky_relu(x, 0.2)
// and a 1x1 toRGB projection of x is added to the upsampled skip sum.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "matx/gradtensor.hpp"
#include "matx/render.hpp"
#include "matx/rng.hpp"

namespace matx {

struct GeneratorConfig {
  std::int64_t resolution = 256;
  std::int64_t base = 4;
  // Per-block widths; empty selects the default schedule
  // 256,256,128,128,64,64,32,32 truncated to blocks().
  std::vector<std::int64_t> channels;
  bool learn_noise_strength = true;
  std::uint64_t seed = 0;

  int blocks() const;
  std::int64_t block_resolution(int block) const { return base << block; }
  std::int64_t block_channels(int block) const;
  // Styles enter as gain * (scale, bias), gain = 1/sqrt(C_b), so one optimizer
  // step moves a wide block no more than a narrow one.
  double style_gain(int block) const;
  void validate() const;

  std::string to_json() const;
  static GeneratorConfig from_json(const std::string& text);
};

struct GeneratorWeights {
  GeneratorConfig config;
  Tensor base;                         // [C0], spatially constant input
  std::vector<Tensor> conv_weight;     // [C_b, C_{b-1}, 3, 3]
  std::vector<Tensor> conv_bias;       // [C_b]
  std::vector<Tensor> rgb_weight;      // [9, C_b, 1, 1]
  std::vector<Tensor> rgb_bias;        // [9]
  std::vector<Tensor> noise_strength;  // rank-0

  static GeneratorWeights random(const GeneratorConfig& config, DType dtype = DType::f32);
  std::vector<Tensor> parameters() const;
  GeneratorWeights clone(bool requires_grad = false) const;
  GeneratorWeights to(DType dtype) const;
  DType dtype() const { return base.dtype(); }
};

struct LatentTheta {
  std::vector<Tensor> style_scale;  // [C_b]
  std::vector<Tensor> style_bias;   // [C_b]
  std::vector<Tensor> noise;        // [1, R_b, R_b]

  // Unit effective scales, zero biases, standard normal noise from the init
  // stream.
  static LatentTheta init(const GeneratorConfig& config, std::uint64_t seed,
                          DType dtype = DType::f32);
  std::vector<Tensor> parameters() const;
  LatentTheta clone(bool requires_grad = false) const;
  LatentTheta to(DType dtype) const;
  int blocks() const { return static_cast<int>(noise.size()); }
};

void check_compatible(const GeneratorWeights& weights, const LatentTheta& theta);

MaterialMaps synthesize(const GeneratorWeights& weights, const LatentTheta& theta);

// Shifts block-b noise by (dx * 2^b, dy * 2^b): moves the output by
// (dx, dy) base cells, i.e. (dx, dy) * resolution / base texels.
LatentTheta shift_noise(const LatentTheta& theta, std::int64_t dx, std::int64_t dy);

// k x k toroidal repetition of every map.
MaterialMaps tile(const MaterialMaps& maps, int k);
// Crop of the toroidally repeated maps at (y0, x0).
MaterialMaps crop(const MaterialMaps& maps, std::int64_t y0, std::int64_t x0, std::int64_t size);
// Crop at a uniform offset inside the 2x2 tile.
MaterialMaps random_crop(const MaterialMaps& maps, std::int64_t size, Philox& rng);

// Seam statistic of one [C,H,W] map: for each channel and axis, the mean
// |difference| across the wrap line minus the 99th percentile of interior
// |forward differences|; the maximum is reported. <= 0 reads as seamless.
double seam_metric(const Tensor& map);
struct SeamReport {
  double albedo, normal, roughness, specular;
  double worst() const;
};
SeamReport seam_metric(const MaterialMaps& maps);

void save_generator(const std::filesystem::path& path, const GeneratorWeights& weights);
GeneratorWeights load_generator(const std::filesystem::path& path);

// A latent code together with the generator it belongs to.
struct ThetaBundle {
  GeneratorWeights weights;
  LatentTheta theta;
};
std::string serialize_bundle(const ThetaBundle& bundle);
void save_bundle(const std::filesystem::path& path, const ThetaBundle& bundle);
ThetaBundle load_bundle(const std::filesystem::path& path);

}  // namespace matx
