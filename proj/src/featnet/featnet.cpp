#include "matx/featnet.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include "json.hpp"

#include "matx/checkpoint.hpp"
#include "matx/rng.hpp"

namespace matx {

namespace {

constexpr const char* kTapNames[] = {"s1c1", "s1c2", "s2c1", "s2c2",
                                     "s3c1", "s3c2", "s4c1", "s4c2"};

// rows x cols matrix with orthonormal rows (rows <= cols) or orthonormal
// columns (rows > cols).
Eigen::MatrixXd orthogonal(std::int64_t rows, std::int64_t cols, Philox& rng) {
  const std::int64_t big = std::max(rows, cols), small = std::min(rows, cols);
  Eigen::MatrixXd g(big, small);
  for (std::int64_t j = 0; j < small; ++j)
    for (std::int64_t i = 0; i < big; ++i) g(i, j) = rng.normal();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(big, small);
  const Eigen::MatrixXd r = qr.matrixQR().topLeftCorner(small, small);
  for (std::int64_t j = 0; j < small; ++j)
    if (r(j, j) < 0) q.col(j) = -q.col(j);
  if (rows >= cols) return q;
  return q.transpose();
}

}  // namespace

const char* tap_name(Tap tap) { return kTapNames[tap_index(tap)]; }

Tap parse_tap(std::string_view name) {
  for (Tap t : kAllTaps)
    if (name == tap_name(t)) return t;
  throw Error("unknown feature tap '" + std::string(name) + "'");
}

int tap_scale(Tap tap) { return tap_index(tap) / 2 + 1; }

LabelGrid LabelGrid::uniform(std::int64_t height, std::int64_t width, std::uint8_t label) {
  return {height, width, std::vector<std::uint8_t>(static_cast<std::size_t>(height * width), label)};
}

bool LabelGrid::contains(std::uint8_t label) const {
  return std::find(labels.begin(), labels.end(), label) != labels.end();
}

LabelGrid downsample_labels(const LabelGrid& in, Tap tap) {
  const std::int64_t stride = std::int64_t{1} << (tap_scale(tap) - 1);
  LabelGrid out;
  out.height = in.height / stride;
  out.width = in.width / stride;
  out.labels.resize(static_cast<std::size_t>(out.height * out.width));
  for (std::int64_t y = 0; y < out.height; ++y)
    for (std::int64_t x = 0; x < out.width; ++x)
      out.labels[static_cast<std::size_t>(y * out.width + x)] = in.at(y * stride, x * stride);
  return out;
}

const Tensor& FeaturePyramid::at(Tap tap) const {
  auto it = features.find(tap);
  if (it == features.end())
    throw Error(std::string("feature pyramid has no tap ") + tap_name(tap));
  return it->second;
}

FeatureExtractor FeatureExtractor::init_random(std::uint64_t seed,
                                               std::array<std::int64_t, 4> widths) {
  std::vector<Layer> layers;
  std::int64_t in = 3;
  for (int i = 0; i < 8; ++i) {
    const std::int64_t out = widths[static_cast<std::size_t>(i / 2)];
    Philox rng(seed, streams::init, static_cast<std::uint32_t>(i));
    const Eigen::MatrixXd w = orthogonal(out, in * 9, rng);
    std::vector<float> values(static_cast<std::size_t>(out * in * 9));
    for (std::int64_t k = 0; k < out; ++k)
      for (std::int64_t j = 0; j < in * 9; ++j)
        values[static_cast<std::size_t>(k * in * 9 + j)] = static_cast<float>(w(k, j));
    layers.push_back({Tensor::from_floats({out, in, 3, 3}, values, DType::f32),
                      Tensor::zeros({out}, DType::f32)});
    in = out;
  }
  return from_layers(std::move(layers), "seeded_random(" + std::to_string(seed) + ")");
}

FeatureExtractor FeatureExtractor::from_layers(std::vector<Layer> layers, std::string provenance) {
  if (layers.size() != 8) throw ShapeError("feature extractor needs 8 conv layers");
  std::int64_t in = 3;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    auto& l = layers[i];
    if (l.weight.rank() != 4 || l.weight.dim(1) != in || l.weight.dim(2) != 3 ||
        l.weight.dim(3) != 3)
      throw ShapeError(std::string("feature extractor layer ") + kTapNames[i] +
                       ": weight shape " + to_string(l.weight.shape()) + " does not take " +
                       std::to_string(in) + " input channels with 3x3 kernels");
    if (l.bias.shape() != Shape{l.weight.dim(0)})
      throw ShapeError(std::string("feature extractor layer ") + kTapNames[i] + ": bias shape " +
                       to_string(l.bias.shape()));
    if (i % 2 == 1 && l.weight.dim(0) != layers[i - 1].weight.dim(0))
      throw ShapeError(std::string("feature extractor layer ") + kTapNames[i] +
                       ": width differs from the first conv of its scale");
    l.weight = l.weight.to(DType::f32).detach();
    l.bias = l.bias.to(DType::f32).detach();
    in = l.weight.dim(0);
  }
  FeatureExtractor fx;
  for (const auto& l : layers) fx.layers_f64_.push_back({l.weight.to(DType::f64), l.bias.to(DType::f64)});
  fx.layers_ = std::move(layers);
  fx.provenance_ = std::move(provenance);
  return fx;
}

FeatureExtractor FeatureExtractor::load(const std::filesystem::path& path) {
  const Checkpoint ckpt = load_checkpoint(path, "featnet");
  std::vector<Layer> layers;
  for (Tap t : kAllTaps) {
    const std::string name = tap_name(t);
    layers.push_back({ckpt.get(name + ".weight"), ckpt.get(name + ".bias")});
  }
  return from_layers(std::move(layers), "loaded(" + path.string() + ")");
}

void FeatureExtractor::save(const std::filesystem::path& path) const {
  Checkpoint ckpt;
  ckpt.kind = "featnet";
  nlohmann::json meta;
  meta["provenance"] = provenance_;
  for (const auto& l : layers_) meta["widths"].push_back(l.weight.dim(0));
  ckpt.meta = meta.dump();
  for (Tap t : kAllTaps) {
    const std::string name = tap_name(t);
    ckpt.add(name + ".weight", layer(t).weight);
    ckpt.add(name + ".bias", layer(t).bias);
  }
  save_checkpoint(path, ckpt);
}

const std::vector<FeatureExtractor::Layer>& FeatureExtractor::layers_for(DType dtype) const {
  return dtype == DType::f32 ? layers_ : layers_f64_;
}

FeaturePyramid FeatureExtractor::extract(const Tensor& image, std::span<const Tap> taps) const {
  if (!image.defined() || image.rank() != 3 || image.channels() != 3)
    throw ShapeError("extract: expected a [3,H,W] image, got " +
                     (image.defined() ? to_string(image.shape()) : std::string("undefined")));
  if (image.height() % 8 != 0 || image.width() % 8 != 0 || image.height() == 0)
    throw ShapeError("extract: height and width must be positive multiples of 8, got " +
                     to_string(image.shape()));
  FeaturePyramid out;
  if (taps.empty()) return out;
  const int deepest = tap_index(*std::max_element(taps.begin(), taps.end()));
  const auto& layers = layers_for(image.dtype());
  Tensor x = image;
  for (int i = 0; i <= deepest; ++i) {
    if (i > 0 && i % 2 == 0) x = avgpool2x(x);
    const auto& l = layers[static_cast<std::size_t>(i)];
    x = relu(conv2d(x, l.weight, l.bias, Padding::zero));
    const Tap t = kAllTaps[static_cast<std::size_t>(i)];
    if (std::find(taps.begin(), taps.end(), t) != taps.end()) out.features[t] = x;
  }
  return out;
}

FeaturePyramid FeatureExtractor::extract(const Tensor& image, std::span<const Tap> taps,
                                         const LabelGrid& labels) const {
  if (labels.height != image.height() || labels.width != image.width())
    throw ShapeError("extract: label map is " + std::to_string(labels.height) + "x" +
                     std::to_string(labels.width) + " but the image is " +
                     to_string(image.shape()));
  FeaturePyramid out = extract(image, taps);
  for (const auto& [tap, f] : out.features) out.labels[tap] = downsample_labels(labels, tap);
  return out;
}

FeaturePyramid extract_maps(const FeatureExtractor& fx, const MaterialMaps& maps,
                            std::span<const Tap> taps) {
  const Tensor groups[] = {maps.albedo, encode_normal(maps.normal_xy), maps.specular,
                           expand_channels(maps.roughness, 3)};
  std::vector<FeaturePyramid> parts;
  for (const Tensor& g : groups) parts.push_back(fx.extract(g, taps));
  FeaturePyramid out;
  for (Tap t : taps) {
    const Tensor per_group[] = {parts[0].at(t), parts[1].at(t), parts[2].at(t), parts[3].at(t)};
    out.features[t] = concat_channels(per_group);
  }
  return out;
}

}  // namespace matx
