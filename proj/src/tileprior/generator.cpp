#include <array>
#include <cmath>

#include "json.hpp"
#include "matx/tileprior.hpp"

namespace matx {

namespace {

constexpr std::int64_t kDefaultSchedule[] = {256, 256, 128, 128, 64, 64, 32, 32, 16, 16};
constexpr double kInitNoiseStrength = 0.3;

Tensor gaussian(const Shape& shape, double stddev, Philox& rng, DType dt) {
  std::vector<double> v(static_cast<std::size_t>(shape_numel(shape)));
  for (auto& x : v) x = rng.normal() * stddev;
  return Tensor::from_values(shape, v, dt);
}

std::vector<Tensor> clone_all(const std::vector<Tensor>& v, bool requires_grad) {
  std::vector<Tensor> out;
  for (const auto& t : v) out.push_back(t.clone(requires_grad));
  return out;
}

std::vector<Tensor> convert_all(const std::vector<Tensor>& v, DType dt) {
  std::vector<Tensor> out;
  for (const auto& t : v) out.push_back(t.to(dt).detach());
  return out;
}

void expect_shape(const Tensor& t, const Shape& want, const std::string& what) {
  if (!t.defined() || t.shape() != want)
    throw ShapeError(what + ": expected shape " + to_string(want) + ", got " +
                     (t.defined() ? to_string(t.shape()) : std::string("undefined")));
}

}  // namespace

Tensor synthesize_raw(const GeneratorWeights& w, const LatentTheta& t);

namespace {

// Pre-squash values of a plausible material: mid albedo and roughness, flat
// normals, dielectric F0 = 0.04.
constexpr double kRawPrior[9] = {0, 0, 0, 0, 0, 0, -3.1780538303479458, -3.1780538303479458,
                                 -3.1780538303479458};
constexpr double kRawSpread[9] = {0.5, 0.5, 0.5, 0.25, 0.25, 0.5, 0.5, 0.5, 0.5};

// Rescales each output channel of every toRGB layer so the initial latent
// yields kRawSpread spatial deviation around kRawPrior. The skip sum is linear
// in the toRGB parameters, so this is exact.
void calibrate_output(GeneratorWeights& w) {
  const GeneratorConfig& c = w.config;
  const Tensor raw = synthesize_raw(w, LatentTheta::init(c, c.seed, w.dtype()));
  const auto v = raw.values();
  const auto hw = static_cast<std::size_t>(raw.height() * raw.width());
  std::array<double, 9> k{}, mu{};
  for (std::size_t ch = 0; ch < 9; ++ch) {
    double s = 0, sq = 0;
    for (std::size_t i = 0; i < hw; ++i) {
      const double x = v[ch * hw + i];
      s += x;
      sq += x * x;
    }
    mu[ch] = s / static_cast<double>(hw);
    const double sd = std::sqrt(std::max(0.0, sq / static_cast<double>(hw) - mu[ch] * mu[ch]));
    k[ch] = sd > 1e-12 ? kRawSpread[ch] / sd : 1.0;
  }
  for (std::size_t b = 0; b < w.rgb_weight.size(); ++b) {
    auto rw = w.rgb_weight[b].values();
    const std::size_t per = rw.size() / 9;
    for (std::size_t ch = 0; ch < 9; ++ch)
      for (std::size_t j = 0; j < per; ++j) rw[ch * per + j] *= k[ch];
    w.rgb_weight[b].set_values(rw);
    auto rb = w.rgb_bias[b].values();
    for (std::size_t ch = 0; ch < 9; ++ch) rb[ch] *= k[ch];
    if (b + 1 == w.rgb_weight.size())
      for (std::size_t ch = 0; ch < 9; ++ch) rb[ch] += kRawPrior[ch] - k[ch] * mu[ch];
    w.rgb_bias[b].set_values(rb);
  }
}

}  // namespace

int GeneratorConfig::blocks() const {
  int b = 1;
  while ((base << (b - 1)) < resolution) ++b;
  return b;
}

std::int64_t GeneratorConfig::block_channels(int block) const {
  if (!channels.empty()) return channels.at(static_cast<std::size_t>(block));
  return kDefaultSchedule[std::min<std::size_t>(static_cast<std::size_t>(block),
                                                std::size(kDefaultSchedule) - 1)];
}

double GeneratorConfig::style_gain(int block) const {
  return 1.0 / std::sqrt(static_cast<double>(block_channels(block)));
}

void GeneratorConfig::validate() const {
  auto pow2 = [](std::int64_t v) { return v > 0 && (v & (v - 1)) == 0; };
  if (!pow2(resolution)) throw Error("generator: resolution " + std::to_string(resolution) + " is not a power of two");
  if (!pow2(base) || base < 4) throw Error("generator: base resolution must be a power of two >= 4");
  if (resolution < base) throw Error("generator: resolution below base resolution");
  if (!channels.empty() && static_cast<int>(channels.size()) != blocks())
    throw Error("generator: channel schedule has " + std::to_string(channels.size()) +
                " entries for " + std::to_string(blocks()) + " blocks");
  for (auto c : channels)
    if (c < 1) throw Error("generator: channel widths must be positive");
}

std::string GeneratorConfig::to_json() const {
  nlohmann::json j;
  j["resolution"] = resolution;
  j["base"] = base;
  j["channels"] = channels;
  j["learn_noise_strength"] = learn_noise_strength;
  j["seed"] = seed;
  return j.dump();
}

GeneratorConfig GeneratorConfig::from_json(const std::string& text) {
  GeneratorConfig c;
  try {
    const auto j = nlohmann::json::parse(text);
    c.resolution = j.at("resolution").get<std::int64_t>();
    c.base = j.at("base").get<std::int64_t>();
    c.channels = j.at("channels").get<std::vector<std::int64_t>>();
    c.learn_noise_strength = j.at("learn_noise_strength").get<bool>();
    c.seed = j.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("generator config: ") + e.what());
  }
  c.validate();
  return c;
}

GeneratorWeights GeneratorWeights::random(const GeneratorConfig& config, DType dt) {
  config.validate();
  GeneratorWeights w;
  w.config = config;
  const int B = config.blocks();
  Philox base_rng(config.seed, streams::init, 0);
  w.base = gaussian({config.block_channels(0)}, 1.0, base_rng, dt);
  std::int64_t in = config.block_channels(0);
  // leaky_relu(0.2) gain
  const double gain = std::sqrt(2.0 / (1.0 + 0.2 * 0.2));
  for (int b = 0; b < B; ++b) {
    const std::int64_t out = config.block_channels(b);
    Philox rng(config.seed, streams::init, static_cast<std::uint32_t>(1 + b));
    w.conv_weight.push_back(gaussian({out, in, 3, 3}, gain / std::sqrt(double(in * 9)), rng, dt));
    w.conv_bias.push_back(Tensor::zeros({out}, dt));
    w.rgb_weight.push_back(gaussian({9, out, 1, 1}, 0.5 / std::sqrt(double(out)), rng, dt));
    w.rgb_bias.push_back(Tensor::zeros({9}, dt));
    w.noise_strength.push_back(Tensor::scalar(kInitNoiseStrength, dt));
    in = out;
  }
  calibrate_output(w);
  return w;
}

std::vector<Tensor> GeneratorWeights::parameters() const {
  std::vector<Tensor> p{base};
  for (std::size_t b = 0; b < conv_weight.size(); ++b) {
    p.push_back(conv_weight[b]);
    p.push_back(conv_bias[b]);
    p.push_back(rgb_weight[b]);
    p.push_back(rgb_bias[b]);
    if (config.learn_noise_strength) p.push_back(noise_strength[b]);
  }
  return p;
}

GeneratorWeights GeneratorWeights::clone(bool requires_grad) const {
  GeneratorWeights w;
  w.config = config;
  w.base = base.clone(requires_grad);
  w.conv_weight = clone_all(conv_weight, requires_grad);
  w.conv_bias = clone_all(conv_bias, requires_grad);
  w.rgb_weight = clone_all(rgb_weight, requires_grad);
  w.rgb_bias = clone_all(rgb_bias, requires_grad);
  w.noise_strength = clone_all(noise_strength, requires_grad && config.learn_noise_strength);
  return w;
}

GeneratorWeights GeneratorWeights::to(DType dt) const {
  GeneratorWeights w;
  w.config = config;
  w.base = base.to(dt).detach();
  w.conv_weight = convert_all(conv_weight, dt);
  w.conv_bias = convert_all(conv_bias, dt);
  w.rgb_weight = convert_all(rgb_weight, dt);
  w.rgb_bias = convert_all(rgb_bias, dt);
  w.noise_strength = convert_all(noise_strength, dt);
  return w;
}

LatentTheta LatentTheta::init(const GeneratorConfig& config, std::uint64_t seed, DType dt) {
  config.validate();
  LatentTheta t;
  for (int b = 0; b < config.blocks(); ++b) {
    const std::int64_t c = config.block_channels(b), r = config.block_resolution(b);
    t.style_scale.push_back(Tensor::full({c}, 1.0 / config.style_gain(b), dt));
    t.style_bias.push_back(Tensor::zeros({c}, dt));
    Philox rng(seed, streams::init, static_cast<std::uint32_t>(1000 + b));
    t.noise.push_back(gaussian({1, r, r}, 1.0, rng, dt));
  }
  return t;
}

std::vector<Tensor> LatentTheta::parameters() const {
  std::vector<Tensor> p;
  for (std::size_t b = 0; b < noise.size(); ++b) {
    p.push_back(style_scale[b]);
    p.push_back(style_bias[b]);
    p.push_back(noise[b]);
  }
  return p;
}

LatentTheta LatentTheta::clone(bool requires_grad) const {
  return {clone_all(style_scale, requires_grad), clone_all(style_bias, requires_grad),
          clone_all(noise, requires_grad)};
}

LatentTheta LatentTheta::to(DType dt) const {
  return {convert_all(style_scale, dt), convert_all(style_bias, dt), convert_all(noise, dt)};
}

void check_compatible(const GeneratorWeights& w, const LatentTheta& t) {
  const GeneratorConfig& c = w.config;
  const int B = c.blocks();
  if (t.blocks() != B || t.style_scale.size() != t.noise.size() ||
      t.style_bias.size() != t.noise.size())
    throw ShapeError("latent code has " + std::to_string(t.blocks()) + " blocks, generator has " +
                     std::to_string(B));
  if (static_cast<int>(w.conv_weight.size()) != B)
    throw ShapeError("generator weights have " + std::to_string(w.conv_weight.size()) +
                     " blocks, config expects " + std::to_string(B));
  std::int64_t in = c.block_channels(0);
  expect_shape(w.base, {in}, "generator base");
  for (int b = 0; b < B; ++b) {
    const std::int64_t ch = c.block_channels(b), r = c.block_resolution(b);
    const std::string blk = "block " + std::to_string(b);
    expect_shape(w.conv_weight[static_cast<std::size_t>(b)], {ch, in, 3, 3}, blk + " conv weight");
    expect_shape(w.conv_bias[static_cast<std::size_t>(b)], {ch}, blk + " conv bias");
    expect_shape(w.rgb_weight[static_cast<std::size_t>(b)], {9, ch, 1, 1}, blk + " toRGB weight");
    expect_shape(w.rgb_bias[static_cast<std::size_t>(b)], {9}, blk + " toRGB bias");
    expect_shape(w.noise_strength[static_cast<std::size_t>(b)], {}, blk + " noise strength");
    expect_shape(t.style_scale[static_cast<std::size_t>(b)], {ch}, blk + " style scale");
    expect_shape(t.style_bias[static_cast<std::size_t>(b)], {ch}, blk + " style bias");
    expect_shape(t.noise[static_cast<std::size_t>(b)], {1, r, r}, blk + " noise");
    in = ch;
  }
}

// Pre-squash 9-channel skip sum.
Tensor synthesize_raw(const GeneratorWeights& w, const LatentTheta& t) {
  const GeneratorConfig& c = w.config;
  Tensor x = broadcast_spatial(w.base, c.base, c.base);
  Tensor rgb;
  for (int b = 0; b < c.blocks(); ++b) {
    const auto i = static_cast<std::size_t>(b);
    if (b > 0) x = upsample2x(x, Upsample::bilinear_circular);
    x = conv2d(x, w.conv_weight[i], w.conv_bias[i], Padding::circular);
    const double g = c.style_gain(b);
    x = channel_affine(x, scale(t.style_scale[i], g), scale(t.style_bias[i], g));
    x = add(x, expand_channels(mul(t.noise[i], w.noise_strength[i]), x.channels()));
    x = leaky_relu(x, 0.2);
    const Tensor y = conv2d(x, w.rgb_weight[i], w.rgb_bias[i], Padding::circular);
    rgb = b == 0 ? y : add(upsample2x(rgb, Upsample::bilinear_circular), y);
  }
  return rgb;
}

MaterialMaps synthesize(const GeneratorWeights& w, const LatentTheta& t) {
  check_compatible(w, t);
  const Tensor rgb = synthesize_raw(w, t);
  MaterialMaps m;
  m.albedo = sigmoid(slice_channels(rgb, 0, 3));
  m.normal_xy = unit_disk_clamp(tanh(slice_channels(rgb, 3, 2)));
  m.roughness = sigmoid(slice_channels(rgb, 5, 1));
  m.specular = sigmoid(slice_channels(rgb, 6, 3));
  return m;
}

LatentTheta shift_noise(const LatentTheta& t, std::int64_t dx, std::int64_t dy) {
  LatentTheta out{t.style_scale, t.style_bias, {}};
  for (int b = 0; b < t.blocks(); ++b)
    out.noise.push_back(cyclic_shift(t.noise[static_cast<std::size_t>(b)], dx << b, dy << b));
  return out;
}

}  // namespace matx
