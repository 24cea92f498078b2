#include <algorithm>
#include <cmath>
#include <fstream>

#include "json.hpp"
#include "matx/checkpoint.hpp"
#include "matx/tileprior.hpp"

namespace matx {

MaterialMaps tile(const MaterialMaps& m, int k) {
  if (k < 1) throw Error("tile: k must be >= 1");
  return {tile(m.albedo, k), tile(m.normal_xy, k), tile(m.roughness, k), tile(m.specular, k)};
}

MaterialMaps crop(const MaterialMaps& m, std::int64_t y0, std::int64_t x0, std::int64_t size) {
  return {crop_toroidal(m.albedo, y0, x0, size, size), crop_toroidal(m.normal_xy, y0, x0, size, size),
          crop_toroidal(m.roughness, y0, x0, size, size),
          crop_toroidal(m.specular, y0, x0, size, size)};
}

MaterialMaps random_crop(const MaterialMaps& m, std::int64_t size, Philox& rng) {
  const std::int64_t extent = 2 * m.size();
  if (size < 1 || size > extent)
    throw Error("random_crop: crop size " + std::to_string(size) + " exceeds the 2x2 tile extent " +
                std::to_string(extent));
  const auto span = static_cast<std::uint64_t>(extent - size + 1);
  const auto y0 = static_cast<std::int64_t>(rng.below(span));
  const auto x0 = static_cast<std::int64_t>(rng.below(span));
  return crop(m, y0, x0, size);
}

double seam_metric(const Tensor& map) {
  if (!map.defined() || map.rank() != 3) throw ShapeError("seam_metric: expected [C,H,W]");
  const std::int64_t C = map.channels(), H = map.height(), W = map.width();
  const auto v = map.values();
  auto at = [&](std::int64_t c, std::int64_t y, std::int64_t x) {
    return v[static_cast<std::size_t>((c * H + y) * W + x)];
  };
  auto p99 = [](std::vector<double>& d) {
    if (d.empty()) return 0.0;
    const auto k = static_cast<std::size_t>(std::floor(0.99 * static_cast<double>(d.size() - 1)));
    std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k), d.end());
    return d[k];
  };
  double worst = -std::numeric_limits<double>::infinity();
  std::vector<double> interior;
  for (std::int64_t c = 0; c < C; ++c) {
    if (W > 1) {
      interior.clear();
      double wrap = 0;
      for (std::int64_t y = 0; y < H; ++y) {
        for (std::int64_t x = 0; x + 1 < W; ++x) interior.push_back(std::abs(at(c, y, x + 1) - at(c, y, x)));
        wrap += std::abs(at(c, y, 0) - at(c, y, W - 1));
      }
      worst = std::max(worst, wrap / static_cast<double>(H) - p99(interior));
    }
    if (H > 1) {
      interior.clear();
      double wrap = 0;
      for (std::int64_t x = 0; x < W; ++x) {
        for (std::int64_t y = 0; y + 1 < H; ++y) interior.push_back(std::abs(at(c, y + 1, x) - at(c, y, x)));
        wrap += std::abs(at(c, 0, x) - at(c, H - 1, x));
      }
      worst = std::max(worst, wrap / static_cast<double>(W) - p99(interior));
    }
  }
  return std::isfinite(worst) ? worst : 0.0;
}

double SeamReport::worst() const { return std::max({albedo, normal, roughness, specular}); }

SeamReport seam_metric(const MaterialMaps& m) {
  return {seam_metric(m.albedo), seam_metric(m.normal_xy), seam_metric(m.roughness),
          seam_metric(m.specular)};
}

namespace {

void add_weights(Checkpoint& c, const GeneratorWeights& w, const std::string& prefix) {
  c.add(prefix + "base", w.base);
  for (std::size_t b = 0; b < w.conv_weight.size(); ++b) {
    const std::string p = prefix + "block" + std::to_string(b) + ".";
    c.add(p + "conv.weight", w.conv_weight[b]);
    c.add(p + "conv.bias", w.conv_bias[b]);
    c.add(p + "rgb.weight", w.rgb_weight[b]);
    c.add(p + "rgb.bias", w.rgb_bias[b]);
    c.add(p + "noise_strength", w.noise_strength[b]);
  }
}

GeneratorWeights read_weights(const Checkpoint& c, const GeneratorConfig& config,
                              const std::string& prefix) {
  GeneratorWeights w;
  w.config = config;
  w.base = c.get(prefix + "base");
  for (int b = 0; b < config.blocks(); ++b) {
    const std::string p = prefix + "block" + std::to_string(b) + ".";
    w.conv_weight.push_back(c.get(p + "conv.weight"));
    w.conv_bias.push_back(c.get(p + "conv.bias"));
    w.rgb_weight.push_back(c.get(p + "rgb.weight"));
    w.rgb_bias.push_back(c.get(p + "rgb.bias"));
    w.noise_strength.push_back(c.get(p + "noise_strength"));
  }
  return w;
}

Checkpoint bundle_checkpoint(const ThetaBundle& bundle) {
  check_compatible(bundle.weights, bundle.theta);
  Checkpoint c;
  c.kind = "theta";
  c.meta = bundle.weights.config.to_json();
  add_weights(c, bundle.weights, "generator.");
  for (int b = 0; b < bundle.theta.blocks(); ++b) {
    const auto i = static_cast<std::size_t>(b);
    const std::string p = "theta.block" + std::to_string(b) + ".";
    c.add(p + "style_scale", bundle.theta.style_scale[i]);
    c.add(p + "style_bias", bundle.theta.style_bias[i]);
    c.add(p + "noise", bundle.theta.noise[i]);
  }
  return c;
}

}  // namespace

void save_generator(const std::filesystem::path& path, const GeneratorWeights& w) {
  Checkpoint c;
  c.kind = "generator";
  c.meta = w.config.to_json();
  add_weights(c, w, "");
  save_checkpoint(path, c);
}

GeneratorWeights load_generator(const std::filesystem::path& path) {
  const Checkpoint c = load_checkpoint(path, "generator");
  const GeneratorConfig config = GeneratorConfig::from_json(c.meta);
  GeneratorWeights w = read_weights(c, config, "");
  check_compatible(w, LatentTheta::init(config, 0));
  return w;
}

std::string serialize_bundle(const ThetaBundle& bundle) {
  return serialize_checkpoint(bundle_checkpoint(bundle));
}

void save_bundle(const std::filesystem::path& path, const ThetaBundle& bundle) {
  save_checkpoint(path, bundle_checkpoint(bundle));
}

ThetaBundle load_bundle(const std::filesystem::path& path) {
  const Checkpoint c = load_checkpoint(path, "theta");
  const GeneratorConfig config = GeneratorConfig::from_json(c.meta);
  ThetaBundle out{read_weights(c, config, "generator."), {}};
  for (int b = 0; b < config.blocks(); ++b) {
    const std::string p = "theta.block" + std::to_string(b) + ".";
    out.theta.style_scale.push_back(c.get(p + "style_scale"));
    out.theta.style_bias.push_back(c.get(p + "style_bias"));
    out.theta.noise.push_back(c.get(p + "noise"));
  }
  check_compatible(out.weights, out.theta);
  return out;
}

}  // namespace matx
