#include "matx/render.hpp"

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

namespace matx {

namespace {

void require_shape(const Tensor& t, const char* name, std::int64_t channels, std::int64_t n) {
  if (!t.defined()) throw Error(std::string("material maps: missing ") + name);
  const Shape want{channels, n, n};
  if (t.shape() != want)
    throw ShapeError(std::string("material maps: ") + name + " has shape " + to_string(t.shape()) +
                     ", expected " + to_string(want));
}

struct Geometry {
  Tensor lx, ly, lz;  // unit direction to the light, [1,H,W]
  Tensor inv_dist2;   // intensity / squared distance, [1,H,W]
};

Geometry geometry(std::int64_t n, const RenderConfig& cfg, DType dt) {
  const auto count = static_cast<std::size_t>(n * n);
  std::vector<double> lx(count), ly(count), lz(count), k(count);
  for (std::int64_t y = 0; y < n; ++y)
    for (std::int64_t x = 0; x < n; ++x) {
      const double dx = -texel_world(x, n, cfg.plane_extent);
      const double dy = -texel_world(y, n, cfg.plane_extent);
      const double dz = cfg.light_height;
      const double d2 = dx * dx + dy * dy + dz * dz;
      const double d = std::sqrt(d2);
      const auto i = static_cast<std::size_t>(y * n + x);
      lx[i] = dx / d;
      ly[i] = dy / d;
      lz[i] = dz / d;
      k[i] = cfg.light_intensity / d2;
    }
  const Shape s{1, n, n};
  return {Tensor::from_values(s, lx, dt), Tensor::from_values(s, ly, dt),
          Tensor::from_values(s, lz, dt), Tensor::from_values(s, k, dt)};
}

void check_finite(const Tensor& t, const char* term) {
  if (!debug_checks()) return;
  const auto v = t.values();
  const std::int64_t hw = t.height() * t.width();
  for (std::size_t i = 0; i < v.size(); ++i)
    if (!std::isfinite(v[i])) {
      const auto p = static_cast<std::int64_t>(i) % hw;
      throw Error(std::string("render: non-finite ") + term + " at pixel (y=" +
                  std::to_string(p / t.width()) + ", x=" + std::to_string(p % t.width()) + ")");
    }
}

}  // namespace

Tensor MaterialMaps::stack() const {
  const Tensor parts[] = {albedo, normal_xy, roughness, specular};
  return concat_channels(parts);
}

MaterialMaps MaterialMaps::from_stack(const Tensor& s) {
  if (!s.defined() || s.rank() != 3 || s.channels() != 9)
    throw ShapeError("material maps: expected a 9-channel stack, got " +
                     (s.defined() ? to_string(s.shape()) : std::string("undefined")));
  return {slice_channels(s, 0, 3), slice_channels(s, 3, 2), slice_channels(s, 5, 1),
          slice_channels(s, 6, 3)};
}

MaterialMaps MaterialMaps::constant(std::int64_t size, double albedo, double roughness,
                                    double specular, DType dt) {
  return {Tensor::full({3, size, size}, albedo, dt), Tensor::zeros({2, size, size}, dt),
          Tensor::full({1, size, size}, roughness, dt), Tensor::full({3, size, size}, specular, dt)};
}

MaterialMaps MaterialMaps::detach() const {
  return {albedo.detach(), normal_xy.detach(), roughness.detach(), specular.detach()};
}

MaterialMaps MaterialMaps::to(DType dt) const {
  return {albedo.to(dt), normal_xy.to(dt), roughness.to(dt), specular.to(dt)};
}

void MaterialMaps::validate(bool power_of_two) const {
  if (!albedo.defined() || albedo.rank() != 3)
    throw ShapeError("material maps: albedo must be [3,H,W]");
  const std::int64_t n = albedo.height();
  if (albedo.width() != n) throw ShapeError("material maps: maps must be square");
  if (n < 1 || (power_of_two && (n & (n - 1)) != 0))
    throw ShapeError("material maps: size " + std::to_string(n) + " is not a power of two");
  require_shape(albedo, "albedo", 3, n);
  require_shape(normal_xy, "normal", 2, n);
  require_shape(roughness, "roughness", 1, n);
  require_shape(specular, "specular", 3, n);
  for (const Tensor* t : {&albedo, &normal_xy, &roughness, &specular})
    if (t->dtype() != albedo.dtype()) throw Error("material maps: mixed precision");
  const std::pair<const char*, const Tensor*> named[] = {
      {"albedo", &albedo}, {"normal", &normal_xy}, {"roughness", &roughness},
      {"specular", &specular}};
  for (const auto& [name, t] : named)
    if (t->has_nonfinite()) throw Error(std::string("material maps: non-finite ") + name);
}

void RenderConfig::validate() const {
  if (!(light_height > 0)) throw Error("render config: light height must be > 0");
  if (!(light_intensity > 0)) throw Error("render config: intensity must be > 0");
  if (!(plane_extent > 0)) throw Error("render config: plane extent must be > 0");
  if (!(gamma > 0)) throw Error("render config: gamma must be > 0");
  if (tile_repeat < 1) throw Error("render config: tile repeat must be >= 1");
}

double texel_world(std::int64_t index, std::int64_t n, double extent) {
  return (static_cast<double>(index) / static_cast<double>(n) - 0.5) * extent;
}

Tensor render_radiance(const MaterialMaps& maps, const RenderConfig& cfg) {
  maps.validate(false);
  cfg.validate();
  const std::int64_t n = maps.size();
  const Geometry g = geometry(n, cfg, maps.dtype());
  constexpr double pi = std::numbers::pi;

  const Tensor nx = slice_channels(maps.normal_xy, 0, 1);
  const Tensor ny = slice_channels(maps.normal_xy, 1, 1);
  const Tensor nz = sqrt(clamp_min(add_scalar(scale(add(mul(nx, nx), mul(ny, ny)), -1.0), 1.0), 0.0));
  // View and light coincide, so the half vector is l and n.h = n.v = n.l.
  const Tensor c = clamp_min(add(add(mul(nx, g.lx), mul(ny, g.ly)), mul(nz, g.lz)), 1e-4);
  const Tensor c2 = mul(c, c);

  const Tensor r = clamp_min(maps.roughness, kMinRoughness);
  const Tensor a2 = pow(r, 4.0);  // alpha = r^2
  const Tensor denom = add_scalar(mul(c2, add_scalar(a2, -1.0)), 1.0);
  const Tensor D = div(a2, scale(mul(denom, denom), pi));
  check_finite(D, "distribution D");
  // Height-correlated Smith G with l = v.
  const Tensor G = div(c, sqrt(add(a2, mul(add_scalar(scale(a2, -1.0), 1.0), c2))));
  check_finite(G, "geometry G");

  // Fresnel reduces to F0 because h.v = 1.
  const Tensor kd = mul(scale(c, 1.0 / pi), g.inv_dist2);
  const Tensor ks = div(mul(mul(D, G), g.inv_dist2), scale(c, 4.0));
  check_finite(ks, "specular lobe");

  const Tensor radiance =
      add(mul(maps.albedo, expand_channels(kd, 3)), mul(maps.specular, expand_channels(ks, 3)));
  check_finite(radiance, "radiance");
  return radiance;
}

Tensor render(const MaterialMaps& maps, const RenderConfig& cfg) {
  if (cfg.tile_repeat > 1) {
    RenderConfig single = cfg;
    single.tile_repeat = 1;
    return tile_render(maps, single, cfg.tile_repeat);
  }
  const Tensor out = pow(clamp(render_radiance(maps, cfg), 0.0, 1.0), 1.0 / cfg.gamma);
  check_finite(out, "gamma output");
  return out;
}

Tensor tile_render(const MaterialMaps& maps, const RenderConfig& cfg, int k) {
  if (k < 1) throw Error("tile_render: k must be >= 1");
  RenderConfig big = cfg;
  big.tile_repeat = 1;
  if (k == 1) return render(maps, big);
  big.plane_extent = cfg.plane_extent * k;
  const MaterialMaps tiled{tile(maps.albedo, k), tile(maps.normal_xy, k), tile(maps.roughness, k),
                           tile(maps.specular, k)};
  return render(tiled, big);
}

Tensor decode_normal(const Tensor& rgb) {
  if (!rgb.defined() || rgb.rank() != 3 || rgb.channels() != 3)
    throw ShapeError("decode_normal: expected [3,H,W]");
  return add_scalar(scale(slice_channels(rgb, 0, 2), 2.0), -1.0);
}

Tensor encode_normal(const Tensor& xy) {
  if (!xy.defined() || xy.rank() != 3 || xy.channels() != 2)
    throw ShapeError("encode_normal: expected [2,H,W]");
  const Tensor x = slice_channels(xy, 0, 1);
  const Tensor y = slice_channels(xy, 1, 1);
  const Tensor z = sqrt(clamp_min(add_scalar(scale(add(mul(x, x), mul(y, y)), -1.0), 1.0), 0.0));
  const Tensor parts[] = {x, y, z};
  return scale(add_scalar(concat_channels(parts), 1.0), 0.5);
}

}  // namespace matx
