#pragma once

// Material maps and the co-located point-light GGX renderer.

#include <cstdint>

#include "matx/gradtensor.hpp"

namespace matx {

inline constexpr double kMinRoughness = 0.045;
// A flat 0.8-albedo diffuse material renders to 0.75 (gamma 2.2) beneath the
// light at unit height: 0.75^2.2 * pi / 0.8.
inline constexpr double kDefaultIntensity = 2.0854254303491726;

struct MaterialMaps {
  Tensor albedo;     // [3,H,W] linear, [0,1]
  Tensor normal_xy;  // [2,H,W] tangent-space x,y in [-1,1]
  Tensor roughness;  // [1,H,W]
  Tensor specular;   // [3,H,W] Fresnel F0

  std::int64_t size() const { return albedo.height(); }
  DType dtype() const { return albedo.dtype(); }

  // 9 channels: albedo(3), normal(2), roughness(1), specular(3).
  Tensor stack() const;
  static MaterialMaps from_stack(const Tensor& stacked);
  static MaterialMaps constant(std::int64_t size, double albedo, double roughness,
                               double specular, DType dtype);

  MaterialMaps detach() const;
  MaterialMaps to(DType dtype) const;
  // Throws ShapeError/Error describing the first violated invariant. The
  // renderer accepts any square size (tiled previews are not powers of two).
  void validate(bool power_of_two = true) const;
};

struct RenderConfig {
  double light_height = 1.0;
  double light_intensity = kDefaultIntensity;
  double plane_extent = 1.0;
  double gamma = 2.2;
  int tile_repeat = 1;

  void validate() const;
};

// Linear radiance before clamping, [3,H,W].
Tensor render_radiance(const MaterialMaps& maps, const RenderConfig& config);
// Display image: clamp(radiance, 0, 1)^(1/gamma).
Tensor render(const MaterialMaps& maps, const RenderConfig& config);
// Renders the k x k toroidal repetition of maps on a plane k times larger.
Tensor tile_render(const MaterialMaps& maps, const RenderConfig& config, int k);

// Texel (y,x) of an n x n map on a plane of the given extent sits at
// world ((x/n - 1/2) * extent, (y/n - 1/2) * extent, 0); the light and camera
// hover at (0, 0, light_height).
double texel_world(std::int64_t index, std::int64_t n, double extent);

Tensor decode_normal(const Tensor& rgb);
Tensor encode_normal(const Tensor& xy);

}  // namespace matx
