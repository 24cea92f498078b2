#pragma once

// Feature statistics and distances: masked sample gathering, erosion,
// resampled sliced Wasserstein, sliced Cramer, Gram matrices and the plain
// feature (content) loss.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "matx/featnet.hpp"
#include "matx/gradtensor.hpp"
#include "matx/rng.hpp"

namespace matx {

struct Mask {
  std::int64_t height = 0, width = 0;
  std::vector<std::uint8_t> bits;  // 0/1, row-major

  static Mask full(std::int64_t height, std::int64_t width);
  static Mask from_labels(const LabelGrid& labels, std::uint8_t label);
  bool at(std::int64_t y, std::int64_t x) const {
    return bits[static_cast<std::size_t>(y * width + x)] != 0;
  }
  std::int64_t count() const;
  bool operator==(const Mask&) const = default;
};

// Square (2r+1)^2 structuring element. Pixels whose window leaves the grid
// are removed.
Mask erode(const Mask& mask, int radius);

struct SampleSet {
  Tensor values;  // [n,C]
  std::int64_t n() const { return values.defined() ? values.dim(0) : 0; }
  bool empty() const { return n() == 0; }
};

// One channel vector per set pixel, raster order.
SampleSet gather(const Tensor& features, const Mask& mask);

struct ProjectionSet {
  Tensor directions;  // [D,C], unit rows
  std::int64_t count() const { return directions.dim(0); }

  // Gaussian rows normalised to unit length.
  static ProjectionSet random(std::int64_t count, std::int64_t channels, Philox& rng, DType dtype);
  static ProjectionSet axis(std::int64_t channels, std::int64_t axis, DType dtype);
};

enum class LossKind { sw, cramer, gram };
const char* to_string(LossKind kind);
LossKind parse_loss_kind(std::string_view name);

// Mean over directions of (1/k) ||sort(u) - sort(U(v))||_1, where the larger
// side is subsampled without replacement to the smaller count k. Gradient
// reaches a only. nullopt when either side is empty.
std::optional<Tensor> sw_loss(const SampleSet& a, const SampleSet& b, const ProjectionSet& proj,
                              Philox& rng);

// Mean over directions of the integral of the squared difference between
// the empirical CDFs of the projected samples.
std::optional<Tensor> cramer_loss(const SampleSet& a, const SampleSet& b,
                                  const ProjectionSet& proj);

// (1/n) sum over selected pixels of f f^T. nullopt for an empty mask.
std::optional<Tensor> gram(const Tensor& features, const Mask* mask = nullptr);
std::optional<Tensor> gram(const SampleSet& samples);

struct TapWeight {
  Tap tap;
  double weight;
};

// sum over taps of weight * mean |p - q|.
Tensor feature_loss(const FeaturePyramid& p, const FeaturePyramid& q,
                    std::span<const TapWeight> taps);

}  // namespace matx
