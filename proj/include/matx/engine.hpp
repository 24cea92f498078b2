#pragma once

// Projection of material maps into the generator's latent space and
// statistics-driven appearance transfer from target photographs.

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "matx/featnet.hpp"
#include "matx/render.hpp"
#include "matx/statloss.hpp"
#include "matx/tileprior.hpp"

namespace matx {

// Bad user input: unknown labels, out-of-range targets, shape mismatches.
struct InputError : Error {
  using Error::Error;
};

// Rejected configuration document; line and column are 1-based, 0 if unknown.
struct ConfigError : Error {
  ConfigError(const std::string& what, int line, int column);
  int line = 0, column = 0;
};

// "Label X of the input takes its statistics from label Z of target Y".
struct TransferRule {
  int input_label = 0;
  int target_index = 0;
  int target_label = 0;

  // "IN:TI:TL", three non-negative integers.
  static TransferRule parse(std::string_view text);
  std::string to_string() const;
  bool operator==(const TransferRule&) const = default;
};

enum class PriorMode { latent, dip };
const char* to_string(PriorMode mode);
PriorMode parse_prior_mode(std::string_view name);

struct OptimSettings {
  int projection_iters = 1000;
  double projection_lr = 0.08;
  int transfer_iters = 500;
  double transfer_lr = 0.02;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  // s1c1, s2c1, s3c1, s4c1
  std::array<double, 4> style_weights = {5, 5, 5, 0.5};
  double feature_weight = 1;
  double normal_weight = 5;
  int erosion_radius = 2;
  // Transfer renders a random toroidal shift of the maps each iteration.
  bool random_shift = true;
  LossKind loss = LossKind::sw;
  int directions = 64;
  PriorMode mode = PriorMode::latent;
  // Generator weights move much less than latents in dip mode.
  double dip_weight_lr_scale = 0.01;
  double light_height = 1.0;
  double light_intensity = kDefaultIntensity;
  double gamma = 2.2;
  double divergence_factor = 10;
  int divergence_patience = 50;
  std::uint64_t seed = 0;

  void validate() const;
  RenderConfig render_config() const;
  std::string to_json() const;
  // Strict: unknown keys and wrongly typed values are ConfigErrors. When
  // paths is non-null, string-valued "generator", "featnet", "pack" and "out"
  // keys are accepted and returned there.
  static OptimSettings from_json(std::string_view text,
                                 std::map<std::string, std::string>* paths = nullptr);
};

struct AdamParams {
  double lr = 1e-3, beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
};

struct AdamState {
  std::int64_t step = 0;
  std::vector<std::vector<double>> m, v;
};

// In-place bias-corrected Adam update of leaf tensors; moments live in f64.
void adam_step(std::span<Tensor> params, std::span<const Tensor> grads, AdamState& state,
               const AdamParams& hp);

class Adam {
 public:
  Adam(std::vector<Tensor> params, AdamParams hp);
  // Reads each parameter's accumulated gradient, updates, then zeroes it.
  void step();
  const AdamState& state() const { return state_; }

 private:
  std::vector<Tensor> params_;
  AdamParams hp_;
  AdamState state_;
};

struct RunReport {
  std::string kind;
  std::uint64_t seed = 0;
  int iterations = 0;
  int best_iteration = -1;
  double best_loss = 0;
  double wall_seconds = 0;
  bool diverged = false;
  // "total" plus per-term traces, one entry per iteration.
  std::map<std::string, std::vector<double>> losses;
  std::string settings_json;

  const std::vector<double>& trace(const std::string& name) const;
  std::string to_json() const;
};

// Divergence or an objective that cannot be evaluated.
struct OptimizationError : Error {
  OptimizationError(const std::string& what, RunReport report);
  RunReport report;
};

// Mean over all nine channels and texels of |a - b|.
double mean_abs_difference(const MaterialMaps& a, const MaterialMaps& b);

struct ProjectionResult {
  LatentTheta theta;
  GeneratorWeights weights;
  RunReport report;
};

// Fits theta (and the weights in dip mode) so that synthesize() reproduces
// maps: weighted per-map L1 plus feature loss on s1c2..s4c2. Starts from init
// or from a fresh latent drawn with settings.seed. Returns the best iterate.
ProjectionResult project(const MaterialMaps& maps, const GeneratorWeights& weights,
                         const FeatureExtractor& extractor, const OptimSettings& settings,
                         const LatentTheta* init = nullptr);

struct TransferInput {
  MaterialMaps maps;
  LabelGrid labels;
};

struct TransferTarget {
  Tensor photo;  // [3,H,W] display values in [0,1]
  LabelGrid labels;
};

// The transfer loss on material maps: style terms per rule, averaged over
// rules, plus the feature term against the input maps. Target pyramids,
// unshifted eroded masks and input features are computed once.
class TransferObjective {
 public:
  TransferObjective(const FeatureExtractor& extractor, TransferInput input,
                    std::vector<TransferTarget> targets, std::vector<TransferRule> rules,
                    OptimSettings settings);

  struct Terms {
    Tensor total, style, feature;
    // Taps that contributed, per rule.
    std::vector<std::vector<Tap>> active_taps;
  };
  // Random directions, subsamples and shifts are keyed by (seed, iteration).
  Terms evaluate(const MaterialMaps& maps, int iteration) const;

  const OptimSettings& settings() const { return settings_; }
  const TransferInput& input() const { return input_; }

 private:
  struct RuleMasks {
    std::array<std::optional<Mask>, 4> input, target;
  };
  std::vector<RuleMasks> rule_masks(const LabelGrid& input_labels) const;
  const FeatureExtractor& extractor_;
  TransferInput input_;
  std::vector<TransferTarget> targets_;
  std::vector<TransferRule> rules_;
  OptimSettings settings_;
  std::vector<FeaturePyramid> target_pyramids_;
  std::vector<RuleMasks> masks_;
  FeaturePyramid input_features_;
};

struct TransferResult {
  LatentTheta theta;
  GeneratorWeights weights;
  MaterialMaps maps;
  RunReport report;
};

TransferResult transfer(const LatentTheta& theta, const GeneratorWeights& weights,
                        const FeatureExtractor& extractor, const TransferInput& input,
                        const std::vector<TransferTarget>& targets,
                        const std::vector<TransferRule>& rules, const OptimSettings& settings);

struct PerPixelResult {
  MaterialMaps maps;
  RunReport report;
};

// Same objective, optimizing the map texels directly and projecting them back
// onto valid ranges after every step. Divergence is reported, not thrown.
PerPixelResult per_pixel_transfer(const FeatureExtractor& extractor, const TransferInput& input,
                                  const std::vector<TransferTarget>& targets,
                                  const std::vector<TransferRule>& rules,
                                  const OptimSettings& settings);

}  // namespace matx
