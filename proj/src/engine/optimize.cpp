#include <algorithm>
#include <chrono>
#include <cmath>

#include "matx/engine.hpp"

namespace matx {

namespace {

constexpr Tap kProjectionTaps[] = {Tap::s1c2, Tap::s2c2, Tap::s3c2, Tap::s4c2};

using Clock = std::chrono::steady_clock;

AdamParams adam_params(const OptimSettings& s, double lr) {
  return {lr, s.adam_beta1, s.adam_beta2, s.adam_eps};
}

// Generator weights in dip mode. Per-tensor rate:
// lr * scale * rms(tensor) / sqrt(fan_in).
class WeightOptimizer {
 public:
  WeightOptimizer(const std::vector<Tensor>& params, const OptimSettings& s, double lr) {
    for (const Tensor& p : params) {
      double sq = 0;
      for (double x : p.values()) sq += x * x;
      const double n = static_cast<double>(p.numel());
      const double rms = std::sqrt(sq / n);
      const double fan_in = p.rank() > 1 ? n / static_cast<double>(p.dim(0)) : 1.0;
      opts_.emplace_back(std::vector<Tensor>{p},
                         adam_params(s, lr * s.dip_weight_lr_scale * std::max(rms, 1e-2) /
                                            std::sqrt(fan_in)));
    }
  }
  void step() {
    for (auto& o : opts_) o.step();
  }

 private:
  std::vector<Adam> opts_;
};

// Loss bookkeeping shared by the optimization loops: traces, best iterate
// and the divergence rule.
class Tracker {
 public:
  Tracker(std::string kind, const OptimSettings& s) : s_(s), start_(Clock::now()) {
    report_.kind = std::move(kind);
    report_.seed = s.seed;
    report_.settings_json = s.to_json();
  }

  // Returns true when this iterate is the best so far.
  bool record(int iteration, const std::map<std::string, double>& terms) {
    const double total = terms.at("total");
    for (const auto& [name, v] : terms) report_.losses[name].push_back(v);
    report_.iterations = iteration + 1;
    if (!std::isfinite(total)) {
      report_.diverged = true;
      report_.losses["best"].push_back(report_.best_loss);
      return false;
    }
    if (iteration == 0) initial_ = total;
    over_ = total > s_.divergence_factor * initial_ ? over_ + 1 : 0;
    if (over_ >= s_.divergence_patience) report_.diverged = true;
    const bool best = report_.best_iteration < 0 || total < report_.best_loss;
    if (best) {
      report_.best_iteration = iteration;
      report_.best_loss = total;
    }
    report_.losses["best"].push_back(report_.best_loss);
    return best;
  }

  bool diverged() const { return report_.diverged; }

  RunReport finish() {
    report_.wall_seconds = std::chrono::duration<double>(Clock::now() - start_).count();
    return report_;
  }

 private:
  const OptimSettings& s_;
  RunReport report_;
  Clock::time_point start_;
  double initial_ = 0;
  int over_ = 0;
};

[[noreturn]] void throw_divergence(Tracker& t, int iteration) {
  throw OptimizationError("optimization diverged at iteration " + std::to_string(iteration),
                          t.finish());
}

void project_to_valid(MaterialMaps& m) {
  auto clamp01 = [](Tensor& t) {
    auto v = t.values();
    for (auto& x : v) x = std::clamp(x, 0.0, 1.0);
    t.set_values(v);
  };
  clamp01(m.albedo);
  clamp01(m.roughness);
  clamp01(m.specular);
  auto v = m.normal_xy.values();
  const std::size_t hw = v.size() / 2;
  for (std::size_t i = 0; i < hw; ++i) {
    const double r = std::hypot(v[i], v[hw + i]);
    if (r > 1) {
      v[i] /= r;
      v[hw + i] /= r;
    }
  }
  m.normal_xy.set_values(v);
}

std::vector<Tensor> map_parameters(const MaterialMaps& m) {
  return {m.albedo, m.normal_xy, m.roughness, m.specular};
}

MaterialMaps clone_maps(const MaterialMaps& m, bool requires_grad) {
  return {m.albedo.clone(requires_grad), m.normal_xy.clone(requires_grad),
          m.roughness.clone(requires_grad), m.specular.clone(requires_grad)};
}

}  // namespace

ProjectionResult project(const MaterialMaps& maps, const GeneratorWeights& weights,
                         const FeatureExtractor& extractor, const OptimSettings& s,
                         const LatentTheta* init) {
  s.validate();
  maps.validate();
  const GeneratorConfig& cfg = weights.config;
  if (maps.size() != cfg.resolution)
    throw InputError("maps are " + std::to_string(maps.size()) + " texels wide but the generator produces " +
                     std::to_string(cfg.resolution));
  const DType dt = weights.dtype();
  const bool dip = s.mode == PriorMode::dip;
  const MaterialMaps target = maps.to(dt).detach();
  const FeaturePyramid target_features = extract_maps(extractor, target, kProjectionTaps);
  std::vector<TapWeight> tap_weights;
  for (Tap t : kProjectionTaps) tap_weights.push_back({t, s.feature_weight});

  LatentTheta theta = (init ? init->to(dt) : LatentTheta::init(cfg, s.seed, dt)).clone(true);
  GeneratorWeights w = weights.clone(dip);
  check_compatible(w, theta);
  Adam theta_opt(theta.parameters(), adam_params(s, s.projection_lr));
  std::optional<WeightOptimizer> weight_opt;
  if (dip) weight_opt.emplace(w.parameters(), s, s.projection_lr);

  Tracker tracker("project", s);
  LatentTheta best_theta = theta.clone();
  GeneratorWeights best_w = w.clone();
  for (int it = 0; it < s.projection_iters; ++it) {
    const MaterialMaps out = synthesize(w, theta);
    Tensor l1 = add(add(l1_distance(out.albedo, target.albedo),
                        scale(l1_distance(out.normal_xy, target.normal_xy), s.normal_weight)),
                    add(l1_distance(out.roughness, target.roughness),
                        l1_distance(out.specular, target.specular)));
    Tensor feat = s.feature_weight > 0
                      ? feature_loss(extract_maps(extractor, out, kProjectionTaps),
                                     target_features, tap_weights)
                      : Tensor::scalar(0.0, dt);
    Tensor total = add(l1, feat);
    if (tracker.record(it, {{"total", total.item()}, {"l1", l1.item()}, {"feature", feat.item()}})) {
      best_theta = theta.clone();
      if (dip) best_w = w.clone();
    }
    if (tracker.diverged()) throw_divergence(tracker, it);
    total.backward();
    theta_opt.step();
    if (weight_opt) weight_opt->step();
  }
  return {std::move(best_theta), dip ? std::move(best_w) : weights, tracker.finish()};
}

TransferResult transfer(const LatentTheta& theta0, const GeneratorWeights& weights,
                        const FeatureExtractor& extractor, const TransferInput& input,
                        const std::vector<TransferTarget>& targets,
                        const std::vector<TransferRule>& rules, const OptimSettings& s) {
  const DType dt = weights.dtype();
  if (input.maps.size() != weights.config.resolution)
    throw InputError("input maps are " + std::to_string(input.maps.size()) +
                     " texels wide but the generator produces " +
                     std::to_string(weights.config.resolution));
  TransferInput in{input.maps.to(dt), input.labels};
  const TransferObjective objective(extractor, std::move(in), targets, rules, s);
  const bool dip = s.mode == PriorMode::dip;

  LatentTheta theta = theta0.to(dt).clone(true);
  GeneratorWeights w = weights.clone(dip);
  check_compatible(w, theta);
  Adam theta_opt(theta.parameters(), adam_params(s, s.transfer_lr));
  std::optional<WeightOptimizer> weight_opt;
  if (dip) weight_opt.emplace(w.parameters(), s, s.transfer_lr);

  Tracker tracker("transfer", s);
  LatentTheta best_theta = theta.clone();
  GeneratorWeights best_w = w.clone();
  for (int it = 0; it < s.transfer_iters; ++it) {
    const auto terms = objective.evaluate(synthesize(w, theta), it);
    if (tracker.record(it, {{"total", terms.total.item()},
                            {"style", terms.style.item()},
                            {"feature", terms.feature.item()}})) {
      best_theta = theta.clone();
      if (dip) best_w = w.clone();
    }
    if (tracker.diverged()) throw_divergence(tracker, it);
    terms.total.backward();
    theta_opt.step();
    if (weight_opt) weight_opt->step();
  }
  GeneratorWeights final_w = dip ? std::move(best_w) : weights;
  MaterialMaps maps = synthesize(final_w, best_theta).detach();
  return {std::move(best_theta), std::move(final_w), std::move(maps), tracker.finish()};
}

PerPixelResult per_pixel_transfer(const FeatureExtractor& extractor, const TransferInput& input,
                                  const std::vector<TransferTarget>& targets,
                                  const std::vector<TransferRule>& rules,
                                  const OptimSettings& s) {
  const TransferObjective objective(extractor, input, targets, rules, s);
  MaterialMaps maps = clone_maps(objective.input().maps, true);
  Adam opt(map_parameters(maps), adam_params(s, s.transfer_lr));
  Tracker tracker("per_pixel_transfer", s);
  MaterialMaps best = clone_maps(maps, false);
  for (int it = 0; it < s.transfer_iters; ++it) {
    const auto terms = objective.evaluate(maps, it);
    if (tracker.record(it, {{"total", terms.total.item()},
                            {"style", terms.style.item()},
                            {"feature", terms.feature.item()}}))
      best = clone_maps(maps, false);
    if (!std::isfinite(terms.total.item())) break;
    terms.total.backward();
    opt.step();
    project_to_valid(maps);
  }
  return {best, tracker.finish()};
}

}  // namespace matx
