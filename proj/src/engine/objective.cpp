#include <algorithm>

#include "matx/engine.hpp"

namespace matx {

namespace {

constexpr std::array<Tap, 4> kStyleTaps = {Tap::s1c1, Tap::s2c1, Tap::s3c1, Tap::s4c1};
constexpr Tap kFeatureTap = Tap::s4c2;

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Subsampling seed of one (rule, tap): depends on the rule's content, not its
// position, so repeating a rule repeats its draws.
std::uint64_t subsample_seed(std::uint64_t seed, const TransferRule& r, Tap tap) {
  std::uint64_t h = splitmix(seed);
  for (int v : {r.input_label, r.target_index, r.target_label, tap_index(tap)})
    h = splitmix(h ^ static_cast<std::uint64_t>(v));
  return h;
}

std::string describe(const LabelGrid& g) {
  return std::to_string(g.height) + "x" + std::to_string(g.width);
}

LabelGrid shift_labels(const LabelGrid& g, std::int64_t dx, std::int64_t dy) {
  LabelGrid out = g;
  for (std::int64_t y = 0; y < g.height; ++y)
    for (std::int64_t x = 0; x < g.width; ++x)
      out.labels[static_cast<std::size_t>(((y + dy) % g.height) * g.width + (x + dx) % g.width)] =
          g.at(y, x);
  return out;
}

}  // namespace

TransferObjective::TransferObjective(const FeatureExtractor& extractor, TransferInput input,
                                     std::vector<TransferTarget> targets,
                                     std::vector<TransferRule> rules, OptimSettings settings)
    : extractor_(extractor),
      input_(std::move(input)),
      targets_(std::move(targets)),
      rules_(std::move(rules)),
      settings_(std::move(settings)) {
  settings_.validate();
  input_.maps.validate();
  const DType dt = input_.maps.dtype();
  input_.maps = input_.maps.detach();
  const std::int64_t n = input_.maps.size();
  if (input_.labels.height != n || input_.labels.width != n)
    throw InputError("input label map is " + describe(input_.labels) + " but the maps are " +
                     std::to_string(n) + "x" + std::to_string(n));
  if (n % 8 != 0) throw InputError("input maps must be a multiple of 8 texels wide");
  if (targets_.empty()) throw InputError("transfer needs at least one target");
  if (rules_.empty()) throw InputError("transfer needs at least one rule");
  for (std::size_t i = 0; i < targets_.size(); ++i) {
    TransferTarget& t = targets_[i];
    const std::string name = "target " + std::to_string(i);
    if (!t.photo.defined() || t.photo.rank() != 3 || t.photo.channels() != 3)
      throw InputError(name + ": photo must be a [3,H,W] image");
    if (t.photo.height() % 8 != 0 || t.photo.width() % 8 != 0)
      throw InputError(name + ": photo size must be a multiple of 8");
    if (t.labels.height != t.photo.height() || t.labels.width != t.photo.width())
      throw InputError(name + ": label map is " + describe(t.labels) + " but the photo is " +
                       std::to_string(t.photo.height()) + "x" + std::to_string(t.photo.width()));
    t.photo = t.photo.to(dt).detach();
  }
  for (const TransferRule& r : rules_) {
    const std::string name = "rule " + r.to_string();
    if (r.target_index < 0 || r.target_index >= static_cast<int>(targets_.size()))
      throw InputError(name + ": target " + std::to_string(r.target_index) + " does not exist (" +
                       std::to_string(targets_.size()) + " targets)");
    if (!input_.labels.contains(static_cast<std::uint8_t>(r.input_label)))
      throw InputError(name + ": input label map has no label " + std::to_string(r.input_label));
    if (!targets_[static_cast<std::size_t>(r.target_index)].labels.contains(
            static_cast<std::uint8_t>(r.target_label)))
      throw InputError(name + ": target " + std::to_string(r.target_index) + " has no label " +
                       std::to_string(r.target_label));
  }

  for (const TransferTarget& t : targets_) target_pyramids_.push_back(extractor_.extract(t.photo, kStyleTaps));

  masks_ = rule_masks(input_.labels);
  for (std::size_t r = 0; r < rules_.size(); ++r)
    if (std::none_of(masks_[r].input.begin(), masks_[r].input.end(),
                     [](const auto& m) { return m.has_value(); }))
      throw OptimizationError("rule " + rules_[r].to_string() +
                                  ": region is empty after erosion at every style tap",
                              RunReport{});

  if (settings_.feature_weight > 0) {
    const Tap taps[] = {kFeatureTap};
    input_features_ = extract_maps(extractor_, input_.maps, taps);
  }
}

std::vector<TransferObjective::RuleMasks> TransferObjective::rule_masks(
    const LabelGrid& input_labels) const {
  std::vector<RuleMasks> out;
  for (const TransferRule& r : rules_) {
    RuleMasks rm;
    for (std::size_t k = 0; k < kStyleTaps.size(); ++k) {
      if (settings_.style_weights[k] == 0) continue;
      const Tap tap = kStyleTaps[k];
      const auto& tl = targets_[static_cast<std::size_t>(r.target_index)].labels;
      Mask a = erode(Mask::from_labels(downsample_labels(input_labels, tap),
                                       static_cast<std::uint8_t>(r.input_label)),
                     settings_.erosion_radius);
      Mask b = erode(Mask::from_labels(downsample_labels(tl, tap),
                                       static_cast<std::uint8_t>(r.target_label)),
                     settings_.erosion_radius);
      if (a.count() == 0 || b.count() == 0) continue;
      rm.input[k] = std::move(a);
      rm.target[k] = std::move(b);
    }
    out.push_back(std::move(rm));
  }
  return out;
}

TransferObjective::Terms TransferObjective::evaluate(const MaterialMaps& maps,
                                                     int iteration) const {
  if (maps.size() != input_.maps.size())
    throw ShapeError("transfer objective: maps are " + std::to_string(maps.size()) +
                     " texels wide, the input is " + std::to_string(input_.maps.size()));
  const DType dt = maps.dtype();
  const std::int64_t n = maps.size();
  std::int64_t dx = 0, dy = 0;
  if (settings_.random_shift) {
    Philox rng(settings_.seed, streams::shift, static_cast<std::uint32_t>(iteration));
    dx = static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(n)));
    dy = static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(n)));
  }
  const bool shifted = dx != 0 || dy != 0;
  std::vector<RuleMasks> shifted_masks;
  if (shifted) shifted_masks = rule_masks(shift_labels(input_.labels, dx, dy));
  const std::vector<RuleMasks>& masks = shifted ? shifted_masks : masks_;
  const MaterialMaps view =
      shifted ? MaterialMaps{cyclic_shift(maps.albedo, dx, dy), cyclic_shift(maps.normal_xy, dx, dy),
                             cyclic_shift(maps.roughness, dx, dy), cyclic_shift(maps.specular, dx, dy)}
              : maps;
  const Tensor image = render(view, settings_.render_config());
  const FeaturePyramid pyr = extractor_.extract(image, kStyleTaps);

  std::array<std::optional<ProjectionSet>, 4> dirs;
  if (settings_.loss != LossKind::gram) {
    Philox rng(settings_.seed, streams::directions, static_cast<std::uint32_t>(iteration));
    for (std::size_t k = 0; k < kStyleTaps.size(); ++k)
      dirs[k] = ProjectionSet::random(settings_.directions, extractor_.channels(kStyleTaps[k]),
                                      rng, dt);
  }

  Terms out;
  Tensor style_sum = Tensor::scalar(0.0, dt);
  for (std::size_t r = 0; r < rules_.size(); ++r) {
    const TransferRule& rule = rules_[r];
    const FeaturePyramid& tp = target_pyramids_[static_cast<std::size_t>(rule.target_index)];
    std::vector<Tap> active;
    for (std::size_t k = 0; k < kStyleTaps.size(); ++k) {
      if (!masks[r].input[k]) continue;
      const Tap tap = kStyleTaps[k];
      const SampleSet a = gather(pyr.at(tap), *masks[r].input[k]);
      const SampleSet b = gather(tp.at(tap), *masks[r].target[k]);
      std::optional<Tensor> l;
      switch (settings_.loss) {
        case LossKind::sw: {
          Philox sub(subsample_seed(settings_.seed, rule, tap), streams::subsampling,
                     static_cast<std::uint32_t>(iteration));
          l = sw_loss(a, b, *dirs[k], sub);
          break;
        }
        case LossKind::cramer:
          l = cramer_loss(a, b, *dirs[k]);
          break;
        case LossKind::gram: {
          const auto ga = gram(a), gb = gram(b);
          if (ga && gb) l = l1_distance(*ga, *gb);
          break;
        }
      }
      if (!l) continue;
      style_sum = add(style_sum, scale(*l, settings_.style_weights[k]));
      active.push_back(tap);
    }
    out.active_taps.push_back(std::move(active));
  }
  out.style = scale(style_sum, 1.0 / static_cast<double>(rules_.size()));

  if (settings_.feature_weight > 0) {
    const Tap taps[] = {kFeatureTap};
    const TapWeight w[] = {{kFeatureTap, settings_.feature_weight}};
    out.feature = feature_loss(extract_maps(extractor_, maps, taps), input_features_, w);
  } else {
    out.feature = Tensor::scalar(0.0, dt);
  }
  out.total = add(out.style, out.feature);
  return out;
}

}  // namespace matx
