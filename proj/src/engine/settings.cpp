#include <charconv>
#include <cmath>
#include <functional>

#include "json.hpp"
#include "matx/engine.hpp"

namespace matx {

namespace {

using nlohmann::json;

struct Location {
  int line = 0, column = 0;
};

Location location_of(std::string_view text, std::size_t offset) {
  Location loc{1, 1};
  for (std::size_t i = 0; i < offset && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++loc.line;
      loc.column = 1;
    } else {
      ++loc.column;
    }
  }
  return loc;
}

// Position of a member name of the top-level object.
Location locate_key(std::string_view text, std::string_view key) {
  int depth = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c == '{' || c == '[') {
      ++depth;
    } else if (c == '}' || c == ']') {
      --depth;
    } else if (c == '"') {
      const std::size_t start = i;
      std::string name;
      for (++i; i < text.size() && text[i] != '"'; ++i) {
        if (text[i] == '\\' && i + 1 < text.size()) ++i;
        name += text[i];
      }
      std::size_t j = i + 1;
      while (j < text.size() && std::isspace(static_cast<unsigned char>(text[j]))) ++j;
      if (depth == 1 && j < text.size() && text[j] == ':' && name == key)
        return location_of(text, start);
    }
  }
  return {};
}

double number(const json& v) {
  if (!v.is_number()) throw std::invalid_argument("expected a number");
  return v.get<double>();
}

int integer(const json& v) {
  if (!v.is_number_integer()) throw std::invalid_argument("expected an integer");
  const auto i = v.get<std::int64_t>();
  if (i < std::numeric_limits<int>::min() || i > std::numeric_limits<int>::max())
    throw std::invalid_argument("integer out of range");
  return static_cast<int>(i);
}

using Setter = std::function<void(OptimSettings&, const json&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"projection_iters", [](auto& s, auto& v) { s.projection_iters = integer(v); }},
      {"projection_lr", [](auto& s, auto& v) { s.projection_lr = number(v); }},
      {"transfer_iters", [](auto& s, auto& v) { s.transfer_iters = integer(v); }},
      {"transfer_lr", [](auto& s, auto& v) { s.transfer_lr = number(v); }},
      {"adam_beta1", [](auto& s, auto& v) { s.adam_beta1 = number(v); }},
      {"adam_beta2", [](auto& s, auto& v) { s.adam_beta2 = number(v); }},
      {"adam_eps", [](auto& s, auto& v) { s.adam_eps = number(v); }},
      {"style_weights",
       [](auto& s, auto& v) {
         if (!v.is_array() || v.size() != 4)
           throw std::invalid_argument("expected an array of 4 numbers");
         for (std::size_t i = 0; i < 4; ++i) s.style_weights[i] = number(v[i]);
       }},
      {"feature_weight", [](auto& s, auto& v) { s.feature_weight = number(v); }},
      {"normal_weight", [](auto& s, auto& v) { s.normal_weight = number(v); }},
      {"erosion_radius", [](auto& s, auto& v) { s.erosion_radius = integer(v); }},
      {"random_shift",
       [](auto& s, auto& v) {
         if (!v.is_boolean()) throw std::invalid_argument("expected true or false");
         s.random_shift = v.template get<bool>();
       }},
      {"loss",
       [](auto& s, auto& v) {
         if (!v.is_string()) throw std::invalid_argument("expected \"sw\", \"cramer\" or \"gram\"");
         s.loss = parse_loss_kind(v.template get<std::string>());
       }},
      {"directions", [](auto& s, auto& v) { s.directions = integer(v); }},
      {"mode",
       [](auto& s, auto& v) {
         if (!v.is_string()) throw std::invalid_argument("expected \"latent\" or \"dip\"");
         s.mode = parse_prior_mode(v.template get<std::string>());
       }},
      {"dip_weight_lr_scale", [](auto& s, auto& v) { s.dip_weight_lr_scale = number(v); }},
      {"light_height", [](auto& s, auto& v) { s.light_height = number(v); }},
      {"light_intensity", [](auto& s, auto& v) { s.light_intensity = number(v); }},
      {"gamma", [](auto& s, auto& v) { s.gamma = number(v); }},
      {"divergence_factor", [](auto& s, auto& v) { s.divergence_factor = number(v); }},
      {"divergence_patience", [](auto& s, auto& v) { s.divergence_patience = integer(v); }},
      {"seed",
       [](auto& s, auto& v) {
         if (!v.is_number_unsigned()) throw std::invalid_argument("expected a non-negative integer");
         s.seed = v.template get<std::uint64_t>();
       }},
  };
  return table;
}

constexpr const char* kPathKeys[] = {"generator", "featnet", "pack", "out"};

}  // namespace

ConfigError::ConfigError(const std::string& what, int l, int c)
    : Error(l > 0 ? "line " + std::to_string(l) + ", column " + std::to_string(c) + ": " + what
                  : what),
      line(l),
      column(c) {}

TransferRule TransferRule::parse(std::string_view text) {
  TransferRule r;
  int* fields[] = {&r.input_label, &r.target_index, &r.target_label};
  std::size_t pos = 0;
  for (int i = 0; i < 3; ++i) {
    const std::size_t end = i < 2 ? text.find(':', pos) : text.size();
    if (end == std::string_view::npos) break;
    const std::string_view part = text.substr(pos, end - pos);
    const auto [p, ec] = std::from_chars(part.data(), part.data() + part.size(), *fields[i]);
    if (part.empty() || ec != std::errc() || p != part.data() + part.size() || *fields[i] < 0)
      break;
    if (i == 2) {
      if (r.input_label >= kUnlabeled || r.target_label >= kUnlabeled)
        throw InputError("rule \"" + std::string(text) + "\": labels must be below 255");
      return r;
    }
    pos = end + 1;
  }
  throw InputError("rule \"" + std::string(text) +
                   "\" is not of the form IN:TI:TL with non-negative integers");
}

std::string TransferRule::to_string() const {
  return std::to_string(input_label) + ":" + std::to_string(target_index) + ":" +
         std::to_string(target_label);
}

const char* to_string(PriorMode mode) { return mode == PriorMode::latent ? "latent" : "dip"; }

PriorMode parse_prior_mode(std::string_view name) {
  if (name == "latent") return PriorMode::latent;
  if (name == "dip") return PriorMode::dip;
  throw Error("unknown prior mode \"" + std::string(name) + "\" (expected latent or dip)");
}

void OptimSettings::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0) || !std::isfinite(v)) throw Error(std::string(name) + " must be positive");
  };
  if (projection_iters < 1) throw Error("projection_iters must be positive");
  if (transfer_iters < 1) throw Error("transfer_iters must be positive");
  positive(projection_lr, "projection_lr");
  positive(transfer_lr, "transfer_lr");
  if (!(adam_beta1 >= 0 && adam_beta1 < 1)) throw Error("adam_beta1 must lie in [0,1)");
  if (!(adam_beta2 >= 0 && adam_beta2 < 1)) throw Error("adam_beta2 must lie in [0,1)");
  positive(adam_eps, "adam_eps");
  for (double w : style_weights)
    if (!(w >= 0) || !std::isfinite(w)) throw Error("style_weights must be non-negative");
  if (!(feature_weight >= 0)) throw Error("feature_weight must be non-negative");
  if (!(normal_weight >= 0)) throw Error("normal_weight must be non-negative");
  if (erosion_radius < 0) throw Error("erosion_radius must be non-negative");
  if (directions < 1) throw Error("directions must be positive");
  positive(dip_weight_lr_scale, "dip_weight_lr_scale");
  positive(divergence_factor, "divergence_factor");
  if (divergence_patience < 1) throw Error("divergence_patience must be positive");
  render_config().validate();
}

RenderConfig OptimSettings::render_config() const {
  RenderConfig c;
  c.light_height = light_height;
  c.light_intensity = light_intensity;
  c.gamma = gamma;
  return c;
}

std::string OptimSettings::to_json() const {
  json j;
  j["projection_iters"] = projection_iters;
  j["projection_lr"] = projection_lr;
  j["transfer_iters"] = transfer_iters;
  j["transfer_lr"] = transfer_lr;
  j["adam_beta1"] = adam_beta1;
  j["adam_beta2"] = adam_beta2;
  j["adam_eps"] = adam_eps;
  j["style_weights"] = style_weights;
  j["feature_weight"] = feature_weight;
  j["normal_weight"] = normal_weight;
  j["erosion_radius"] = erosion_radius;
  j["random_shift"] = random_shift;
  j["loss"] = matx::to_string(loss);
  j["directions"] = directions;
  j["mode"] = matx::to_string(mode);
  j["dip_weight_lr_scale"] = dip_weight_lr_scale;
  j["light_height"] = light_height;
  j["light_intensity"] = light_intensity;
  j["gamma"] = gamma;
  j["divergence_factor"] = divergence_factor;
  j["divergence_patience"] = divergence_patience;
  j["seed"] = seed;
  return j.dump(2);
}

OptimSettings OptimSettings::from_json(std::string_view text,
                                       std::map<std::string, std::string>* paths) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    const Location at = location_of(text, e.byte > 0 ? e.byte - 1 : 0);
    std::string msg = e.what();
    // Drop the library's "[json.exception.parse_error.101] parse error at ..." prefix.
    if (auto p = msg.find(": "); p != std::string::npos) msg = msg.substr(p + 2);
    throw ConfigError("invalid JSON: " + msg, at.line, at.column);
  }
  if (!doc.is_object()) throw ConfigError("configuration must be a JSON object", 1, 1);
  OptimSettings s;
  for (const auto& [key, value] : doc.items()) {
    const Location at = locate_key(text, key);
    const bool is_path = std::find(std::begin(kPathKeys), std::end(kPathKeys), key) != std::end(kPathKeys);
    if (paths && is_path) {
      if (!value.is_string())
        throw ConfigError("\"" + key + "\": expected a path string", at.line, at.column);
      (*paths)[key] = value.get<std::string>();
      continue;
    }
    const auto it = setters().find(key);
    if (it == setters().end())
      throw ConfigError("unknown key \"" + key + "\"", at.line, at.column);
    try {
      it->second(s, value);
    } catch (const std::exception& e) {
      throw ConfigError("\"" + key + "\": " + e.what(), at.line, at.column);
    }
  }
  try {
    s.validate();
  } catch (const Error& e) {
    const std::string msg = e.what();
    const Location at = locate_key(text, msg.substr(0, msg.find(' ')));
    throw ConfigError(msg, at.line, at.column);
  }
  return s;
}

}  // namespace matx
