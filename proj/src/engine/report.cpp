#include <cmath>

#include "json.hpp"
#include "matx/engine.hpp"

namespace matx {

OptimizationError::OptimizationError(const std::string& what, RunReport r)
    : Error(what), report(std::move(r)) {}

const std::vector<double>& RunReport::trace(const std::string& name) const {
  const auto it = losses.find(name);
  if (it == losses.end()) throw Error("run report has no \"" + name + "\" trace");
  return it->second;
}

std::string RunReport::to_json() const {
  nlohmann::json j;
  j["kind"] = kind;
  j["seed"] = seed;
  j["iterations"] = iterations;
  j["best_iteration"] = best_iteration;
  j["best_loss"] = best_loss;
  j["diverged"] = diverged;
  j["timings"] = {{"wall_seconds", wall_seconds}};
  nlohmann::json l = nlohmann::json::object();
  for (const auto& [name, values] : losses) {
    auto& arr = l[name] = nlohmann::json::array();
    // JSON has no NaN; a null marks a non-finite entry.
    for (double v : values) arr.push_back(std::isfinite(v) ? nlohmann::json(v) : nlohmann::json());
  }
  j["losses"] = std::move(l);
  j["settings"] = settings_json.empty() ? nlohmann::json::object()
                                        : nlohmann::json::parse(settings_json);
  return j.dump(2);
}

double mean_abs_difference(const MaterialMaps& a, const MaterialMaps& b) {
  const auto x = a.stack().values(), y = b.stack().values();
  if (x.size() != y.size()) throw ShapeError("mean_abs_difference: map sizes differ");
  double s = 0;
  for (std::size_t i = 0; i < x.size(); ++i) s += std::abs(x[i] - y[i]);
  return s / static_cast<double>(x.size());
}

}  // namespace matx
