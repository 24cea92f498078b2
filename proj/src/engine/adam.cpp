#include <cmath>

#include "matx/engine.hpp"

namespace matx {

void adam_step(std::span<Tensor> params, std::span<const Tensor> grads, AdamState& st,
               const AdamParams& hp) {
  if (params.size() != grads.size()) throw ShapeError("adam_step: parameter/gradient count differs");
  if (st.m.empty()) {
    for (const Tensor& p : params) {
      st.m.emplace_back(static_cast<std::size_t>(p.numel()), 0.0);
      st.v.emplace_back(static_cast<std::size_t>(p.numel()), 0.0);
    }
  }
  if (st.m.size() != params.size()) throw ShapeError("adam_step: state belongs to other parameters");
  ++st.step;
  const double c1 = 1 - std::pow(hp.beta1, static_cast<double>(st.step));
  const double c2 = 1 - std::pow(hp.beta2, static_cast<double>(st.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = params[i];
    if (grads[i].numel() != p.numel() || st.m[i].size() != static_cast<std::size_t>(p.numel()))
      throw ShapeError("adam_step: gradient shape " + to_string(grads[i].shape()) +
                       " does not match parameter " + to_string(p.shape()));
    const auto g = grads[i].values();
    auto& m = st.m[i];
    auto& v = st.v[i];
    std::vector<double> x = p.values();
    for (std::size_t k = 0; k < x.size(); ++k) {
      m[k] = hp.beta1 * m[k] + (1 - hp.beta1) * g[k];
      v[k] = hp.beta2 * v[k] + (1 - hp.beta2) * g[k] * g[k];
      x[k] -= hp.lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + hp.eps);
    }
    p.set_values(x);
  }
}

Adam::Adam(std::vector<Tensor> params, AdamParams hp) : params_(std::move(params)), hp_(hp) {}

void Adam::step() {
  std::vector<Tensor> grads;
  grads.reserve(params_.size());
  for (const Tensor& p : params_) grads.push_back(p.grad());
  adam_step(params_, grads, state_, hp_);
  for (Tensor& p : params_) p.zero_grad();
}

}  // namespace matx
