#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "matx/gradtensor.hpp"

namespace matx::testing {

using Rng = std::mt19937_64;

// f64 tensor with entries uniform in [lo, hi).
Tensor random_tensor(const Shape& shape, Rng& rng, double lo = -1.0,
                     double hi = 1.0, bool requires_grad = false);

// Uniform in [lo, hi) but at least `gap` away from every listed kink.
Tensor random_away_from(const Shape& shape, Rng& rng, double lo, double hi,
                        std::vector<double> kinks, double gap,
                        bool requires_grad = false);

// Largest relative error, over all inputs, between the analytic gradient of
// the scalar f(inputs) and central finite differences with step eps:
// max_i ||g_analytic - g_numeric||_inf / max(||g_numeric||_inf, floor).
double gradient_error(const std::function<Tensor(const std::vector<Tensor>&)>& f,
                      std::vector<Tensor> inputs, double eps = 1e-6,
                      double floor = 1e-8);

// Contracts a non-scalar output with fixed random weights to a scalar.
Tensor contract(const Tensor& y, std::uint64_t seed);

struct SweepEntry {
  std::string op;
  int instances = 0;
  double worst_error = 0.0;
};

// Finite-difference check of every gradtensor primitive on `instances`
// random inputs each. Requires the f64 default dtype.
std::vector<SweepEntry> autodiff_sweep(int instances, std::uint64_t seed);

}  // namespace matx::testing
