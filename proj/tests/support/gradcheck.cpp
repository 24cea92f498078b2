#include "gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace matx::testing {

Tensor random_tensor(const Shape& shape, Rng& rng, double lo, double hi,
                     bool requires_grad) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(static_cast<std::size_t>(shape_numel(shape)));
  for (auto& x : v) x = u(rng);
  return Tensor::from_values(shape, v, DType::f64, requires_grad);
}

Tensor random_away_from(const Shape& shape, Rng& rng, double lo, double hi,
                        std::vector<double> kinks, double gap,
                        bool requires_grad) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(static_cast<std::size_t>(shape_numel(shape)));
  for (auto& x : v) {
    do {
      x = u(rng);
    } while (std::any_of(kinks.begin(), kinks.end(),
                         [&](double k) { return std::abs(x - k) < gap; }));
  }
  return Tensor::from_values(shape, v, DType::f64, requires_grad);
}

double gradient_error(const std::function<Tensor(const std::vector<Tensor>&)>& f,
                      std::vector<Tensor> inputs, double eps, double floor) {
  for (auto& t : inputs) {
    t.zero_grad();
    t.set_requires_grad(true);
  }
  Tensor loss = f(inputs);
  loss.backward();
  double worst = 0.0;
  for (auto& t : inputs) {
    const std::vector<double> analytic = t.grad().values();
    std::vector<double> x = t.values();
    std::vector<double> numeric(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double orig = x[i];
      x[i] = orig + eps;
      t.set_values(x);
      const double fp = f(inputs).item();
      x[i] = orig - eps;
      t.set_values(x);
      const double fm = f(inputs).item();
      x[i] = orig;
      t.set_values(x);
      numeric[i] = (fp - fm) / (2 * eps);
    }
    double diff = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      diff = std::max(diff, std::abs(analytic[i] - numeric[i]));
      scale = std::max(scale, std::abs(numeric[i]));
    }
    worst = std::max(worst, diff / std::max(scale, floor));
  }
  return worst;
}

Tensor contract(const Tensor& y, std::uint64_t seed) {
  Rng rng(seed);
  Tensor w = random_tensor(y.shape(), rng, -1.0, 1.0);
  return sum(mul(y, w));
}

namespace {

using Fn = std::function<Tensor(const std::vector<Tensor>&)>;

struct Case {
  std::string name;
  // Builds inputs and the scalar function for one random instance.
  std::function<std::pair<std::vector<Tensor>, Fn>(Rng&, std::uint64_t)> make;
};

std::vector<Case> primitive_cases() {
  std::vector<Case> cases;
  auto unary_case = [&](std::string name, std::function<Tensor(const Tensor&)> op,
                        double lo, double hi, std::vector<double> kinks) {
    cases.push_back({name, [=](Rng& rng, std::uint64_t s) {
                       Tensor x = random_away_from({2, 3, 3}, rng, lo, hi, kinks, 1e-3);
                       Fn f = [=](const std::vector<Tensor>& in) { return contract(op(in[0]), s); };
                       return std::make_pair(std::vector<Tensor>{x}, f);
                     }});
  };
  auto binary_case = [&](std::string name,
                         std::function<Tensor(const Tensor&, const Tensor&)> op,
                         double lo, double hi, bool scalar_rhs) {
    cases.push_back({name, [=](Rng& rng, std::uint64_t s) {
                       Tensor a = random_tensor({3, 4}, rng, lo, hi);
                       Tensor b = scalar_rhs ? random_tensor({}, rng, lo, hi)
                                             : random_tensor({3, 4}, rng, lo, hi);
                       Fn f = [=](const std::vector<Tensor>& in) {
                         return contract(op(in[0], in[1]), s);
                       };
                       return std::make_pair(std::vector<Tensor>{a, b}, f);
                     }});
  };

  binary_case("add", [](auto& a, auto& b) { return add(a, b); }, -1, 1, false);
  binary_case("add(scalar)", [](auto& a, auto& b) { return add(a, b); }, -1, 1, true);
  binary_case("sub", [](auto& a, auto& b) { return sub(a, b); }, -1, 1, false);
  binary_case("mul", [](auto& a, auto& b) { return mul(a, b); }, -1, 1, false);
  binary_case("mul(scalar)", [](auto& a, auto& b) { return mul(a, b); }, -1, 1, true);
  binary_case("div", [](auto& a, auto& b) { return div(a, b); }, 0.5, 2, false);
  unary_case("scale", [](auto& x) { return scale(x, -1.7); }, -1, 1, {});
  unary_case("add_scalar", [](auto& x) { return add_scalar(x, 0.3); }, -1, 1, {});
  unary_case("pow", [](auto& x) { return pow(x, 1.0 / 2.2); }, 0.05, 1.5, {});
  unary_case("pow(int)", [](auto& x) { return pow(x, 5.0); }, 0.05, 1.5, {});
  unary_case("sqrt", [](auto& x) { return sqrt(x); }, 0.05, 2, {});
  unary_case("clamp_min", [](auto& x) { return clamp_min(x, 0.2); }, -1, 1, {0.2});
  unary_case("clamp_max", [](auto& x) { return clamp_max(x, 0.2); }, -1, 1, {0.2});
  unary_case("clamp", [](auto& x) { return clamp(x, -0.3, 0.4); }, -1, 1, {-0.3, 0.4});
  unary_case("leaky_relu", [](auto& x) { return leaky_relu(x, 0.2); }, -1, 1, {0.0});
  unary_case("relu", [](auto& x) { return relu(x); }, -1, 1, {0.0});
  unary_case("abs", [](auto& x) { return abs(x); }, -1, 1, {0.0});
  unary_case("sigmoid", [](auto& x) { return sigmoid(x); }, -3, 3, {});
  unary_case("tanh", [](auto& x) { return tanh(x); }, -2, 2, {});
  unary_case("sum", [](auto& x) { return sum(x); }, -1, 1, {});
  unary_case("mean", [](auto& x) { return mean(x); }, -1, 1, {});

  cases.push_back({"l1_distance", [](Rng& rng, std::uint64_t) {
                     Tensor a = random_tensor({2, 3, 3}, rng);
                     // Keep a - b at least 1e-3 away from zero.
                     Tensor d = random_away_from({2, 3, 3}, rng, -1, 1, {0.0}, 1e-3);
                     Tensor b = sub(a, d).detach();
                     Fn f = [](const std::vector<Tensor>& in) { return l1_distance(in[0], in[1]); };
                     return std::make_pair(std::vector<Tensor>{a, b}, f);
                   }});

  for (Padding pad : {Padding::circular, Padding::zero}) {
    const std::string name = pad == Padding::circular ? "conv2d(circular)" : "conv2d(zero)";
    cases.push_back({name, [pad](Rng& rng, std::uint64_t s) {
                       Tensor x = random_tensor({2, 5, 6}, rng);
                       Tensor w = random_tensor({3, 2, 3, 3}, rng);
                       Tensor b = random_tensor({3}, rng);
                       Fn f = [pad, s](const std::vector<Tensor>& in) {
                         return contract(conv2d(in[0], in[1], in[2], pad), s);
                       };
                       return std::make_pair(std::vector<Tensor>{x, w, b}, f);
                     }});
  }
  cases.push_back({"conv2d(1x1)", [](Rng& rng, std::uint64_t s) {
                     Tensor x = random_tensor({3, 4, 4}, rng);
                     Tensor w = random_tensor({2, 3, 1, 1}, rng);
                     Fn f = [s](const std::vector<Tensor>& in) {
                       return contract(conv2d(in[0], in[1], Tensor(), Padding::circular), s);
                     };
                     return std::make_pair(std::vector<Tensor>{x, w}, f);
                   }});
  for (Upsample mode : {Upsample::nearest, Upsample::bilinear_circular}) {
    const std::string name = mode == Upsample::nearest ? "upsample2x(nearest)"
                                                       : "upsample2x(bilinear_circular)";
    cases.push_back({name, [mode](Rng& rng, std::uint64_t s) {
                       Tensor x = random_tensor({2, 3, 4}, rng);
                       Fn f = [mode, s](const std::vector<Tensor>& in) {
                         return contract(upsample2x(in[0], mode), s);
                       };
                       return std::make_pair(std::vector<Tensor>{x}, f);
                     }});
  }
  cases.push_back({"avgpool2x", [](Rng& rng, std::uint64_t s) {
                    Tensor x = random_tensor({2, 4, 6}, rng);
                    Fn f = [s](const std::vector<Tensor>& in) { return contract(avgpool2x(in[0]), s); };
                    return std::make_pair(std::vector<Tensor>{x}, f);
                  }});
  unary_case("cyclic_shift", [](auto& x) { return cyclic_shift(x, 2, -1); }, -1, 1, {});
  unary_case("tile", [](auto& x) { return tile(x, 2); }, -1, 1, {});
  unary_case("crop_toroidal", [](auto& x) { return crop_toroidal(x, 2, 1, 4, 5); }, -1, 1, {});
  unary_case("slice_channels", [](auto& x) { return slice_channels(x, 1, 1); }, -1, 1, {});
  cases.push_back({"concat_channels", [](Rng& rng, std::uint64_t s) {
                     Tensor a = random_tensor({1, 3, 3}, rng);
                     Tensor b = random_tensor({2, 3, 3}, rng);
                     Fn f = [s](const std::vector<Tensor>& in) {
                       const Tensor parts[] = {in[0], in[1], in[0]};
                       return contract(concat_channels(parts), s);
                     };
                     return std::make_pair(std::vector<Tensor>{a, b}, f);
                   }});
  cases.push_back({"expand_channels", [](Rng& rng, std::uint64_t s) {
                     Tensor x = random_tensor({1, 3, 4}, rng);
                     Fn f = [s](const std::vector<Tensor>& in) {
                       return contract(expand_channels(in[0], 3), s);
                     };
                     return std::make_pair(std::vector<Tensor>{x}, f);
                   }});
  cases.push_back({"broadcast_spatial", [](Rng& rng, std::uint64_t s) {
                     Tensor v = random_tensor({3}, rng);
                     Fn f = [s](const std::vector<Tensor>& in) {
                       return contract(broadcast_spatial(in[0], 2, 3), s);
                     };
                     return std::make_pair(std::vector<Tensor>{v}, f);
                   }});
  cases.push_back({"channel_affine", [](Rng& rng, std::uint64_t s) {
                     Tensor x = random_tensor({3, 3, 2}, rng);
                     Tensor a = random_tensor({3}, rng);
                     Tensor b = random_tensor({3}, rng);
                     Fn f = [s](const std::vector<Tensor>& in) {
                       return contract(channel_affine(in[0], in[1], in[2]), s);
                     };
                     return std::make_pair(std::vector<Tensor>{x, a, b}, f);
                   }});
  cases.push_back({"unit_disk_clamp", [](Rng& rng, std::uint64_t s) {
                     // Mix of vectors inside and outside the disk, away from |v| = 1.
                     std::uniform_real_distribution<double> ang(0, 6.283185307179586);
                     std::uniform_real_distribution<double> rad(0.1, 1.4);
                     std::vector<double> v(2 * 9);
                     for (int i = 0; i < 9; ++i) {
                       double r;
                       do r = rad(rng); while (std::abs(r - 1.0) < 1e-3);
                       const double t = ang(rng);
                       v[static_cast<std::size_t>(i)] = r * std::cos(t);
                       v[static_cast<std::size_t>(9 + i)] = r * std::sin(t);
                     }
                     Tensor x = Tensor::from_values({2, 3, 3}, v, DType::f64);
                     Fn f = [s](const std::vector<Tensor>& in) {
                       return contract(unit_disk_clamp(in[0]), s);
                     };
                     return std::make_pair(std::vector<Tensor>{x}, f);
                   }});
  cases.push_back({"sort1d", [](Rng& rng, std::uint64_t s) {
                     Tensor x = random_tensor({16}, rng, -3, 3);
                     Fn f = [s](const std::vector<Tensor>& in) {
                       return contract(sort1d(in[0]).values, s);
                     };
                     return std::make_pair(std::vector<Tensor>{x}, f);
                   }});
  for (int combo = 0; combo < 4; ++combo) {
    const bool ta = combo & 1, tb = combo & 2;
    const std::string name = std::string("matmul(") + (ta ? "T" : "N") + (tb ? "T" : "N") + ")";
    cases.push_back({name, [ta, tb](Rng& rng, std::uint64_t s) {
                       Tensor a = random_tensor(ta ? Shape{4, 3} : Shape{3, 4}, rng);
                       Tensor b = random_tensor(tb ? Shape{5, 4} : Shape{4, 5}, rng);
                       Fn f = [ta, tb, s](const std::vector<Tensor>& in) {
                         return contract(matmul(in[0], in[1], ta ? Transpose::yes : Transpose::no,
                                                tb ? Transpose::yes : Transpose::no),
                                         s);
                       };
                       return std::make_pair(std::vector<Tensor>{a, b}, f);
                     }});
  }
  cases.push_back({"gather_pixels", [](Rng& rng, std::uint64_t s) {
                     Tensor x = random_tensor({3, 4, 4}, rng);
                     Fn f = [s](const std::vector<Tensor>& in) {
                       const std::int64_t idx[] = {0, 5, 5, 15, 7};
                       return contract(gather_pixels(in[0], idx), s);
                     };
                     return std::make_pair(std::vector<Tensor>{x}, f);
                   }});
  cases.push_back({"select_rows", [](Rng& rng, std::uint64_t s) {
                     Tensor x = random_tensor({6, 3}, rng);
                     Fn f = [s](const std::vector<Tensor>& in) {
                       const std::int64_t rows[] = {4, 0, 4, 2};
                       return contract(select_rows(in[0], rows), s);
                     };
                     return std::make_pair(std::vector<Tensor>{x}, f);
                   }});
  cases.push_back({"reshape", [](Rng& rng, std::uint64_t s) {
                     Tensor x = random_tensor({2, 3, 4}, rng);
                     Fn f = [s](const std::vector<Tensor>& in) {
                       return contract(reshape(in[0], {6, 4}), s);
                     };
                     return std::make_pair(std::vector<Tensor>{x}, f);
                   }});
  return cases;
}

}  // namespace

std::vector<SweepEntry> autodiff_sweep(int instances, std::uint64_t seed) {
  std::vector<SweepEntry> out;
  Rng rng(seed);
  for (const auto& c : primitive_cases()) {
    SweepEntry e{c.name, 0, 0.0};
    for (int i = 0; i < instances; ++i) {
      auto [inputs, f] = c.make(rng, seed * 1000003u + static_cast<std::uint64_t>(i));
      e.worst_error = std::max(e.worst_error, gradient_error(f, inputs));
      ++e.instances;
    }
    out.push_back(e);
  }
  return out;
}

}  // namespace matx::testing
