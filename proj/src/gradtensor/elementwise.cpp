#include <algorithm>
#include <cmath>

#include "matx/gradtensor.hpp"

namespace matx {

using detail::Buffer;
using detail::TensorImpl;

namespace {

void require_defined(const Tensor& t, const char* op) {
  if (!t.defined()) throw Error(std::string(op) + ": undefined operand");
}

template <class Fwd, class Bwd>
Tensor unary(const Tensor& x, const char* op, Fwd fwd, Bwd dydx) {
  require_defined(x, op);
  const DType dt = x.dtype();
  Buffer out(dt, static_cast<std::size_t>(x.numel()));
  detail::dispatch(dt, [&](auto tag) {
    using T = decltype(tag);
    auto in = x.data<T>();
    auto o = out.as<T>();
    for (std::size_t i = 0; i < in.size(); ++i) o[i] = fwd(in[i]);
  });
  const Tensor inputs[] = {x};
  return make_op_result(
      x.shape(), dt, std::move(out), inputs, op,
      [dydx](const TensorImpl& o, std::span<const std::shared_ptr<TensorImpl>> ins) {
        detail::dispatch(o.dtype, [&](auto tag) {
          using T = decltype(tag);
          auto g = o.grad.as<T>();
          auto y = o.data.as<T>();
          auto xin = ins[0]->data.as<T>();
          auto gi = accumulate_grad<T>(*ins[0]);
          for (std::size_t i = 0; i < gi.size(); ++i)
            gi[i] += g[i] * dydx(xin[i], y[i]);
        });
      });
}

bool is_scalar_operand(const Tensor& t) { return t.rank() == 0; }

// Identical shapes, or a rank-0 operand broadcast against the other.
template <class Fwd, class DA, class DB>
Tensor binary(const Tensor& a, const Tensor& b, const char* op, Fwd fwd,
              DA dfda, DB dfdb) {
  require_defined(a, op);
  require_defined(b, op);
  if (a.dtype() != b.dtype())
    throw Error(std::string(op) + ": dtype mismatch (" + to_string(a.dtype()) +
                " vs " + to_string(b.dtype()) + ")");
  const bool a_scalar = is_scalar_operand(a) && !is_scalar_operand(b);
  const bool b_scalar = is_scalar_operand(b) && !is_scalar_operand(a);
  if (!a_scalar && !b_scalar && a.shape() != b.shape())
    throw ShapeError(std::string(op) + ": operand shapes " + to_string(a.shape()) +
                     " and " + to_string(b.shape()) +
                     " differ (only identical shapes or a scalar operand are allowed)");
  const Shape shape = a_scalar ? b.shape() : a.shape();
  const std::size_t n = static_cast<std::size_t>(shape_numel(shape));
  const DType dt = a.dtype();
  Buffer out(dt, n);
  detail::dispatch(dt, [&](auto tag) {
    using T = decltype(tag);
    auto x = a.data<T>();
    auto y = b.data<T>();
    auto o = out.as<T>();
    for (std::size_t i = 0; i < n; ++i)
      o[i] = fwd(x[a_scalar ? 0 : i], y[b_scalar ? 0 : i]);
  });
  const Tensor inputs[] = {a, b};
  return make_op_result(
      shape, dt, std::move(out), inputs, op,
      [a_scalar, b_scalar, dfda, dfdb](
          const TensorImpl& o, std::span<const std::shared_ptr<TensorImpl>> ins) {
        detail::dispatch(o.dtype, [&](auto tag) {
          using T = decltype(tag);
          auto g = o.grad.as<T>();
          auto z = o.data.as<T>();
          auto x = ins[0]->data.as<T>();
          auto y = ins[1]->data.as<T>();
          const std::size_t n = g.size();
          if (ins[0]->requires_grad) {
            auto ga = accumulate_grad<T>(*ins[0]);
            for (std::size_t i = 0; i < n; ++i) {
              const std::size_t ia = a_scalar ? 0 : i;
              ga[ia] += g[i] * dfda(x[ia], y[b_scalar ? 0 : i], z[i]);
            }
          }
          if (ins[1]->requires_grad) {
            auto gb = accumulate_grad<T>(*ins[1]);
            for (std::size_t i = 0; i < n; ++i) {
              const std::size_t ib = b_scalar ? 0 : i;
              gb[ib] += g[i] * dfdb(x[a_scalar ? 0 : i], y[ib], z[i]);
            }
          }
        });
      });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "add", [](auto x, auto y) { return x + y; },
      [](auto, auto, auto) { return 1; }, [](auto, auto, auto) { return 1; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "sub", [](auto x, auto y) { return x - y; },
      [](auto, auto, auto) { return 1; }, [](auto, auto, auto) { return -1; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "mul", [](auto x, auto y) { return x * y; },
      [](auto, auto y, auto) { return y; }, [](auto x, auto, auto) { return x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
  if (debug_checks() && b.defined()) {
    for (double v : b.values())
      if (v == 0.0) throw Error("div: division by exact zero");
  }
  return binary(
      a, b, "div", [](auto x, auto y) { return x / y; },
      [](auto, auto y, auto) { return 1 / y; },
      [](auto, auto y, auto z) { return -z / y; });
}

Tensor scale(const Tensor& x, double factor) {
  return unary(
      x, "scale", [factor](auto v) { return v * static_cast<decltype(v)>(factor); },
      [factor](auto v, auto) { return static_cast<decltype(v)>(factor); });
}

Tensor add_scalar(const Tensor& x, double value) {
  return unary(
      x, "add_scalar", [value](auto v) { return v + static_cast<decltype(v)>(value); },
      [](auto v, auto) { return decltype(v)(1); });
}

// d/dx x^p at x = 0 with p < 1 is infinite; the subgradient 0 is used there.
Tensor pow(const Tensor& x, double exponent) {
  return unary(
      x, "pow",
      [exponent](auto v) {
        using T = decltype(v);
        return static_cast<T>(std::pow(v, static_cast<T>(exponent)));
      },
      [exponent](auto v, auto) {
        using T = decltype(v);
        if (v == T(0) && exponent < 1.0) return T(0);
        return static_cast<T>(exponent * std::pow(v, static_cast<T>(exponent - 1.0)));
      });
}

Tensor sqrt(const Tensor& x) {
  return unary(
      x, "sqrt", [](auto v) { return std::sqrt(v); },
      [](auto v, auto y) {
        using T = decltype(v);
        return y > T(0) ? T(0.5) / y : T(0);
      });
}

Tensor clamp_min(const Tensor& x, double lo) {
  return unary(
      x, "clamp_min",
      [lo](auto v) { return std::max(v, static_cast<decltype(v)>(lo)); },
      [lo](auto v, auto) {
        using T = decltype(v);
        return v > static_cast<T>(lo) ? T(1) : T(0);
      });
}

Tensor clamp_max(const Tensor& x, double hi) {
  return unary(
      x, "clamp_max",
      [hi](auto v) { return std::min(v, static_cast<decltype(v)>(hi)); },
      [hi](auto v, auto) {
        using T = decltype(v);
        return v < static_cast<T>(hi) ? T(1) : T(0);
      });
}

Tensor clamp(const Tensor& x, double lo, double hi) {
  if (lo > hi) throw Error("clamp: lo > hi");
  return unary(
      x, "clamp",
      [lo, hi](auto v) {
        using T = decltype(v);
        return std::clamp(v, static_cast<T>(lo), static_cast<T>(hi));
      },
      [lo, hi](auto v, auto) {
        using T = decltype(v);
        return (v > static_cast<T>(lo) && v < static_cast<T>(hi)) ? T(1) : T(0);
      });
}

Tensor leaky_relu(const Tensor& x, double slope) {
  return unary(
      x, "leaky_relu",
      [slope](auto v) {
        using T = decltype(v);
        return v > T(0) ? v : v * static_cast<T>(slope);
      },
      [slope](auto v, auto) {
        using T = decltype(v);
        return v > T(0) ? T(1) : static_cast<T>(slope);
      });
}

Tensor relu(const Tensor& x) {
  return unary(
      x, "relu",
      [](auto v) {
        using T = decltype(v);
        return v > T(0) ? v : T(0);
      },
      [](auto v, auto) {
        using T = decltype(v);
        return v > T(0) ? T(1) : T(0);
      });
}

Tensor abs(const Tensor& x) {
  return unary(
      x, "abs", [](auto v) { return std::abs(v); },
      [](auto v, auto) {
        using T = decltype(v);
        return v > T(0) ? T(1) : (v < T(0) ? T(-1) : T(0));
      });
}

Tensor sigmoid(const Tensor& x) {
  return unary(
      x, "sigmoid",
      [](auto v) {
        using T = decltype(v);
        return T(1) / (T(1) + std::exp(-v));
      },
      [](auto, auto y) { return y * (decltype(y)(1) - y); });
}

Tensor tanh(const Tensor& x) {
  return unary(
      x, "tanh", [](auto v) { return std::tanh(v); },
      [](auto, auto y) { return decltype(y)(1) - y * y; });
}

Tensor sum(const Tensor& x) {
  require_defined(x, "sum");
  const DType dt = x.dtype();
  Buffer out(dt, 1);
  detail::dispatch(dt, [&](auto tag) {
    using T = decltype(tag);
    T acc = 0;
    for (T v : x.data<T>()) acc += v;
    out.as<T>()[0] = acc;
  });
  const Tensor inputs[] = {x};
  return make_op_result(
      {}, dt, std::move(out), inputs, "sum",
      [](const TensorImpl& o, std::span<const std::shared_ptr<TensorImpl>> ins) {
        detail::dispatch(o.dtype, [&](auto tag) {
          using T = decltype(tag);
          const T g = o.grad.as<T>()[0];
          for (T& v : accumulate_grad<T>(*ins[0])) v += g;
        });
      });
}

Tensor mean(const Tensor& x) {
  const std::int64_t n = x.numel();
  if (n == 0) throw Error("mean of an empty tensor");
  return scale(sum(x), 1.0 / static_cast<double>(n));
}

Tensor l1_distance(const Tensor& a, const Tensor& b) {
  require_defined(a, "l1_distance");
  require_defined(b, "l1_distance");
  if (a.shape() != b.shape())
    throw ShapeError("l1_distance: shapes " + to_string(a.shape()) + " and " +
                     to_string(b.shape()) + " differ");
  if (a.dtype() != b.dtype()) throw Error("l1_distance: dtype mismatch");
  const std::int64_t n = a.numel();
  if (n == 0) throw Error("l1_distance of empty tensors");
  const DType dt = a.dtype();
  Buffer out(dt, 1);
  detail::dispatch(dt, [&](auto tag) {
    using T = decltype(tag);
    auto x = a.data<T>();
    auto y = b.data<T>();
    T acc = 0;
    for (std::size_t i = 0; i < x.size(); ++i) acc += std::abs(x[i] - y[i]);
    out.as<T>()[0] = acc / static_cast<T>(n);
  });
  const Tensor inputs[] = {a, b};
  return make_op_result(
      {}, dt, std::move(out), inputs, "l1_distance",
      [n](const TensorImpl& o, std::span<const std::shared_ptr<TensorImpl>> ins) {
        detail::dispatch(o.dtype, [&](auto tag) {
          using T = decltype(tag);
          const T g = o.grad.as<T>()[0] / static_cast<T>(n);
          auto x = ins[0]->data.as<T>();
          auto y = ins[1]->data.as<T>();
          auto sign = [](T d) { return d > T(0) ? T(1) : (d < T(0) ? T(-1) : T(0)); };
          if (ins[0]->requires_grad) {
            auto ga = accumulate_grad<T>(*ins[0]);
            for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g * sign(x[i] - y[i]);
          }
          if (ins[1]->requires_grad) {
            auto gb = accumulate_grad<T>(*ins[1]);
            for (std::size_t i = 0; i < gb.size(); ++i) gb[i] -= g * sign(x[i] - y[i]);
          }
        });
      });
}

}  // namespace matx
