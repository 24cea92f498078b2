#include "matx/gradtensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>
#include <unordered_set>

namespace matx {

namespace {

std::atomic<DType> g_default_dtype{DType::f32};
std::atomic<bool> g_debug_checks{false};

}  // namespace

const char* to_string(DType dtype) {
  return dtype == DType::f32 ? "f32" : "f64";
}

void set_default_dtype(DType dtype) { g_default_dtype = dtype; }
DType default_dtype() { return g_default_dtype; }
void set_debug_checks(bool enabled) { g_debug_checks = enabled; }
bool debug_checks() { return g_debug_checks; }

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::int64_t shape_numel(const Shape& shape) {
  std::int64_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

namespace detail {

Buffer::Buffer(DType dtype, std::size_t size) {
  if (dtype == DType::f32)
    storage_ = std::vector<float>(size, 0.0f);
  else
    storage_ = std::vector<double>(size, 0.0);
}

std::size_t Buffer::size() const {
  return std::visit(
      [](const auto& v) -> std::size_t {
        if constexpr (std::is_same_v<std::decay_t<decltype(v)>, std::monostate>)
          return 0;
        else
          return v.size();
      },
      storage_);
}

DType Buffer::dtype() const {
  return std::holds_alternative<std::vector<double>>(storage_) ? DType::f64
                                                                : DType::f32;
}

void Buffer::fill_zero() {
  std::visit(
      [](auto& v) {
        if constexpr (!std::is_same_v<std::decay_t<decltype(v)>,
                                      std::monostate>)
          std::fill(v.begin(), v.end(), 0);
      },
      storage_);
}

Buffer& TensorImpl::ensure_grad() {
  if (grad.empty()) grad = Buffer(dtype, data.size());
  return grad;
}

}  // namespace detail

namespace {

std::shared_ptr<detail::TensorImpl> new_impl(Shape shape, DType dtype,
                                             bool requires_grad) {
  for (auto d : shape)
    if (d < 0) throw ShapeError("negative dimension in shape " + to_string(shape));
  auto impl = std::make_shared<detail::TensorImpl>();
  impl->data = detail::Buffer(dtype, static_cast<std::size_t>(shape_numel(shape)));
  impl->shape = std::move(shape);
  impl->dtype = dtype;
  impl->requires_grad = requires_grad;
  return impl;
}

}  // namespace

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return zeros(std::move(shape), default_dtype(), requires_grad);
}

Tensor Tensor::zeros(Shape shape, DType dtype, bool requires_grad) {
  return Tensor(new_impl(std::move(shape), dtype, requires_grad));
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  return full(std::move(shape), value, default_dtype(), requires_grad);
}

Tensor Tensor::full(Shape shape, double value, DType dtype, bool requires_grad) {
  Tensor t = zeros(std::move(shape), dtype, requires_grad);
  detail::dispatch(dtype, [&](auto tag) {
    using T = decltype(tag);
    auto d = t.impl_->data.as<T>();
    std::fill(d.begin(), d.end(), static_cast<T>(value));
  });
  return t;
}

Tensor Tensor::from_values(Shape shape, std::span<const double> values,
                           bool requires_grad) {
  return from_values(std::move(shape), values, default_dtype(), requires_grad);
}

Tensor Tensor::from_values(Shape shape, std::span<const double> values,
                           DType dtype, bool requires_grad) {
  if (shape_numel(shape) != static_cast<std::int64_t>(values.size()))
    throw ShapeError("from_values: shape " + to_string(shape) + " needs " +
                     std::to_string(shape_numel(shape)) + " values, got " +
                     std::to_string(values.size()));
  Tensor t = zeros(std::move(shape), dtype, requires_grad);
  detail::dispatch(dtype, [&](auto tag) {
    using T = decltype(tag);
    auto d = t.impl_->data.as<T>();
    std::transform(values.begin(), values.end(), d.begin(),
                   [](double v) { return static_cast<T>(v); });
  });
  return t;
}

Tensor Tensor::from_floats(Shape shape, std::span<const float> values,
                           DType dtype, bool requires_grad) {
  if (shape_numel(shape) != static_cast<std::int64_t>(values.size()))
    throw ShapeError("from_floats: shape " + to_string(shape) + " needs " +
                     std::to_string(shape_numel(shape)) + " values, got " +
                     std::to_string(values.size()));
  Tensor t = zeros(std::move(shape), dtype, requires_grad);
  detail::dispatch(dtype, [&](auto tag) {
    using T = decltype(tag);
    auto d = t.impl_->data.as<T>();
    std::transform(values.begin(), values.end(), d.begin(),
                   [](float v) { return static_cast<T>(v); });
  });
  return t;
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return full({}, value, default_dtype(), requires_grad);
}

Tensor Tensor::scalar(double value, DType dtype, bool requires_grad) {
  return full({}, value, dtype, requires_grad);
}

const Shape& Tensor::shape() const {
  if (!impl_) throw Error("use of undefined tensor");
  return impl_->shape;
}

std::int64_t Tensor::numel() const { return shape_numel(shape()); }

std::int64_t Tensor::dim(int axis) const {
  const auto& s = shape();
  if (axis < 0 || axis >= static_cast<int>(s.size()))
    throw ShapeError("axis " + std::to_string(axis) + " out of range for shape " +
                     to_string(s));
  return s[static_cast<std::size_t>(axis)];
}

DType Tensor::dtype() const {
  if (!impl_) throw Error("use of undefined tensor");
  return impl_->dtype;
}

bool Tensor::requires_grad() const { return impl_ && impl_->requires_grad; }
bool Tensor::is_leaf() const { return impl_ && !impl_->node; }

double Tensor::item() const {
  if (numel() != 1)
    throw ShapeError("item() on tensor of shape " + to_string(shape()));
  return at(0);
}

double Tensor::at(std::int64_t flat_index) const {
  if (flat_index < 0 || flat_index >= numel())
    throw ShapeError("index " + std::to_string(flat_index) +
                     " out of range for shape " + to_string(shape()));
  return detail::dispatch(dtype(), [&](auto tag) -> double {
    using T = decltype(tag);
    return static_cast<double>(impl_->data.as<T>()[static_cast<std::size_t>(flat_index)]);
  });
}

double Tensor::at(std::int64_t c, std::int64_t y, std::int64_t x) const {
  if (rank() != 3) throw ShapeError("at(c,y,x) on shape " + to_string(shape()));
  return at((c * height() + y) * width() + x);
}

std::vector<double> Tensor::values() const {
  return detail::dispatch(dtype(), [&](auto tag) {
    using T = decltype(tag);
    auto d = impl_->data.as<T>();
    return std::vector<double>(d.begin(), d.end());
  });
}

std::vector<float> Tensor::to_floats() const {
  return detail::dispatch(dtype(), [&](auto tag) {
    using T = decltype(tag);
    auto d = impl_->data.as<T>();
    std::vector<float> out(d.size());
    std::transform(d.begin(), d.end(), out.begin(),
                   [](T v) { return static_cast<float>(v); });
    return out;
  });
}

void Tensor::set_values(std::span<const double> values) {
  check_mutable();
  if (static_cast<std::int64_t>(values.size()) != numel())
    throw ShapeError("set_values: expected " + std::to_string(numel()) +
                     " values, got " + std::to_string(values.size()));
  detail::dispatch(dtype(), [&](auto tag) {
    using T = decltype(tag);
    auto d = impl_->data.as<T>();
    std::transform(values.begin(), values.end(), d.begin(),
                   [](double v) { return static_cast<T>(v); });
  });
}

void Tensor::check_mutable() const {
  if (!impl_) throw Error("use of undefined tensor");
  if (impl_->node)
    throw Error("in-place modification of a non-leaf tensor produced by '" +
                std::string(impl_->node->op) + "'");
}

Tensor Tensor::grad() const {
  if (!impl_) throw Error("use of undefined tensor");
  auto out = new_impl(impl_->shape, impl_->dtype, false);
  if (!impl_->grad.empty()) out->data = impl_->grad;
  return Tensor(out);
}

bool Tensor::has_grad() const { return impl_ && !impl_->grad.empty(); }

void Tensor::zero_grad() {
  if (impl_ && !impl_->grad.empty()) impl_->grad.fill_zero();
}

void Tensor::set_requires_grad(bool requires_grad) {
  check_mutable();
  impl_->requires_grad = requires_grad;
}

void Tensor::backward() const {
  if (!impl_) throw Error("backward() on undefined tensor");
  if (numel() != 1)
    throw ShapeError("backward() requires a scalar loss, got shape " +
                     to_string(shape()));
  if (!impl_->requires_grad)
    throw Error("backward(): loss does not depend on any requires_grad tensor");

  // Iterative post-order DFS gives a topological order (inputs before users).
  std::vector<detail::TensorImpl*> order;
  std::unordered_set<detail::TensorImpl*> visited;
  std::vector<std::pair<detail::TensorImpl*, std::size_t>> stack;
  stack.emplace_back(impl_.get(), 0);
  visited.insert(impl_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (node->node && next < node->node->inputs.size()) {
      detail::TensorImpl* child = node->node->inputs[next++].get();
      if (child->requires_grad && visited.insert(child).second)
        stack.emplace_back(child, 0);
      continue;
    }
    order.push_back(node);
    stack.pop_back();
  }

  for (auto* t : order)
    if (t->node) t->ensure_grad().fill_zero();

  detail::dispatch(impl_->dtype, [&](auto tag) {
    using T = decltype(tag);
    impl_->ensure_grad().as<T>()[0] += T(1);
  });

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::TensorImpl* t = *it;
    if (!t->node) continue;
    t->node->backward(*t, t->node->inputs);
  }
}

void Tensor::release_graph() {
  if (impl_) impl_->node.reset();
}

Tensor Tensor::detach() const {
  if (!impl_) throw Error("detach() on undefined tensor");
  auto out = std::make_shared<detail::TensorImpl>();
  out->shape = impl_->shape;
  out->dtype = impl_->dtype;
  out->data = impl_->data;
  return Tensor(out);
}

Tensor Tensor::clone(bool requires_grad) const {
  Tensor t = detach();
  t.impl_->requires_grad = requires_grad;
  return t;
}

Tensor Tensor::to(DType target) const {
  if (dtype() == target) return *this;
  Tensor out = zeros(shape(), target, false);
  detail::dispatch(dtype(), [&](auto src_tag) {
    using S = decltype(src_tag);
    detail::dispatch(target, [&](auto dst_tag) {
      using D = decltype(dst_tag);
      auto s = impl_->data.as<S>();
      auto d = out.impl_->data.as<D>();
      std::transform(s.begin(), s.end(), d.begin(),
                     [](S v) { return static_cast<D>(v); });
    });
  });
  if (!requires_grad()) return out;

  std::vector<Tensor> inputs{*this};
  return make_op_result(
      shape(), target, out.impl_->data, inputs, "to_dtype",
      [](const detail::TensorImpl& o, auto ins) {
        detail::dispatch(o.dtype, [&](auto out_tag) {
          using D = decltype(out_tag);
          auto g = o.grad.as<D>();
          detail::dispatch(ins[0]->dtype, [&](auto in_tag) {
            using S = decltype(in_tag);
            auto gi = accumulate_grad<S>(*ins[0]);
            for (std::size_t i = 0; i < gi.size(); ++i)
              gi[i] += static_cast<S>(g[i]);
          });
        });
      });
}

bool Tensor::has_nonfinite() const {
  return detail::dispatch(dtype(), [&](auto tag) {
    using T = decltype(tag);
    auto d = impl_->data.as<T>();
    return std::any_of(d.begin(), d.end(),
                       [](T v) { return !std::isfinite(v); });
  });
}

Tensor make_op_result(Shape shape, DType dtype, detail::Buffer data,
                      std::span<const Tensor> inputs, const char* op,
                      detail::BackwardFn backward) {
  auto impl = std::make_shared<detail::TensorImpl>();
  impl->shape = std::move(shape);
  impl->dtype = dtype;
  impl->data = std::move(data);
  if (static_cast<std::int64_t>(impl->data.size()) != shape_numel(impl->shape))
    throw ShapeError(std::string(op) + ": result buffer does not match shape " +
                     to_string(impl->shape));
  bool any_grad = false;
  for (const auto& in : inputs) any_grad = any_grad || in.requires_grad();
  if (any_grad) {
    auto node = std::make_shared<detail::Node>();
    node->op = op;
    node->inputs.reserve(inputs.size());
    for (const auto& in : inputs) node->inputs.push_back(in.impl());
    node->backward = std::move(backward);
    impl->node = std::move(node);
    impl->requires_grad = true;
  }
  return Tensor(impl);
}

}  // namespace matx
