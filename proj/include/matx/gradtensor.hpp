#pragma once

// Reverse-mode automatic differentiation over dense (C,H,W) grids, matrices,
// vectors and scalars.
//
// A Tensor is a shared handle. Ops build a graph on the fly whenever at least
// one input requires a gradient; Tensor::backward() walks that graph in
// reverse topological order. The graph lives as long as some tensor that
// references it, so dropping the loss (or calling release_graph()) frees the
// saved intermediates.

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace matx {

enum class DType : std::uint8_t { f32, f64 };

const char* to_string(DType dtype);

// Precision of tensors created without an explicit dtype.
void set_default_dtype(DType dtype);
DType default_dtype();

// Enables finite-value checks and exact-zero division errors.
void set_debug_checks(bool enabled);
bool debug_checks();

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

using Shape = std::vector<std::int64_t>;

std::string to_string(const Shape& shape);
std::int64_t shape_numel(const Shape& shape);

namespace detail {

class Buffer {
 public:
  Buffer() = default;
  Buffer(DType dtype, std::size_t size);

  bool empty() const { return std::holds_alternative<std::monostate>(storage_); }
  std::size_t size() const;
  DType dtype() const;

  template <class T>
  std::span<T> as() {
    return std::span<T>(std::get<std::vector<T>>(storage_));
  }
  template <class T>
  std::span<const T> as() const {
    return std::span<const T>(std::get<std::vector<T>>(storage_));
  }

  void fill_zero();

 private:
  std::variant<std::monostate, std::vector<float>, std::vector<double>> storage_;
};

struct TensorImpl;

using BackwardFn = std::function<void(
    const TensorImpl& out,
    std::span<const std::shared_ptr<TensorImpl>> inputs)>;

struct Node {
  const char* op = "";
  std::vector<std::shared_ptr<TensorImpl>> inputs;
  BackwardFn backward;
};

struct TensorImpl {
  Shape shape;
  DType dtype = DType::f32;
  Buffer data;
  Buffer grad;
  bool requires_grad = false;
  std::shared_ptr<Node> node;

  // Allocates a zeroed gradient buffer on first use.
  Buffer& ensure_grad();
};

template <class F>
decltype(auto) dispatch(DType dtype, F&& f) {
  if (dtype == DType::f32) return std::forward<F>(f)(float{});
  return std::forward<F>(f)(double{});
}

}  // namespace detail

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor zeros(Shape shape, DType dtype, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor full(Shape shape, double value, DType dtype,
                     bool requires_grad = false);
  static Tensor from_values(Shape shape, std::span<const double> values,
                            bool requires_grad = false);
  static Tensor from_values(Shape shape, std::span<const double> values,
                            DType dtype, bool requires_grad = false);
  static Tensor from_floats(Shape shape, std::span<const float> values,
                            DType dtype, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor scalar(double value, DType dtype, bool requires_grad = false);

  bool defined() const { return static_cast<bool>(impl_); }
  const Shape& shape() const;
  int rank() const { return static_cast<int>(shape().size()); }
  std::int64_t numel() const;
  std::int64_t dim(int axis) const;
  DType dtype() const;
  bool requires_grad() const;
  bool is_leaf() const;

  // Convenience accessors for (C,H,W) tensors.
  std::int64_t channels() const { return dim(0); }
  std::int64_t height() const { return dim(1); }
  std::int64_t width() const { return dim(2); }

  double item() const;
  double at(std::int64_t flat_index) const;
  double at(std::int64_t c, std::int64_t y, std::int64_t x) const;
  std::vector<double> values() const;
  std::vector<float> to_floats() const;

  template <class T>
  std::span<const T> data() const {
    return impl_->data.as<T>();
  }
  // Mutable access is only permitted on leaves (optimizers, loaders).
  template <class T>
  std::span<T> mutable_data() {
    check_mutable();
    return impl_->data.as<T>();
  }
  void set_values(std::span<const double> values);

  // Gradient accumulated by backward(); zeros if none was written yet.
  Tensor grad() const;
  bool has_grad() const;
  void zero_grad();
  void set_requires_grad(bool requires_grad);

  // Accumulates d(this)/d(x) into every requires_grad leaf x. this must be a
  // single-element tensor.
  void backward() const;
  // Drops the graph behind this tensor; saved intermediates are freed once no
  // other tensor references them.
  void release_graph();

  // Same values, no graph, requires_grad = false.
  Tensor detach() const;
  // Deep copy of the values as a fresh leaf.
  Tensor clone(bool requires_grad = false) const;
  Tensor to(DType dtype) const;

  bool has_nonfinite() const;

  std::shared_ptr<detail::TensorImpl> impl() const { return impl_; }
  explicit Tensor(std::shared_ptr<detail::TensorImpl> impl)
      : impl_(std::move(impl)) {}

 private:
  void check_mutable() const;

  std::shared_ptr<detail::TensorImpl> impl_;
};

// ---------------------------------------------------------------------------
// Elementwise. Binary ops accept identical shapes or a single-element
// (rank-0) operand on either side.

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);
Tensor add_scalar(const Tensor& x, double value);
Tensor pow(const Tensor& x, double exponent);
Tensor sqrt(const Tensor& x);
Tensor clamp_min(const Tensor& x, double lo);
Tensor clamp_max(const Tensor& x, double hi);
Tensor clamp(const Tensor& x, double lo, double hi);
Tensor leaky_relu(const Tensor& x, double slope);
Tensor relu(const Tensor& x);
Tensor abs(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
inline Tensor operator*(const Tensor& a, double s) { return scale(a, s); }
inline Tensor operator*(double s, const Tensor& a) { return scale(a, s); }
inline Tensor operator+(const Tensor& a, double s) { return add_scalar(a, s); }
inline Tensor operator-(const Tensor& a, double s) { return add_scalar(a, -s); }

// Reductions to a rank-0 tensor.
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
// mean(|a - b|)
Tensor l1_distance(const Tensor& a, const Tensor& b);

// ---------------------------------------------------------------------------
// Spatial ops on (C,H,W).

enum class Padding { circular, zero };
enum class Upsample { nearest, bilinear_circular };

// Stride-1, same-size convolution. weights: (K,C,kh,kw) with odd kh, kw;
// circular padding additionally needs H >= kh and W >= kw.
// bias may be an undefined Tensor.
Tensor conv2d(const Tensor& input, const Tensor& weights, const Tensor& bias,
              Padding padding);
Tensor upsample2x(const Tensor& input, Upsample mode);
Tensor avgpool2x(const Tensor& input);
// out[c][(y + dy) mod H][(x + dx) mod W] = in[c][y][x]
Tensor cyclic_shift(const Tensor& input, std::int64_t dx, std::int64_t dy);
// k x k toroidal repetition.
Tensor tile(const Tensor& input, int k);
// out[c][y][x] = in[c][(y0 + y) mod H][(x0 + x) mod W]
Tensor crop_toroidal(const Tensor& input, std::int64_t y0, std::int64_t x0,
                     std::int64_t height, std::int64_t width);

Tensor slice_channels(const Tensor& x, std::int64_t begin, std::int64_t count);
Tensor concat_channels(std::span<const Tensor> parts);
// (1,H,W) -> (C,H,W) by repetition.
Tensor expand_channels(const Tensor& x, std::int64_t channels);
// (C) -> (C,H,W) by repetition.
Tensor broadcast_spatial(const Tensor& v, std::int64_t height,
                         std::int64_t width);
// out[c] = x[c] * scale[c] + bias[c]; scale, bias are (C).
Tensor channel_affine(const Tensor& x, const Tensor& scale, const Tensor& bias);
// (2,H,W) vectors scaled by 1 / max(1, |v|).
Tensor unit_disk_clamp(const Tensor& xy);

// ---------------------------------------------------------------------------
// Matrices and vectors.

struct SortResult {
  Tensor values;
  // values[i] = input[permutation[i]]
  std::vector<std::int64_t> permutation;
};

// Ascending stable sort of a rank-1 tensor.
SortResult sort1d(const Tensor& input);

enum class Transpose { no, yes };
Tensor matmul(const Tensor& a, const Tensor& b, Transpose ta = Transpose::no,
              Transpose tb = Transpose::no);
// (C,H,W) -> (n,C): the channel vectors of the listed flat pixel indices.
Tensor gather_pixels(const Tensor& features,
                     std::span<const std::int64_t> pixel_indices);
// (n,C) -> (k,C)
Tensor select_rows(const Tensor& x, std::span<const std::int64_t> rows);
Tensor reshape(const Tensor& x, Shape shape);

// ---------------------------------------------------------------------------
// Extension point for ops defined outside this module. The backward callback
// receives the output (data and grad) and the inputs; it must only write to
// inputs whose requires_grad is set, through accumulate_grad().

Tensor make_op_result(Shape shape, DType dtype, detail::Buffer data,
                      std::span<const Tensor> inputs, const char* op,
                      detail::BackwardFn backward);

template <class T>
std::span<T> accumulate_grad(detail::TensorImpl& input) {
  return input.ensure_grad().as<T>();
}

}  // namespace matx
