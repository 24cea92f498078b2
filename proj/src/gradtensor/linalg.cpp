#include <Eigen/Core>
#include <algorithm>
#include <memory>
#include <numeric>

#include "index_op.hpp"
#include "matx/gradtensor.hpp"

namespace matx {

using detail::Buffer;
using detail::TensorImpl;

namespace detail {

Tensor index_op(const Tensor& input, Shape out_shape,
                std::vector<std::int64_t> map, const char* op) {
  if (!input.defined()) throw Error(std::string(op) + ": undefined input");
  if (static_cast<std::int64_t>(map.size()) != shape_numel(out_shape))
    throw ShapeError(std::string(op) + ": index map does not match output shape");
  const DType dt = input.dtype();
  Buffer out(dt, map.size());
  dispatch(dt, [&](auto tag) {
    using T = decltype(tag);
    auto in = input.data<T>();
    auto o = out.as<T>();
    for (std::size_t i = 0; i < map.size(); ++i) o[i] = in[static_cast<std::size_t>(map[i])];
  });
  if (!input.requires_grad())
    return make_op_result(std::move(out_shape), dt, std::move(out), {}, op, {});
  auto shared_map = std::make_shared<const std::vector<std::int64_t>>(std::move(map));
  const Tensor inputs[] = {input};
  return make_op_result(
      std::move(out_shape), dt, std::move(out), inputs, op,
      [shared_map](const TensorImpl& o, std::span<const std::shared_ptr<TensorImpl>> ins) {
        dispatch(o.dtype, [&](auto tag) {
          using T = decltype(tag);
          auto g = o.grad.as<T>();
          auto gi = accumulate_grad<T>(*ins[0]);
          const auto& m = *shared_map;
          for (std::size_t i = 0; i < m.size(); ++i) gi[static_cast<std::size_t>(m[i])] += g[i];
        });
      });
}

}  // namespace detail

namespace {

template <class T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using ConstMap = Eigen::Map<const RowMat<T>>;
template <class T>
using MutMap = Eigen::Map<RowMat<T>>;

}  // namespace

SortResult sort1d(const Tensor& input) {
  if (!input.defined() || input.rank() != 1)
    throw ShapeError("sort1d: expected a rank-1 tensor");
  const std::int64_t n = input.dim(0);
  if (n < 1) throw ShapeError("sort1d: empty input");
  std::vector<std::int64_t> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  detail::dispatch(input.dtype(), [&](auto tag) {
    using T = decltype(tag);
    auto v = input.data<T>();
    std::stable_sort(perm.begin(), perm.end(), [&](std::int64_t a, std::int64_t b) {
      return v[static_cast<std::size_t>(a)] < v[static_cast<std::size_t>(b)];
    });
  });
  Tensor values = detail::index_op(input, {n}, perm, "sort1d");
  return {std::move(values), std::move(perm)};
}

Tensor matmul(const Tensor& a, const Tensor& b, Transpose ta, Transpose tb) {
  if (!a.defined() || !b.defined() || a.rank() != 2 || b.rank() != 2)
    throw ShapeError("matmul: operands must be rank-2");
  if (a.dtype() != b.dtype()) throw Error("matmul: dtype mismatch");
  const bool tA = ta == Transpose::yes, tB = tb == Transpose::yes;
  const std::int64_t n = tA ? a.dim(1) : a.dim(0);
  const std::int64_t k = tA ? a.dim(0) : a.dim(1);
  const std::int64_t kb = tB ? b.dim(1) : b.dim(0);
  const std::int64_t m = tB ? b.dim(0) : b.dim(1);
  if (k != kb)
    throw ShapeError("matmul: inner dimensions differ for " + to_string(a.shape()) +
                     (tA ? "^T" : "") + " x " + to_string(b.shape()) + (tB ? "^T" : ""));
  const DType dt = a.dtype();
  Buffer out(dt, static_cast<std::size_t>(n * m));
  detail::dispatch(dt, [&](auto tag) {
    using T = decltype(tag);
    ConstMap<T> A(a.data<T>().data(), a.dim(0), a.dim(1));
    ConstMap<T> B(b.data<T>().data(), b.dim(0), b.dim(1));
    MutMap<T> C(out.as<T>().data(), n, m);
    if (!tA && !tB) C.noalias() = A * B;
    else if (tA && !tB) C.noalias() = A.transpose() * B;
    else if (!tA && tB) C.noalias() = A * B.transpose();
    else C.noalias() = A.transpose() * B.transpose();
  });
  const Tensor inputs[] = {a, b};
  return make_op_result(
      {n, m}, dt, std::move(out), inputs, "matmul",
      [tA, tB, n, m](const TensorImpl& o, std::span<const std::shared_ptr<TensorImpl>> ins) {
        detail::dispatch(o.dtype, [&](auto tag) {
          using T = decltype(tag);
          ConstMap<T> G(o.grad.as<T>().data(), n, m);
          const auto& ia = *ins[0];
          const auto& ib = *ins[1];
          ConstMap<T> A(ia.data.as<T>().data(), ia.shape[0], ia.shape[1]);
          ConstMap<T> B(ib.data.as<T>().data(), ib.shape[0], ib.shape[1]);
          // C = A' B' with A' = op(A), B' = op(B): dA' = G B'^T, dB' = A'^T G.
          if (ia.requires_grad) {
            MutMap<T> gA(accumulate_grad<T>(*ins[0]).data(), ia.shape[0], ia.shape[1]);
            if (!tA && !tB) gA.noalias() += G * B.transpose();
            else if (!tA && tB) gA.noalias() += G * B;
            else if (tA && !tB) gA.noalias() += B * G.transpose();
            else gA.noalias() += B.transpose() * G.transpose();
          }
          if (ib.requires_grad) {
            MutMap<T> gB(accumulate_grad<T>(*ins[1]).data(), ib.shape[0], ib.shape[1]);
            if (!tA && !tB) gB.noalias() += A.transpose() * G;
            else if (tA && !tB) gB.noalias() += A * G;
            else if (!tA && tB) gB.noalias() += G.transpose() * A;
            else gB.noalias() += G.transpose() * A.transpose();
          }
        });
      });
}

Tensor gather_pixels(const Tensor& features,
                     std::span<const std::int64_t> pixel_indices) {
  if (!features.defined() || features.rank() != 3)
    throw ShapeError("gather_pixels: features must have shape [C,H,W]");
  const std::int64_t C = features.dim(0), HW = features.dim(1) * features.dim(2);
  const std::int64_t n = static_cast<std::int64_t>(pixel_indices.size());
  std::vector<std::int64_t> map(static_cast<std::size_t>(n * C));
  for (std::int64_t i = 0; i < n; ++i) {
    const std::int64_t p = pixel_indices[static_cast<std::size_t>(i)];
    if (p < 0 || p >= HW) throw ShapeError("gather_pixels: pixel index out of range");
    for (std::int64_t c = 0; c < C; ++c) map[static_cast<std::size_t>(i * C + c)] = c * HW + p;
  }
  return detail::index_op(features, {n, C}, std::move(map), "gather_pixels");
}

Tensor select_rows(const Tensor& x, std::span<const std::int64_t> rows) {
  if (!x.defined() || x.rank() != 2) throw ShapeError("select_rows: expected [n,C]");
  const std::int64_t n = x.dim(0), C = x.dim(1);
  const std::int64_t k = static_cast<std::int64_t>(rows.size());
  std::vector<std::int64_t> map(static_cast<std::size_t>(k * C));
  for (std::int64_t i = 0; i < k; ++i) {
    const std::int64_t r = rows[static_cast<std::size_t>(i)];
    if (r < 0 || r >= n) throw ShapeError("select_rows: row index out of range");
    for (std::int64_t c = 0; c < C; ++c) map[static_cast<std::size_t>(i * C + c)] = r * C + c;
  }
  return detail::index_op(x, {k, C}, std::move(map), "select_rows");
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel())
    throw ShapeError("reshape: cannot view " + to_string(x.shape()) + " as " +
                     to_string(shape));
  std::vector<std::int64_t> map(static_cast<std::size_t>(x.numel()));
  std::iota(map.begin(), map.end(), 0);
  return detail::index_op(x, std::move(shape), std::move(map), "reshape");
}

}  // namespace matx
