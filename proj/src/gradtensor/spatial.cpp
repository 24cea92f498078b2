#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "index_op.hpp"
#include "matx/gradtensor.hpp"
#include "matx/parallel.hpp"

namespace matx {

using detail::Buffer;
using detail::TensorImpl;

namespace {

template <class T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using StridedMap = Eigen::Map<RowMat<T>, 0, Eigen::OuterStride<>>;
template <class T>
using ConstStridedMap = Eigen::Map<const RowMat<T>, 0, Eigen::OuterStride<>>;

inline std::int64_t wrap(std::int64_t i, std::int64_t n) {
  i %= n;
  return i < 0 ? i + n : i;
}

void require_chw(const Tensor& t, const char* op, const char* operand) {
  if (!t.defined()) throw Error(std::string(op) + ": undefined " + operand);
  if (t.rank() != 3)
    throw ShapeError(std::string(op) + ": " + operand +
                     " must have shape [C,H,W], got " + to_string(t.shape()));
}

struct ConvGeometry {
  std::int64_t in_channels, out_channels, height, width, kh, kw;
  Padding padding;
  std::int64_t patch() const { return in_channels * kh * kw; }
  std::int64_t pixels() const { return height * width; }
};

// Rows [row0, row0 + rows) of the output, unrolled to patch() x (rows*W).
template <class T>
void im2col(const T* x, const ConvGeometry& g, std::int64_t row0,
            std::int64_t rows, T* cols) {
  const std::int64_t ncols = rows * g.width;
  const std::int64_t ph = g.kh / 2, pw = g.kw / 2;
  for (std::int64_t c = 0; c < g.in_channels; ++c) {
    const T* plane = x + c * g.pixels();
    for (std::int64_t ky = 0; ky < g.kh; ++ky) {
      for (std::int64_t kx = 0; kx < g.kw; ++kx) {
        T* dst = cols + ((c * g.kh + ky) * g.kw + kx) * ncols;
        for (std::int64_t y = 0; y < rows; ++y) {
          std::int64_t sy = row0 + y + ky - ph;
          T* drow = dst + y * g.width;
          if (g.padding == Padding::circular) {
            sy = wrap(sy, g.height);
          } else if (sy < 0 || sy >= g.height) {
            std::fill(drow, drow + g.width, T(0));
            continue;
          }
          const T* srow = plane + sy * g.width;
          for (std::int64_t xx = 0; xx < g.width; ++xx) {
            std::int64_t sx = xx + kx - pw;
            if (g.padding == Padding::circular) {
              drow[xx] = srow[wrap(sx, g.width)];
            } else {
              drow[xx] = (sx < 0 || sx >= g.width) ? T(0) : srow[sx];
            }
          }
        }
      }
    }
  }
}

template <class T>
void col2im_add(const T* cols, const ConvGeometry& g, std::int64_t row0,
                std::int64_t rows, T* gx) {
  const std::int64_t ncols = rows * g.width;
  const std::int64_t ph = g.kh / 2, pw = g.kw / 2;
  for (std::int64_t c = 0; c < g.in_channels; ++c) {
    T* plane = gx + c * g.pixels();
    for (std::int64_t ky = 0; ky < g.kh; ++ky) {
      for (std::int64_t kx = 0; kx < g.kw; ++kx) {
        const T* src = cols + ((c * g.kh + ky) * g.kw + kx) * ncols;
        for (std::int64_t y = 0; y < rows; ++y) {
          std::int64_t sy = row0 + y + ky - ph;
          if (g.padding == Padding::circular) {
            sy = wrap(sy, g.height);
          } else if (sy < 0 || sy >= g.height) {
            continue;
          }
          T* drow = plane + sy * g.width;
          const T* srow = src + y * g.width;
          for (std::int64_t xx = 0; xx < g.width; ++xx) {
            std::int64_t sx = xx + kx - pw;
            if (g.padding == Padding::circular) {
              drow[wrap(sx, g.width)] += srow[xx];
            } else if (sx >= 0 && sx < g.width) {
              drow[sx] += srow[xx];
            }
          }
        }
      }
    }
  }
}

// Output rows per im2col tile, bounding the unrolled buffer to ~16 MB.
std::int64_t rows_per_tile(const ConvGeometry& g, std::size_t elem_size) {
  const std::int64_t budget = (16 << 20) / static_cast<std::int64_t>(elem_size);
  const std::int64_t cols = std::max<std::int64_t>(g.width, budget / std::max<std::int64_t>(1, g.patch()));
  return std::clamp<std::int64_t>(cols / g.width, 1, g.height);
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& weights, const Tensor& bias,
              Padding padding) {
  require_chw(input, "conv2d", "input");
  if (!weights.defined() || weights.rank() != 4)
    throw ShapeError("conv2d: weights must have shape [K,C,kh,kw], got " +
                     (weights.defined() ? to_string(weights.shape()) : std::string("undefined")));
  ConvGeometry g{input.dim(0), weights.dim(0), input.dim(1), input.dim(2),
                 weights.dim(2), weights.dim(3), padding};
  if (weights.dim(1) != g.in_channels)
    throw ShapeError("conv2d: weights expect " + std::to_string(weights.dim(1)) +
                     " input channels (shape " + to_string(weights.shape()) +
                     "), input has shape " + to_string(input.shape()));
  if (g.kh % 2 == 0 || g.kw % 2 == 0)
    throw ShapeError("conv2d: kernel size must be odd, weights have shape " +
                     to_string(weights.shape()));
  // Zero padding is well defined for any size; wrapping needs a full kernel.
  if (padding == Padding::circular && (g.height < g.kh || g.width < g.kw))
    throw ShapeError("conv2d: input " + to_string(input.shape()) +
                     " smaller than kernel " + to_string(weights.shape()));
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != g.out_channels))
    throw ShapeError("conv2d: bias must have shape [" + std::to_string(g.out_channels) +
                     "], got " + to_string(bias.shape()));
  if (input.dtype() != weights.dtype() || (bias.defined() && bias.dtype() != input.dtype()))
    throw Error("conv2d: dtype mismatch between input, weights and bias");

  const DType dt = input.dtype();
  Buffer out(dt, static_cast<std::size_t>(g.out_channels * g.pixels()));
  detail::dispatch(dt, [&](auto tag) {
    using T = decltype(tag);
    const T* x = input.data<T>().data();
    Eigen::Map<const RowMat<T>> w(weights.data<T>().data(), g.out_channels, g.patch());
    T* y = out.as<T>().data();
    const std::int64_t tile_rows = rows_per_tile(g, sizeof(T));
    const std::int64_t tiles = (g.height + tile_rows - 1) / tile_rows;
    parallel_for(tiles, [&](std::int64_t t0, std::int64_t t1) {
      std::vector<T> cols;
      for (std::int64_t t = t0; t < t1; ++t) {
        const std::int64_t row0 = t * tile_rows;
        const std::int64_t rows = std::min(tile_rows, g.height - row0);
        const std::int64_t ncols = rows * g.width;
        cols.resize(static_cast<std::size_t>(g.patch() * ncols));
        im2col(x, g, row0, rows, cols.data());
        Eigen::Map<const RowMat<T>> cm(cols.data(), g.patch(), ncols);
        StridedMap<T> ym(y + row0 * g.width, g.out_channels, ncols,
                         Eigen::OuterStride<>(g.pixels()));
        ym.noalias() = w * cm;
      }
    });
    if (bias.defined()) {
      auto b = bias.data<T>();
      for (std::int64_t k = 0; k < g.out_channels; ++k) {
        T* row = y + k * g.pixels();
        for (std::int64_t i = 0; i < g.pixels(); ++i) row[i] += b[static_cast<std::size_t>(k)];
      }
    }
  });

  std::vector<Tensor> inputs{input, weights};
  if (bias.defined()) inputs.push_back(bias);
  return make_op_result(
      {g.out_channels, g.height, g.width}, dt, std::move(out), inputs, "conv2d",
      [g](const TensorImpl& o, std::span<const std::shared_ptr<TensorImpl>> ins) {
        detail::dispatch(o.dtype, [&](auto tag) {
          using T = decltype(tag);
          const T* gy = o.grad.as<T>().data();
          const T* x = ins[0]->data.as<T>().data();
          Eigen::Map<const RowMat<T>> w(ins[1]->data.as<T>().data(), g.out_channels, g.patch());
          const bool want_x = ins[0]->requires_grad;
          const bool want_w = ins[1]->requires_grad;
          if (ins.size() > 2 && ins[2]->requires_grad) {
            auto gb = accumulate_grad<T>(*ins[2]);
            for (std::int64_t k = 0; k < g.out_channels; ++k) {
              const T* row = gy + k * g.pixels();
              T acc = 0;
              for (std::int64_t i = 0; i < g.pixels(); ++i) acc += row[i];
              gb[static_cast<std::size_t>(k)] += acc;
            }
          }
          if (!want_x && !want_w) return;
          T* gx = want_x ? accumulate_grad<T>(*ins[0]).data() : nullptr;
          std::optional<Eigen::Map<RowMat<T>>> gw;
          if (want_w) gw.emplace(accumulate_grad<T>(*ins[1]).data(), g.out_channels, g.patch());
          const std::int64_t tile_rows = rows_per_tile(g, sizeof(T));
          std::vector<T> cols;
          RowMat<T> dcols;
          for (std::int64_t row0 = 0; row0 < g.height; row0 += tile_rows) {
            const std::int64_t rows = std::min(tile_rows, g.height - row0);
            const std::int64_t ncols = rows * g.width;
            ConstStridedMap<T> gym(gy + row0 * g.width, g.out_channels, ncols,
                                   Eigen::OuterStride<>(g.pixels()));
            if (want_w) {
              cols.resize(static_cast<std::size_t>(g.patch() * ncols));
              im2col(x, g, row0, rows, cols.data());
              Eigen::Map<const RowMat<T>> cm(cols.data(), g.patch(), ncols);
              gw->noalias() += gym * cm.transpose();
            }
            if (want_x) {
              dcols.resize(g.patch(), ncols);
              dcols.noalias() = w.transpose() * gym;
              col2im_add(dcols.data(), g, row0, rows, gx);
            }
          }
        });
      });
}

Tensor upsample2x(const Tensor& input, Upsample mode) {
  require_chw(input, "upsample2x", "input");
  const std::int64_t C = input.dim(0), H = input.dim(1), W = input.dim(2);
  if (mode == Upsample::nearest) {
    std::vector<std::int64_t> map(static_cast<std::size_t>(C * 4 * H * W));
    std::size_t i = 0;
    for (std::int64_t c = 0; c < C; ++c)
      for (std::int64_t y = 0; y < 2 * H; ++y)
        for (std::int64_t x = 0; x < 2 * W; ++x)
          map[i++] = (c * H + y / 2) * W + x / 2;
    return detail::index_op(input, {C, 2 * H, 2 * W}, std::move(map), "upsample2x_nearest");
  }

  // Half-pixel-centred bilinear with toroidal neighbours: output 2i samples
  // 3/4 of row i and 1/4 of row i-1; output 2i+1 samples 3/4 of i, 1/4 of i+1.
  const DType dt = input.dtype();
  Buffer out(dt, static_cast<std::size_t>(C * 4 * H * W));
  detail::dispatch(dt, [&](auto tag) {
    using T = decltype(tag);
    const T* x = input.data<T>().data();
    T* y = out.as<T>().data();
    for (std::int64_t c = 0; c < C; ++c) {
      const T* p = x + c * H * W;
      T* q = y + c * 4 * H * W;
      for (std::int64_t oy = 0; oy < 2 * H; ++oy) {
        const std::int64_t iy = oy / 2;
        const std::int64_t ny = wrap(iy + ((oy & 1) ? 1 : -1), H);
        for (std::int64_t ox = 0; ox < 2 * W; ++ox) {
          const std::int64_t ix = ox / 2;
          const std::int64_t nx = wrap(ix + ((ox & 1) ? 1 : -1), W);
          q[oy * 2 * W + ox] = T(0.5625) * p[iy * W + ix] + T(0.1875) * p[ny * W + ix] +
                               T(0.1875) * p[iy * W + nx] + T(0.0625) * p[ny * W + nx];
        }
      }
    }
  });
  const Tensor inputs[] = {input};
  return make_op_result(
      {C, 2 * H, 2 * W}, dt, std::move(out), inputs, "upsample2x_bilinear",
      [C, H, W](const TensorImpl& o, std::span<const std::shared_ptr<TensorImpl>> ins) {
        detail::dispatch(o.dtype, [&](auto tag) {
          using T = decltype(tag);
          const T* gy = o.grad.as<T>().data();
          T* gx = accumulate_grad<T>(*ins[0]).data();
          for (std::int64_t c = 0; c < C; ++c) {
            T* p = gx + c * H * W;
            const T* q = gy + c * 4 * H * W;
            for (std::int64_t oy = 0; oy < 2 * H; ++oy) {
              const std::int64_t iy = oy / 2;
              const std::int64_t ny = wrap(iy + ((oy & 1) ? 1 : -1), H);
              for (std::int64_t ox = 0; ox < 2 * W; ++ox) {
                const std::int64_t ix = ox / 2;
                const std::int64_t nx = wrap(ix + ((ox & 1) ? 1 : -1), W);
                const T g = q[oy * 2 * W + ox];
                p[iy * W + ix] += T(0.5625) * g;
                p[ny * W + ix] += T(0.1875) * g;
                p[iy * W + nx] += T(0.1875) * g;
                p[ny * W + nx] += T(0.0625) * g;
              }
            }
          }
        });
      });
}

Tensor avgpool2x(const Tensor& input) {
  require_chw(input, "avgpool2x", "input");
  const std::int64_t C = input.dim(0), H = input.dim(1), W = input.dim(2);
  if (H % 2 || W % 2)
    throw ShapeError("avgpool2x: height and width must be even, got shape " +
                     to_string(input.shape()));
  const std::int64_t h = H / 2, w = W / 2;
  const DType dt = input.dtype();
  Buffer out(dt, static_cast<std::size_t>(C * h * w));
  detail::dispatch(dt, [&](auto tag) {
    using T = decltype(tag);
    const T* x = input.data<T>().data();
    T* y = out.as<T>().data();
    for (std::int64_t c = 0; c < C; ++c)
      for (std::int64_t i = 0; i < h; ++i)
        for (std::int64_t j = 0; j < w; ++j) {
          const T* p = x + (c * H + 2 * i) * W + 2 * j;
          y[(c * h + i) * w + j] = T(0.25) * (p[0] + p[1] + p[W] + p[W + 1]);
        }
  });
  const Tensor inputs[] = {input};
  return make_op_result(
      {C, h, w}, dt, std::move(out), inputs, "avgpool2x",
      [C, H, W, h, w](const TensorImpl& o, std::span<const std::shared_ptr<TensorImpl>> ins) {
        detail::dispatch(o.dtype, [&](auto tag) {
          using T = decltype(tag);
          const T* gy = o.grad.as<T>().data();
          T* gx = accumulate_grad<T>(*ins[0]).data();
          for (std::int64_t c = 0; c < C; ++c)
            for (std::int64_t i = 0; i < h; ++i)
              for (std::int64_t j = 0; j < w; ++j) {
                const T g = T(0.25) * gy[(c * h + i) * w + j];
                T* p = gx + (c * H + 2 * i) * W + 2 * j;
                p[0] += g;
                p[1] += g;
                p[W] += g;
                p[W + 1] += g;
              }
        });
      });
}

Tensor cyclic_shift(const Tensor& input, std::int64_t dx, std::int64_t dy) {
  require_chw(input, "cyclic_shift", "input");
  const std::int64_t C = input.dim(0), H = input.dim(1), W = input.dim(2);
  std::vector<std::int64_t> map(static_cast<std::size_t>(C * H * W));
  std::size_t i = 0;
  for (std::int64_t c = 0; c < C; ++c)
    for (std::int64_t y = 0; y < H; ++y)
      for (std::int64_t x = 0; x < W; ++x)
        map[i++] = (c * H + wrap(y - dy, H)) * W + wrap(x - dx, W);
  return detail::index_op(input, input.shape(), std::move(map), "cyclic_shift");
}

Tensor tile(const Tensor& input, int k) {
  require_chw(input, "tile", "input");
  if (k < 1) throw Error("tile: repetition count must be >= 1");
  return crop_toroidal(input, 0, 0, k * input.dim(1), k * input.dim(2));
}

Tensor crop_toroidal(const Tensor& input, std::int64_t y0, std::int64_t x0,
                     std::int64_t height, std::int64_t width) {
  require_chw(input, "crop_toroidal", "input");
  if (height < 1 || width < 1) throw ShapeError("crop_toroidal: empty crop");
  const std::int64_t C = input.dim(0), H = input.dim(1), W = input.dim(2);
  std::vector<std::int64_t> map(static_cast<std::size_t>(C * height * width));
  std::size_t i = 0;
  for (std::int64_t c = 0; c < C; ++c)
    for (std::int64_t y = 0; y < height; ++y)
      for (std::int64_t x = 0; x < width; ++x)
        map[i++] = (c * H + wrap(y0 + y, H)) * W + wrap(x0 + x, W);
  return detail::index_op(input, {C, height, width}, std::move(map), "crop_toroidal");
}

Tensor slice_channels(const Tensor& x, std::int64_t begin, std::int64_t count) {
  require_chw(x, "slice_channels", "input");
  const std::int64_t C = x.dim(0), H = x.dim(1), W = x.dim(2);
  if (begin < 0 || count < 1 || begin + count > C)
    throw ShapeError("slice_channels: range [" + std::to_string(begin) + ", " +
                     std::to_string(begin + count) + ") outside shape " +
                     to_string(x.shape()));
  std::vector<std::int64_t> map(static_cast<std::size_t>(count * H * W));
  for (std::size_t i = 0; i < map.size(); ++i)
    map[i] = begin * H * W + static_cast<std::int64_t>(i);
  return detail::index_op(x, {count, H, W}, std::move(map), "slice_channels");
}

Tensor concat_channels(std::span<const Tensor> parts) {
  if (parts.empty()) throw Error("concat_channels: no inputs");
  std::int64_t C = 0;
  const std::int64_t H = parts[0].dim(1), W = parts[0].dim(2);
  const DType dt = parts[0].dtype();
  for (const auto& p : parts) {
    require_chw(p, "concat_channels", "part");
    if (p.dim(1) != H || p.dim(2) != W || p.dtype() != dt)
      throw ShapeError("concat_channels: part shape " + to_string(p.shape()) +
                       " does not match [*," + std::to_string(H) + "," +
                       std::to_string(W) + "]");
    C += p.dim(0);
  }
  Buffer out(dt, static_cast<std::size_t>(C * H * W));
  std::vector<std::int64_t> offsets;
  detail::dispatch(dt, [&](auto tag) {
    using T = decltype(tag);
    T* y = out.as<T>().data();
    std::int64_t off = 0;
    for (const auto& p : parts) {
      offsets.push_back(off);
      auto d = p.data<T>();
      std::copy(d.begin(), d.end(), y + off);
      off += static_cast<std::int64_t>(d.size());
    }
  });
  return make_op_result(
      {C, H, W}, dt, std::move(out), parts, "concat_channels",
      [offsets](const TensorImpl& o, std::span<const std::shared_ptr<TensorImpl>> ins) {
        detail::dispatch(o.dtype, [&](auto tag) {
          using T = decltype(tag);
          auto g = o.grad.as<T>();
          for (std::size_t k = 0; k < ins.size(); ++k) {
            if (!ins[k]->requires_grad) continue;
            auto gi = accumulate_grad<T>(*ins[k]);
            for (std::size_t i = 0; i < gi.size(); ++i)
              gi[i] += g[static_cast<std::size_t>(offsets[k]) + i];
          }
        });
      });
}

Tensor expand_channels(const Tensor& x, std::int64_t channels) {
  require_chw(x, "expand_channels", "input");
  if (x.dim(0) != 1)
    throw ShapeError("expand_channels: input must have one channel, got " +
                     to_string(x.shape()));
  const std::int64_t HW = x.dim(1) * x.dim(2);
  std::vector<std::int64_t> map(static_cast<std::size_t>(channels * HW));
  for (std::size_t i = 0; i < map.size(); ++i) map[i] = static_cast<std::int64_t>(i) % HW;
  return detail::index_op(x, {channels, x.dim(1), x.dim(2)}, std::move(map), "expand_channels");
}

Tensor broadcast_spatial(const Tensor& v, std::int64_t height, std::int64_t width) {
  if (!v.defined() || v.rank() != 1)
    throw ShapeError("broadcast_spatial: expected shape [C]");
  const std::int64_t C = v.dim(0);
  std::vector<std::int64_t> map(static_cast<std::size_t>(C * height * width));
  for (std::size_t i = 0; i < map.size(); ++i)
    map[i] = static_cast<std::int64_t>(i) / (height * width);
  return detail::index_op(v, {C, height, width}, std::move(map), "broadcast_spatial");
}

Tensor channel_affine(const Tensor& x, const Tensor& scale, const Tensor& bias) {
  require_chw(x, "channel_affine", "input");
  const std::int64_t C = x.dim(0), HW = x.dim(1) * x.dim(2);
  for (const Tensor* t : {&scale, &bias})
    if (!t->defined() || t->rank() != 1 || t->dim(0) != C || t->dtype() != x.dtype())
      throw ShapeError("channel_affine: scale and bias must have shape [" +
                       std::to_string(C) + "] matching input " + to_string(x.shape()));
  const DType dt = x.dtype();
  Buffer out(dt, static_cast<std::size_t>(C * HW));
  detail::dispatch(dt, [&](auto tag) {
    using T = decltype(tag);
    auto in = x.data<T>();
    auto s = scale.data<T>();
    auto b = bias.data<T>();
    auto o = out.as<T>();
    for (std::int64_t c = 0; c < C; ++c)
      for (std::int64_t i = 0; i < HW; ++i) {
        const std::size_t k = static_cast<std::size_t>(c * HW + i);
        o[k] = in[k] * s[static_cast<std::size_t>(c)] + b[static_cast<std::size_t>(c)];
      }
  });
  const Tensor inputs[] = {x, scale, bias};
  return make_op_result(
      x.shape(), dt, std::move(out), inputs, "channel_affine",
      [C, HW](const TensorImpl& o, std::span<const std::shared_ptr<TensorImpl>> ins) {
        detail::dispatch(o.dtype, [&](auto tag) {
          using T = decltype(tag);
          auto g = o.grad.as<T>();
          auto in = ins[0]->data.as<T>();
          auto s = ins[1]->data.as<T>();
          const bool wx = ins[0]->requires_grad, ws = ins[1]->requires_grad,
                     wb = ins[2]->requires_grad;
          std::span<T> gx, gs, gb;
          if (wx) gx = accumulate_grad<T>(*ins[0]);
          if (ws) gs = accumulate_grad<T>(*ins[1]);
          if (wb) gb = accumulate_grad<T>(*ins[2]);
          for (std::int64_t c = 0; c < C; ++c) {
            const std::size_t cc = static_cast<std::size_t>(c);
            T as = 0, ab = 0;
            for (std::int64_t i = 0; i < HW; ++i) {
              const std::size_t k = static_cast<std::size_t>(c * HW + i);
              if (wx) gx[k] += g[k] * s[cc];
              as += g[k] * in[k];
              ab += g[k];
            }
            if (ws) gs[cc] += as;
            if (wb) gb[cc] += ab;
          }
        });
      });
}

Tensor unit_disk_clamp(const Tensor& xy) {
  require_chw(xy, "unit_disk_clamp", "input");
  if (xy.dim(0) != 2)
    throw ShapeError("unit_disk_clamp: expected 2 channels, got " + to_string(xy.shape()));
  const std::int64_t HW = xy.dim(1) * xy.dim(2);
  const DType dt = xy.dtype();
  Buffer out(dt, static_cast<std::size_t>(2 * HW));
  detail::dispatch(dt, [&](auto tag) {
    using T = decltype(tag);
    auto in = xy.data<T>();
    auto o = out.as<T>();
    for (std::int64_t i = 0; i < HW; ++i) {
      const T a = in[static_cast<std::size_t>(i)], b = in[static_cast<std::size_t>(HW + i)];
      const T r = std::sqrt(a * a + b * b);
      const T f = r > T(1) ? T(1) / r : T(1);
      o[static_cast<std::size_t>(i)] = a * f;
      o[static_cast<std::size_t>(HW + i)] = b * f;
    }
  });
  const Tensor inputs[] = {xy};
  return make_op_result(
      xy.shape(), dt, std::move(out), inputs, "unit_disk_clamp",
      [HW](const TensorImpl& o, std::span<const std::shared_ptr<TensorImpl>> ins) {
        detail::dispatch(o.dtype, [&](auto tag) {
          using T = decltype(tag);
          auto g = o.grad.as<T>();
          auto in = ins[0]->data.as<T>();
          auto gi = accumulate_grad<T>(*ins[0]);
          for (std::int64_t i = 0; i < HW; ++i) {
            const std::size_t ia = static_cast<std::size_t>(i), ib = static_cast<std::size_t>(HW + i);
            const T a = in[ia], b = in[ib];
            const T r = std::sqrt(a * a + b * b);
            if (r <= T(1)) {
              gi[ia] += g[ia];
              gi[ib] += g[ib];
              continue;
            }
            // d(v/r)/dv = (I - v v^T / r^2) / r
            const T ua = a / r, ub = b / r;
            const T dot = g[ia] * ua + g[ib] * ub;
            gi[ia] += (g[ia] - dot * ua) / r;
            gi[ib] += (g[ib] - dot * ub) / r;
          }
        });
      });
}

}  // namespace matx
