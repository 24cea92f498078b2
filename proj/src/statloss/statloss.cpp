#include "matx/statloss.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace matx {

using detail::Buffer;
using detail::TensorImpl;

Mask Mask::full(std::int64_t height, std::int64_t width) {
  return {height, width, std::vector<std::uint8_t>(static_cast<std::size_t>(height * width), 1)};
}

Mask Mask::from_labels(const LabelGrid& labels, std::uint8_t label) {
  Mask m{labels.height, labels.width, std::vector<std::uint8_t>(labels.labels.size())};
  for (std::size_t i = 0; i < m.bits.size(); ++i) m.bits[i] = labels.labels[i] == label;
  return m;
}

std::int64_t Mask::count() const {
  return std::count(bits.begin(), bits.end(), std::uint8_t{1});
}

Mask erode(const Mask& mask, int radius) {
  if (radius < 0) throw Error("erode: radius must be >= 0");
  if (radius == 0) return mask;
  const std::int64_t H = mask.height, W = mask.width, r = radius;
  // Separable: horizontal then vertical minimum, out-of-grid counts as false.
  std::vector<std::uint8_t> rows(mask.bits.size(), 0);
  for (std::int64_t y = 0; y < H; ++y) {
    std::int64_t run = 0;  // consecutive set pixels ending at x
    std::vector<std::int64_t> runs(static_cast<std::size_t>(W));
    for (std::int64_t x = 0; x < W; ++x) {
      run = mask.at(y, x) ? run + 1 : 0;
      runs[static_cast<std::size_t>(x)] = run;
    }
    for (std::int64_t x = r; x + r < W; ++x)
      rows[static_cast<std::size_t>(y * W + x)] = runs[static_cast<std::size_t>(x + r)] >= 2 * r + 1;
  }
  Mask out{H, W, std::vector<std::uint8_t>(mask.bits.size(), 0)};
  for (std::int64_t x = 0; x < W; ++x) {
    std::int64_t run = 0;
    std::vector<std::int64_t> runs(static_cast<std::size_t>(H));
    for (std::int64_t y = 0; y < H; ++y) {
      run = rows[static_cast<std::size_t>(y * W + x)] ? run + 1 : 0;
      runs[static_cast<std::size_t>(y)] = run;
    }
    for (std::int64_t y = r; y + r < H; ++y)
      out.bits[static_cast<std::size_t>(y * W + x)] = runs[static_cast<std::size_t>(y + r)] >= 2 * r + 1;
  }
  return out;
}

SampleSet gather(const Tensor& features, const Mask& mask) {
  if (!features.defined() || features.rank() != 3)
    throw ShapeError("gather: features must be [C,H,W]");
  if (features.height() != mask.height || features.width() != mask.width)
    throw ShapeError("gather: mask is " + std::to_string(mask.height) + "x" +
                     std::to_string(mask.width) + " but features are " +
                     to_string(features.shape()));
  std::vector<std::int64_t> idx;
  for (std::size_t i = 0; i < mask.bits.size(); ++i)
    if (mask.bits[i]) idx.push_back(static_cast<std::int64_t>(i));
  return {gather_pixels(features, idx)};
}

ProjectionSet ProjectionSet::random(std::int64_t count, std::int64_t channels, Philox& rng,
                                    DType dtype) {
  std::vector<double> v(static_cast<std::size_t>(count * channels));
  for (std::int64_t d = 0; d < count; ++d) {
    double norm2 = 0;
    double* row = v.data() + d * channels;
    do {
      norm2 = 0;
      for (std::int64_t c = 0; c < channels; ++c) {
        row[c] = rng.normal();
        norm2 += row[c] * row[c];
      }
    } while (norm2 == 0);
    const double inv = 1.0 / std::sqrt(norm2);
    for (std::int64_t c = 0; c < channels; ++c) row[c] *= inv;
  }
  return {Tensor::from_values({count, channels}, v, dtype)};
}

ProjectionSet ProjectionSet::axis(std::int64_t channels, std::int64_t axis, DType dtype) {
  std::vector<double> v(static_cast<std::size_t>(channels), 0.0);
  v[static_cast<std::size_t>(axis)] = 1.0;
  return {Tensor::from_values({1, channels}, v, dtype)};
}

const char* to_string(LossKind kind) {
  switch (kind) {
    case LossKind::sw: return "sw";
    case LossKind::cramer: return "cramer";
    case LossKind::gram: return "gram";
  }
  return "?";
}

LossKind parse_loss_kind(std::string_view name) {
  if (name == "sw") return LossKind::sw;
  if (name == "cramer") return LossKind::cramer;
  if (name == "gram") return LossKind::gram;
  throw Error("unknown loss kind '" + std::string(name) + "' (expected sw, cramer or gram)");
}

namespace {

void check_pair(const SampleSet& a, const SampleSet& b, const ProjectionSet& proj, const char* op) {
  if (a.values.dim(1) != b.values.dim(1) || a.values.dim(1) != proj.directions.dim(1))
    throw ShapeError(std::string(op) + ": channel counts differ (a " + to_string(a.values.shape()) +
                     ", b " + to_string(b.values.shape()) + ", directions " +
                     to_string(proj.directions.shape()) + ")");
  if (a.values.dtype() != b.values.dtype() || a.values.dtype() != proj.directions.dtype())
    throw Error(std::string(op) + ": dtype mismatch");
}

// Rows of dirs . x^T: [D,n], one projected sample vector per direction.
Tensor project(const Tensor& x, const ProjectionSet& proj) {
  return matmul(proj.directions, x, Transpose::no, Transpose::yes);
}

template <class T>
std::vector<std::int64_t> argsort(const T* v, std::int64_t n) {
  std::vector<std::int64_t> p(static_cast<std::size_t>(n));
  std::iota(p.begin(), p.end(), 0);
  std::stable_sort(p.begin(), p.end(), [v](std::int64_t i, std::int64_t j) { return v[i] < v[j]; });
  return p;
}

}  // namespace

std::optional<Tensor> sw_loss(const SampleSet& a, const SampleSet& b, const ProjectionSet& proj,
                              Philox& rng) {
  if (a.empty() || b.empty()) return std::nullopt;
  check_pair(a, b, proj, "sw_loss");
  const Tensor pa = project(a.values, proj);           // [D,n]
  const Tensor pb = project(b.values.detach(), proj);  // [D,m]
  const std::int64_t D = proj.count(), n = a.n(), m = b.n(), k = std::min(n, m);

  // Per direction: the a-indices taking part (in sorted order) and the sign of
  // their sorted difference, both needed by the backward pass.
  auto used = std::make_shared<std::vector<std::int64_t>>(static_cast<std::size_t>(D * k));
  auto signs = std::make_shared<std::vector<double>>(static_cast<std::size_t>(D * k));
  double total = 0;
  detail::dispatch(pa.dtype(), [&](auto tag) {
    using T = decltype(tag);
    const T* A = pa.data<T>().data();
    const T* B = pb.data<T>().data();
    std::vector<T> ua(static_cast<std::size_t>(k)), vb(static_cast<std::size_t>(k));
    std::vector<std::int64_t> ia(static_cast<std::size_t>(k));
    for (std::int64_t d = 0; d < D; ++d) {
      const T* ra = A + d * n;
      const T* rb = B + d * m;
      if (n > m) {
        const auto pick = rng.sample_without_replacement(n, k);
        for (std::int64_t i = 0; i < k; ++i) ia[static_cast<std::size_t>(i)] = pick[static_cast<std::size_t>(i)];
        for (std::int64_t i = 0; i < k; ++i) vb[static_cast<std::size_t>(i)] = rb[i];
      } else {
        std::iota(ia.begin(), ia.end(), 0);
        if (m > n) {
          const auto pick = rng.sample_without_replacement(m, k);
          for (std::int64_t i = 0; i < k; ++i) vb[static_cast<std::size_t>(i)] = rb[pick[static_cast<std::size_t>(i)]];
        } else {
          for (std::int64_t i = 0; i < k; ++i) vb[static_cast<std::size_t>(i)] = rb[i];
        }
      }
      for (std::int64_t i = 0; i < k; ++i) ua[static_cast<std::size_t>(i)] = ra[ia[static_cast<std::size_t>(i)]];
      const auto order = argsort(ua.data(), k);
      std::sort(vb.begin(), vb.end());
      double s = 0;
      for (std::int64_t i = 0; i < k; ++i) {
        const auto j = static_cast<std::size_t>(order[static_cast<std::size_t>(i)]);
        const double diff = static_cast<double>(ua[j]) - static_cast<double>(vb[static_cast<std::size_t>(i)]);
        s += std::abs(diff);
        (*used)[static_cast<std::size_t>(d * k + i)] = ia[j];
        (*signs)[static_cast<std::size_t>(d * k + i)] = diff > 0 ? 1.0 : (diff < 0 ? -1.0 : 0.0);
      }
      total += s / static_cast<double>(k);
    }
  });
  const DType dt = pa.dtype();
  Buffer out(dt, 1);
  detail::dispatch(dt, [&](auto tag) {
    using T = decltype(tag);
    out.as<T>()[0] = static_cast<T>(total / static_cast<double>(D));
  });
  const Tensor inputs[] = {pa};
  return make_op_result(
      {}, dt, std::move(out), inputs, "sw_loss",
      [used, signs, D, n, k](const TensorImpl& o, std::span<const std::shared_ptr<TensorImpl>> ins) {
        detail::dispatch(o.dtype, [&](auto tag) {
          using T = decltype(tag);
          const double g = static_cast<double>(o.grad.as<T>()[0]) / static_cast<double>(D * k);
          auto gi = accumulate_grad<T>(*ins[0]);
          for (std::int64_t d = 0; d < D; ++d)
            for (std::int64_t i = 0; i < k; ++i) {
              const auto at = static_cast<std::size_t>(d * k + i);
              gi[static_cast<std::size_t>(d * n + (*used)[at])] += static_cast<T>(g * (*signs)[at]);
            }
        });
      });
}

std::optional<Tensor> cramer_loss(const SampleSet& a, const SampleSet& b,
                                  const ProjectionSet& proj) {
  if (a.empty() || b.empty()) return std::nullopt;
  check_pair(a, b, proj, "cramer_loss");
  const Tensor pa = project(a.values, proj);
  const Tensor pb = project(b.values.detach(), proj);
  const std::int64_t D = proj.count(), n = a.n(), m = b.n();
  // dL/du_i = (D-)^2 - (D+)^2 with D = F_u - F_v on either side of u_i.
  auto grads = std::make_shared<std::vector<double>>(static_cast<std::size_t>(D * n));
  double total = 0;
  detail::dispatch(pa.dtype(), [&](auto tag) {
    using T = decltype(tag);
    const T* A = pa.data<T>().data();
    const T* B = pb.data<T>().data();
    std::vector<T> vb(static_cast<std::size_t>(m));
    for (std::int64_t d = 0; d < D; ++d) {
      const T* ra = A + d * n;
      const auto order = argsort(ra, n);
      std::copy(B + d * m, B + (d + 1) * m, vb.begin());
      std::sort(vb.begin(), vb.end());
      double s = 0, diff = 0, prev = 0;
      std::int64_t i = 0, j = 0;
      bool started = false;
      const double inv_n = 1.0 / static_cast<double>(n), inv_m = 1.0 / static_cast<double>(m);
      while (i < n || j < m) {
        const bool take_a = j == m || (i < n && ra[order[static_cast<std::size_t>(i)]] <= vb[static_cast<std::size_t>(j)]);
        const double x = take_a ? static_cast<double>(ra[order[static_cast<std::size_t>(i)]])
                                : static_cast<double>(vb[static_cast<std::size_t>(j)]);
        if (started) s += diff * diff * (x - prev);
        started = true;
        prev = x;
        if (take_a) {
          const double before = diff;
          diff += inv_n;
          (*grads)[static_cast<std::size_t>(d * n + order[static_cast<std::size_t>(i)])] =
              before * before - diff * diff;
          ++i;
        } else {
          diff -= inv_m;
          ++j;
        }
      }
      total += s;
    }
  });
  const DType dt = pa.dtype();
  Buffer out(dt, 1);
  detail::dispatch(dt, [&](auto tag) {
    using T = decltype(tag);
    out.as<T>()[0] = static_cast<T>(total / static_cast<double>(D));
  });
  const Tensor inputs[] = {pa};
  return make_op_result(
      {}, dt, std::move(out), inputs, "cramer_loss",
      [grads, D](const TensorImpl& o, std::span<const std::shared_ptr<TensorImpl>> ins) {
        detail::dispatch(o.dtype, [&](auto tag) {
          using T = decltype(tag);
          const double g = static_cast<double>(o.grad.as<T>()[0]) / static_cast<double>(D);
          auto gi = accumulate_grad<T>(*ins[0]);
          for (std::size_t i = 0; i < grads->size(); ++i) gi[i] += static_cast<T>(g * (*grads)[i]);
        });
      });
}

std::optional<Tensor> gram(const SampleSet& samples) {
  if (samples.empty()) return std::nullopt;
  return scale(matmul(samples.values, samples.values, Transpose::yes, Transpose::no),
               1.0 / static_cast<double>(samples.n()));
}

std::optional<Tensor> gram(const Tensor& features, const Mask* mask) {
  if (!features.defined() || features.rank() != 3) throw ShapeError("gram: features must be [C,H,W]");
  if (mask) return gram(gather(features, *mask));
  const std::int64_t C = features.channels(), P = features.height() * features.width();
  const Tensor f = reshape(features, {C, P});
  return scale(matmul(f, f, Transpose::no, Transpose::yes), 1.0 / static_cast<double>(P));
}

Tensor feature_loss(const FeaturePyramid& p, const FeaturePyramid& q,
                    std::span<const TapWeight> taps) {
  Tensor total;
  for (const auto& [tap, w] : taps) {
    const Tensor& a = p.at(tap);
    const Tensor& b = q.at(tap);
    if (a.shape() != b.shape())
      throw ShapeError(std::string("feature_loss: tap ") + tap_name(tap) + " has shapes " +
                       to_string(a.shape()) + " and " + to_string(b.shape()));
    const Tensor term = scale(l1_distance(a, b), w);
    total = total.defined() ? add(total, term) : term;
  }
  if (!total.defined()) throw Error("feature_loss: no taps given");
  return total;
}

}  // namespace matx
