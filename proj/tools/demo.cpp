#include "demo.hpp"

#include <cmath>
#include <numbers>

#include "matx/io.hpp"
#include "matx/rng.hpp"
#include "matx/tileprior.hpp"

namespace matx::demo {

namespace {

struct Canvas {
  std::int64_t n;
  std::vector<double> albedo, normal, rough, spec;
  LabelGrid labels;

  explicit Canvas(std::int64_t size)
      : n(size),
        albedo(static_cast<std::size_t>(3 * size * size)),
        normal(static_cast<std::size_t>(2 * size * size)),
        rough(static_cast<std::size_t>(size * size)),
        spec(static_cast<std::size_t>(3 * size * size), 0.04),
        labels(LabelGrid::uniform(size, size, 0)) {}

  std::size_t idx(int c, std::int64_t y, std::int64_t x) const {
    return static_cast<std::size_t>((c * n + y) * n + x);
  }
  void set_albedo(std::int64_t y, std::int64_t x, double r, double g, double b) {
    albedo[idx(0, y, x)] = std::clamp(r, 0.0, 1.0);
    albedo[idx(1, y, x)] = std::clamp(g, 0.0, 1.0);
    albedo[idx(2, y, x)] = std::clamp(b, 0.0, 1.0);
  }

  void save(const std::filesystem::path& dir) const {
    MaterialMaps m{Tensor::from_values({3, n, n}, albedo, DType::f32),
                   Tensor::from_values({2, n, n}, normal, DType::f32),
                   Tensor::from_values({1, n, n}, rough, DType::f32),
                   Tensor::from_values({3, n, n}, spec, DType::f32)};
    save_pack(dir, m, 8);
    save_labels(dir / "labels.png", labels);
  }
};

// Sum of random integer-frequency waves: periodic over the map.
class PeriodicNoise {
 public:
  PeriodicNoise(Philox& rng, int waves, int max_freq) {
    for (int i = 0; i < waves; ++i) {
      const int fx = static_cast<int>(rng.below(2 * max_freq + 1)) - max_freq;
      const int fy = static_cast<int>(rng.below(max_freq + 1));
      waves_.push_back({fx, fy == 0 && fx == 0 ? 1 : fy, 2 * std::numbers::pi * rng.uniform(),
                        1.0 / std::sqrt(static_cast<double>(waves))});
    }
  }
  double operator()(std::int64_t y, std::int64_t x, std::int64_t n) const {
    double s = 0;
    for (const auto& w : waves_)
      s += w.amp * std::cos(2 * std::numbers::pi * (w.fx * x + w.fy * y) / static_cast<double>(n) + w.phase);
    return s;
  }

 private:
  struct Wave {
    int fx, fy;
    double phase, amp;
  };
  std::vector<Wave> waves_;
};

void gray_pack(const std::filesystem::path& dir, std::int64_t n) {
  Canvas c(n);
  for (std::int64_t y = 0; y < n; ++y)
    for (std::int64_t x = 0; x < n; ++x) {
      c.set_albedo(y, x, 0.5, 0.5, 0.5);
      c.rough[c.idx(0, y, x)] = 0.5;
    }
  c.save(dir);
}

// Running-bond bricks (label 0) and mortar (label 1). Joints sit away from
// the wrap lines and the layout repeats with period n.
void brick_pack(const std::filesystem::path& dir, std::int64_t n, Philox& rng) {
  Canvas c(n);
  const std::int64_t row_h = n / 8, brick_w = n / 4, mortar = std::max<std::int64_t>(1, n / 32);
  std::vector<double> tint(64);
  for (auto& t : tint) t = rng.uniform() - 0.5;
  for (std::int64_t y = 0; y < n; ++y)
    for (std::int64_t x = 0; x < n; ++x) {
      const std::int64_t yy = (y + row_h / 2) % n;
      const std::int64_t row = yy / row_h;
      const std::int64_t xx = (x + (row % 2 ? 3 * brick_w / 4 : brick_w / 4)) % n;
      const bool is_mortar = yy % row_h < mortar || xx % brick_w < mortar;
      const double jitter = 0.04 * (rng.uniform() - 0.5);
      if (is_mortar) {
        c.set_albedo(y, x, 0.62 + jitter, 0.6 + jitter, 0.56 + jitter);
        c.rough[c.idx(0, y, x)] = 0.9;
        c.labels.labels[static_cast<std::size_t>(y * n + x)] = 1;
      } else {
        const double t = 1 + 0.3 * tint[static_cast<std::size_t>(row * 4 + xx / brick_w) % 64];
        c.set_albedo(y, x, 0.55 * t + jitter, 0.23 * t + jitter, 0.16 * t + jitter);
        c.rough[c.idx(0, y, x)] = 0.7 + 0.1 * (rng.uniform() - 0.5);
      }
      c.normal[c.idx(0, y, x)] = 0.06 * (rng.uniform() - 0.5);
      c.normal[c.idx(1, y, x)] = 0.06 * (rng.uniform() - 0.5);
    }
  c.save(dir);
}

void noise_pack(const std::filesystem::path& dir, std::int64_t n, Philox& rng) {
  Canvas c(n);
  const PeriodicNoise a(rng, 12, 4), b(rng, 12, 6), h(rng, 16, 8);
  for (std::int64_t y = 0; y < n; ++y)
    for (std::int64_t x = 0; x < n; ++x) {
      const double u = a(y, x, n), v = b(y, x, n);
      c.set_albedo(y, x, 0.45 + 0.15 * u, 0.4 + 0.12 * u + 0.05 * v, 0.3 + 0.1 * v);
      c.rough[c.idx(0, y, x)] = std::clamp(0.55 + 0.2 * v, 0.0, 1.0);
      // Normals from the gradient of the periodic height field.
      const double dx = h(y, (x + 1) % n, n) - h(y, (x + n - 1) % n, n);
      const double dy = h((y + 1) % n, x, n) - h((y + n - 1) % n, x, n);
      c.normal[c.idx(0, y, x)] = std::clamp(-0.5 * dx, -0.5, 0.5);
      c.normal[c.idx(1, y, x)] = std::clamp(-0.5 * dy, -0.5, 0.5);
      c.labels.labels[static_cast<std::size_t>(y * n + x)] = u > 0 ? 0 : 1;
    }
  c.save(dir);
}

// Central vertical band (label 0) and the rest (label 1), so neither region
// boundary lies on the wrap line.
void split_pack(const std::filesystem::path& dir, std::int64_t n, Philox& rng) {
  Canvas c(n);
  for (std::int64_t y = 0; y < n; ++y)
    for (std::int64_t x = 0; x < n; ++x) {
      const bool band = x >= n / 4 && x < 3 * n / 4;
      const double j = 0.03 * (rng.uniform() - 0.5);
      if (band)
        c.set_albedo(y, x, 0.5 + j, 0.5 + j, 0.5 + j);
      else
        c.set_albedo(y, x, 0.4 + j, 0.4 + j, 0.42 + j);
      c.rough[c.idx(0, y, x)] = band ? 0.5 : 0.6;
      c.labels.labels[static_cast<std::size_t>(y * n + x)] = band ? 0 : 1;
    }
  c.save(dir);
}

void constant_photo(const std::filesystem::path& path, std::int64_t w, std::int64_t h,
                    std::array<int, 3> rgb) {
  Image img{w, h, 3, 8, {}};
  img.samples.resize(static_cast<std::size_t>(w * h * 3));
  for (std::size_t i = 0; i < img.samples.size(); ++i)
    img.samples[i] = static_cast<std::uint16_t>(rgb[i % 3]);
  write_png(path, img);
}

}  // namespace

void make_demo(const std::filesystem::path& out, std::uint64_t seed, std::int64_t n) {
  if (n < 32 || (n & (n - 1)) != 0) throw Error("demo size must be a power of two >= 32");
  std::filesystem::create_directories(out / "targets");
  GeneratorConfig cfg;
  cfg.resolution = n;
  cfg.seed = seed;
  save_generator(out / "generator.bin", GeneratorWeights::random(cfg));

  Philox rng(seed, 3);
  gray_pack(out / "gray", n);
  brick_pack(out / "bricks", n, rng);
  noise_pack(out / "noise", n, rng);
  split_pack(out / "split", n, rng);

  // Saturated red and blue; the larger red photo exercises crop and resize.
  constant_photo(out / "targets" / "red.png", n, n, {204, 38, 38});
  constant_photo(out / "targets" / "blue.png", n, n, {38, 64, 204});
  constant_photo(out / "targets" / "red_large.png", 2 * n + n / 2, 2 * n, {204, 38, 38});
  // Two-label target: red on the left (label 0), blue on the right (label 1).
  Image duo{n, n, 3, 8, {}};
  LabelGrid duo_labels = LabelGrid::uniform(n, n, 0);
  for (std::int64_t y = 0; y < n; ++y)
    for (std::int64_t x = 0; x < n; ++x) {
      const bool right = x >= n / 2;
      const std::array<int, 3> c = right ? std::array<int, 3>{38, 64, 204} : std::array<int, 3>{204, 38, 38};
      for (int k = 0; k < 3; ++k) duo.samples.push_back(static_cast<std::uint16_t>(c[static_cast<std::size_t>(k)]));
      duo_labels.labels[static_cast<std::size_t>(y * n + x)] = right ? 1 : 0;
    }
  write_png(out / "targets" / "duo.png", duo);
  save_labels(out / "targets" / "duo_labels.png", duo_labels);
}

}  // namespace matx::demo
