#include <cmath>

#include "matx/io.hpp"

namespace matx {

namespace {

Tensor map_values(const Tensor& t, double (*f)(double)) {
  auto v = t.values();
  for (auto& x : v) x = f(x);
  return Tensor::from_values(t.shape(), v, t.dtype());
}

double quantize(double v, double mx) { return std::lround(std::clamp(v, 0.0, 1.0) * mx) / mx; }

bool is_pow2(std::int64_t v) { return v > 0 && (v & (v - 1)) == 0; }

}  // namespace

MaterialPack load_pack(const std::filesystem::path& dir, DType dtype) {
  if (!std::filesystem::is_directory(dir)) throw IoError(dir.string() + ": not a directory");
  for (const char* name : kPackFiles)
    if (!std::filesystem::exists(dir / name))
      throw IoError(dir.string() + ": missing " + name);
  Image img[4];
  for (int i = 0; i < 4; ++i) img[i] = read_png(dir / kPackFiles[i]);
  const std::int64_t n = img[0].width;
  for (int i = 0; i < 4; ++i) {
    const std::string name = (dir / kPackFiles[i]).string();
    if (img[i].width != img[i].height)
      throw IoError(name + ": maps must be square, got " + std::to_string(img[i].width) + "x" +
                    std::to_string(img[i].height));
    if (img[i].width != n)
      throw IoError(name + ": size " + std::to_string(img[i].width) + " differs from albedo.png (" +
                    std::to_string(n) + ")");
    if (!is_pow2(n)) throw IoError(name + ": size " + std::to_string(n) + " is not a power of two");
  }
  MaterialPack pack;
  pack.bit_depth = img[0].bit_depth;
  MaterialMaps& m = pack.maps;
  m.albedo = map_values(image_to_tensor(img[0], 3, DType::f64), srgb_to_linear).to(dtype);
  m.normal_xy = decode_normal(image_to_tensor(img[1], 3, DType::f64)).to(dtype).detach();
  m.roughness = image_to_tensor(img[2], 1, dtype);
  m.specular = map_values(image_to_tensor(img[3], 3, DType::f64), srgb_to_linear).to(dtype);
  // Quantized normals can poke slightly outside the unit disk.
  m.normal_xy = unit_disk_clamp(m.normal_xy).detach();
  try {
    m.validate();
  } catch (const Error& e) {
    throw IoError(dir.string() + ": " + e.what());
  }
  return pack;
}

void save_pack(const std::filesystem::path& dir, const MaterialMaps& maps, int bit_depth) {
  maps.validate();
  std::filesystem::create_directories(dir);
  const double mx = bit_depth == 16 ? 65535.0 : 255.0;
  write_png(dir / "albedo.png",
            tensor_to_image(map_values(maps.albedo.to(DType::f64), linear_to_srgb), bit_depth));
  // Quantize x and y first so z matches what a reload reconstructs.
  auto xy = maps.normal_xy.to(DType::f64).values();
  for (auto& v : xy) v = quantize(v * 0.5 + 0.5, mx) * 2 - 1;
  const Tensor enc = encode_normal(Tensor::from_values(maps.normal_xy.shape(), xy, DType::f64));
  write_png(dir / "normal.png", tensor_to_image(enc, bit_depth));
  write_png(dir / "roughness.png", tensor_to_image(maps.roughness.to(DType::f64), bit_depth));
  write_png(dir / "specular.png",
            tensor_to_image(map_values(maps.specular.to(DType::f64), linear_to_srgb), bit_depth));
}

LabelGrid load_labels(const std::filesystem::path& path) {
  const Image img = read_png(path);
  if (img.channels != 1 || img.bit_depth != 8)
    throw IoError(path.string() + ": label maps must be single-channel 8-bit PNGs");
  LabelGrid g;
  g.height = img.height;
  g.width = img.width;
  g.labels.assign(img.samples.begin(), img.samples.end());
  return g;
}

void save_labels(const std::filesystem::path& path, const LabelGrid& labels) {
  Image img;
  img.width = labels.width;
  img.height = labels.height;
  img.channels = 1;
  img.bit_depth = 8;
  img.samples.assign(labels.labels.begin(), labels.labels.end());
  write_png(path, img);
}

Tensor box_downscale(const Tensor& image, std::int64_t size) {
  const std::int64_t C = image.channels(), S = image.height();
  if (image.width() != S) throw ShapeError("box_downscale: expected a square image");
  if (size < 1 || size > S) throw ShapeError("box_downscale: target size out of range");
  const auto in = image.values();
  // Separable area weights: output cell j covers [j*S/size, (j+1)*S/size).
  const double step = static_cast<double>(S) / static_cast<double>(size);
  std::vector<std::vector<std::pair<std::int64_t, double>>> taps(static_cast<std::size_t>(size));
  for (std::int64_t j = 0; j < size; ++j) {
    const double lo = j * step, hi = (j + 1) * step;
    for (auto i = static_cast<std::int64_t>(std::floor(lo)); i < S && i < hi; ++i) {
      const double w = std::min(hi, i + 1.0) - std::max(lo, static_cast<double>(i));
      if (w > 0) taps[static_cast<std::size_t>(j)].push_back({i, w / step});
    }
  }
  std::vector<double> out(static_cast<std::size_t>(C * size * size), 0.0);
  for (std::int64_t c = 0; c < C; ++c)
    for (std::int64_t y = 0; y < size; ++y)
      for (const auto& [iy, wy] : taps[static_cast<std::size_t>(y)])
        for (std::int64_t x = 0; x < size; ++x) {
          double acc = 0;
          for (const auto& [ix, wx] : taps[static_cast<std::size_t>(x)])
            acc += wx * in[static_cast<std::size_t>((c * S + iy) * S + ix)];
          out[static_cast<std::size_t>((c * size + y) * size + x)] += wy * acc;
        }
  return Tensor::from_values({C, size, size}, out, image.dtype());
}

namespace {

struct SquareCrop {
  std::int64_t y0, x0, side;
};

SquareCrop centered_square(const Image& img, std::int64_t size, const std::filesystem::path& path) {
  const std::int64_t side = std::min(img.width, img.height);
  if (side < size)
    throw IoError(path.string() + ": " + std::to_string(img.width) + "x" +
                  std::to_string(img.height) + " is smaller than the working resolution " +
                  std::to_string(size));
  return {(img.height - side) / 2, (img.width - side) / 2, side};
}

}  // namespace

Tensor load_photo(const std::filesystem::path& path, std::int64_t size, DType dtype) {
  const Image img = read_png(path);
  const SquareCrop sq = centered_square(img, size, path);
  const Tensor full = image_to_tensor(img, 3, DType::f64);
  const Tensor square = crop_toroidal(full, sq.y0, sq.x0, sq.side, sq.side);
  return box_downscale(square, size).to(dtype).detach();
}

LabelGrid load_photo_labels(const std::filesystem::path& path, std::int64_t size) {
  const LabelGrid full = load_labels(path);
  Image probe;
  probe.width = full.width;
  probe.height = full.height;
  const SquareCrop sq = centered_square(probe, size, path);
  LabelGrid g;
  g.height = g.width = size;
  g.labels.resize(static_cast<std::size_t>(size * size));
  for (std::int64_t y = 0; y < size; ++y)
    for (std::int64_t x = 0; x < size; ++x) {
      // Source texel under the centre of the output cell.
      const auto sy = static_cast<std::int64_t>((y + 0.5) * sq.side / size);
      const auto sx = static_cast<std::int64_t>((x + 0.5) * sq.side / size);
      g.labels[static_cast<std::size_t>(y * size + x)] = full.at(sq.y0 + sy, sq.x0 + sx);
    }
  return g;
}

}  // namespace matx
