#include "matx/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

namespace matx {

static_assert(std::endian::native == std::endian::little,
              "checkpoint IO assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'M', 'A', 'T', 'X', 'C', 'K', 'P', 'T'};
constexpr std::int64_t kMaxDim = std::int64_t{1} << 32;

template <class T>
void put(std::string& out, T v) {
  char b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  out.append(b, sizeof(T));
}

void put_string(std::string& out, std::string_view s) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.append(s);
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  template <class T>
  T get(const char* what) {
    need(sizeof(T), what);
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  std::string_view take(std::size_t n, const char* what) {
    need(n, what);
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  std::string string(const char* what) {
    const auto n = get<std::uint32_t>(what);
    return std::string(take(n, what));
  }

  std::uint64_t pos() const { return pos_; }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n)
      throw FormatError(std::string("truncated while reading ") + what, pos_);
  }

  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

FormatError::FormatError(const std::string& what, std::uint64_t offset)
    : Error(what + " (offset " + std::to_string(offset) + ")"), detail_(what), offset_(offset) {}

const Tensor& Checkpoint::get(std::string_view name) const {
  for (const auto& [n, t] : tensors)
    if (n == name) return t;
  throw FormatError("checkpoint of kind '" + kind + "' has no tensor '" + std::string(name) + "'",
                    0);
}

bool Checkpoint::contains(std::string_view name) const {
  for (const auto& entry : tensors)
    if (entry.first == name) return true;
  return false;
}

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  std::string out(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kCheckpointVersion);
  put_string(out, ckpt.kind);
  put_string(out, ckpt.meta);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& [name, t] : ckpt.tensors) {
    put_string(out, name);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
    for (auto d : t.shape()) put<std::int64_t>(out, d);
    for (float v : t.to_floats()) put<float>(out, v);
  }
  return out;
}

Checkpoint parse_checkpoint(std::string_view bytes, std::string_view expected_kind) {
  Reader r(bytes);
  if (r.take(sizeof(kMagic), "magic") != std::string_view(kMagic, sizeof(kMagic)))
    throw FormatError("bad magic, not a matx checkpoint", 0);
  const auto version_at = r.pos();
  const auto version = r.get<std::uint32_t>("version");
  if (version != kCheckpointVersion)
    throw FormatError("unsupported checkpoint version " + std::to_string(version), version_at);
  Checkpoint ckpt;
  const auto kind_at = r.pos();
  ckpt.kind = r.string("kind");
  if (!expected_kind.empty() && ckpt.kind != expected_kind)
    throw FormatError("expected a '" + std::string(expected_kind) + "' checkpoint, found '" +
                          ckpt.kind + "'",
                      kind_at);
  ckpt.meta = r.string("meta");
  const auto count = r.get<std::uint32_t>("tensor count");
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = r.string("tensor name");
    const auto rank_at = r.pos();
    const auto rank = r.get<std::uint32_t>("rank");
    if (rank > 4) throw FormatError("tensor '" + name + "' has rank " + std::to_string(rank), rank_at);
    Shape shape;
    for (std::uint32_t d = 0; d < rank; ++d) {
      const auto dim_at = r.pos();
      const auto dim = r.get<std::int64_t>("dimension");
      if (dim < 0 || dim > kMaxDim)
        throw FormatError("tensor '" + name + "' has invalid dimension " + std::to_string(dim),
                          dim_at);
      shape.push_back(dim);
    }
    const auto n = static_cast<std::size_t>(shape_numel(shape));
    const auto raw = r.take(n * sizeof(float), "tensor values");
    std::vector<float> values(n);
    std::memcpy(values.data(), raw.data(), raw.size());
    ckpt.tensors.emplace_back(std::move(name), Tensor::from_floats(shape, values, DType::f32));
  }
  if (!r.done()) throw FormatError("trailing bytes after last tensor", r.pos());
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const std::string bytes = serialize_checkpoint(ckpt);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("cannot open " + path.string() + " for writing");
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw Error("write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path, std::string_view expected_kind) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  try {
    return parse_checkpoint(bytes, expected_kind);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.detail(), e.offset());
  }
}

}  // namespace matx
