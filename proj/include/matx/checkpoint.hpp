#pragma once

// Versioned little-endian container for named tensors, shared by extractor
// weights, generator weights and latent codes.
//
//   offset 0   magic "MATXCKPT" (8 bytes)
//          8   u32 version (= 1)
//         12   u32 kind length, kind bytes
//              u32 meta length, meta bytes (JSON text)
//              u32 tensor count
//   per tensor: u32 name length, name bytes, u32 rank, rank x i64 dims,
//               numel x f32 values (row-major)

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "matx/gradtensor.hpp"

namespace matx {

class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::uint64_t offset);
  std::uint64_t offset() const { return offset_; }
  // Message without the offset suffix.
  const std::string& detail() const { return detail_; }

 private:
  std::string detail_;
  std::uint64_t offset_;
};

struct Checkpoint {
  std::string kind;
  std::string meta;
  std::vector<std::pair<std::string, Tensor>> tensors;

  void add(std::string name, const Tensor& t) { tensors.emplace_back(std::move(name), t); }
  // Throws FormatError (offset 0) when absent.
  const Tensor& get(std::string_view name) const;
  bool contains(std::string_view name) const;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::string serialize_checkpoint(const Checkpoint& ckpt);
// Loaded tensors are f32 leaves.
Checkpoint parse_checkpoint(std::string_view bytes, std::string_view expected_kind);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path, std::string_view expected_kind);

}  // namespace matx
