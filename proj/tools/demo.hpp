#pragma once

#include <cstdint>
#include <filesystem>

namespace matx::demo {

// Writes a generator, four material packs (gray, bricks, noise, split) with
// label maps, and constant-colour target photos under out. Identical seeds
// give identical files.
void make_demo(const std::filesystem::path& out, std::uint64_t seed, std::int64_t size);

}  // namespace matx::demo
