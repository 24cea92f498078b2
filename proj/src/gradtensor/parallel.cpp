#include "matx/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace matx {

namespace {

int threads_from_env() {
  if (const char* env = std::getenv("MATX_THREADS")) {
    try {
      return std::max(1, std::stoi(env));
    } catch (...) {
      return 1;
    }
  }
  return 1;
}

std::atomic<int>& thread_setting() {
  static std::atomic<int> value{threads_from_env()};
  return value;
}

}  // namespace

int thread_count() { return thread_setting(); }

void set_thread_count(int threads) { thread_setting() = std::max(1, threads); }

void parallel_for(std::int64_t n,
                  const std::function<void(std::int64_t, std::int64_t)>& body) {
  if (n <= 0) return;
  const std::int64_t workers = std::min<std::int64_t>(thread_count(), n);
  if (workers <= 1) {
    body(0, n);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers - 1));
  const std::int64_t chunk = (n + workers - 1) / workers;
  for (std::int64_t w = 1; w < workers; ++w) {
    const std::int64_t b = w * chunk;
    const std::int64_t e = std::min(n, b + chunk);
    if (b < e) pool.emplace_back([&body, b, e] { body(b, e); });
  }
  body(0, std::min(n, chunk));
  for (auto& t : pool) t.join();
}

}  // namespace matx
