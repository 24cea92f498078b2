#pragma once

// Brute-force reference computations for the statistical losses.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

namespace matx::testing {

// Exact W1 between two equal-size empirical distributions by trying every
// assignment (n <= 8).
inline double transport_w1(const std::vector<double>& u, const std::vector<double>& v) {
  std::vector<int> perm(v.size());
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double s = 0;
    for (std::size_t i = 0; i < u.size(); ++i) s += std::abs(u[i] - v[static_cast<std::size_t>(perm[i])]);
    best = std::min(best, s / static_cast<double>(u.size()));
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

// E|X-Y| - E|X-X'|/2 - E|Y-Y'|/2 over the empirical distributions.
inline double energy_identity(const std::vector<double>& u, const std::vector<double>& v) {
  auto mean_abs = [](const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0;
    for (double x : a)
      for (double y : b) s += std::abs(x - y);
    return s / (static_cast<double>(a.size()) * static_cast<double>(b.size()));
  };
  return mean_abs(u, v) - 0.5 * mean_abs(u, u) - 0.5 * mean_abs(v, v);
}

// Mean sorted-L1 of u against every |u|-subset of v.
inline double exhaustive_subset_mean(const std::vector<double>& u, const std::vector<double>& v) {
  const std::size_t k = u.size(), m = v.size();
  std::vector<double> su = u;
  std::sort(su.begin(), su.end());
  std::vector<bool> pick(m, false);
  std::fill(pick.begin(), pick.begin() + static_cast<std::ptrdiff_t>(k), true);
  double total = 0;
  std::size_t count = 0;
  do {
    std::vector<double> sub;
    for (std::size_t i = 0; i < m; ++i)
      if (pick[i]) sub.push_back(v[i]);
    std::sort(sub.begin(), sub.end());
    double s = 0;
    for (std::size_t i = 0; i < k; ++i) s += std::abs(su[i] - sub[i]);
    total += s / static_cast<double>(k);
    ++count;
  } while (std::prev_permutation(pick.begin(), pick.end()));
  return total / static_cast<double>(count);
}

// Naive erosion with a (2r+1)^2 square; outside the grid counts as unset.
inline std::vector<std::uint8_t> erode_naive(const std::vector<std::uint8_t>& m, int h, int w, int r) {
  std::vector<std::uint8_t> out(m.size(), 0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      bool keep = true;
      for (int dy = -r; dy <= r && keep; ++dy)
        for (int dx = -r; dx <= r && keep; ++dx) {
          const int sy = y + dy, sx = x + dx;
          if (sy < 0 || sy >= h || sx < 0 || sx >= w || !m[static_cast<std::size_t>(sy * w + sx)])
            keep = false;
        }
      out[static_cast<std::size_t>(y * w + x)] = keep;
    }
  return out;
}

}  // namespace matx::testing
