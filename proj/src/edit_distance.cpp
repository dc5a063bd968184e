#include "gsd/edit_distance.hpp"

#include <algorithm>
#include <vector>

namespace gsd {

namespace {

// Three rolling rows: i-2, i-1, i.
std::size_t osa(std::string_view a, std::string_view b, std::size_t limit) {
  const std::size_t n = a.size();
  const std::size_t m = b.size();
  const std::size_t diff = n > m ? n - m : m - n;
  if (diff > limit) return limit + 1;
  if (n == 0) return m;
  if (m == 0) return n;

  std::vector<std::size_t> prev2(m + 1), prev(m + 1), cur(m + 1);
  for (std::size_t j = 0; j <= m; ++j) prev[j] = j;
  for (std::size_t i = 1; i <= n; ++i) {
    cur[0] = i;
    std::size_t row_min = cur[0];
    for (std::size_t j = 1; j <= m; ++j) {
      const std::size_t cost = a[i - 1] == b[j - 1] ? 0 : 1;
      std::size_t d = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + cost});
      if (i > 1 && j > 1 && a[i - 1] == b[j - 2] && a[i - 2] == b[j - 1]) {
        d = std::min(d, prev2[j - 2] + 1);
      }
      cur[j] = d;
      row_min = std::min(row_min, d);
    }
    // A transposition reaches back two rows, so both rows must exceed the limit.
    if (row_min > limit && i > 1) {
      const std::size_t prev_min = *std::min_element(prev.begin(), prev.end());
      if (prev_min > limit) return limit + 1;
    }
    std::swap(prev2, prev);
    std::swap(prev, cur);
  }
  return std::min(prev[m], limit + 1);
}

}  // namespace

std::size_t damerau_levenshtein(std::string_view a, std::string_view b) {
  return osa(a, b, std::max(a.size(), b.size()));
}

std::size_t damerau_levenshtein_bounded(std::string_view a, std::string_view b, std::size_t limit) {
  return osa(a, b, limit);
}

}  // namespace gsd
