#pragma once

#include <algorithm>
#include <cstddef>
#include <string>
#include <vector>

// Slow reference implementations for checking the diff module.
namespace oracle {

// Longest common subsequence length by full dynamic programming.
inline std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::vector<std::vector<std::size_t>> t(a.size() + 1, std::vector<std::size_t>(b.size() + 1, 0));
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      t[i][j] = a[i - 1] == b[j - 1] ? t[i - 1][j - 1] + 1 : std::max(t[i - 1][j], t[i][j - 1]);
    }
  }
  return t[a.size()][b.size()];
}

struct GestaltResult {
  std::size_t matched = 0;
  // Some recursion step had two different blocks of the winning length.
  bool saw_tie = false;
};

// Recursive longest-block matching written from scratch: scan every start
// pair, keep the first block of maximal length, recurse on both flanks.
inline void gestalt(const std::vector<std::string>& a, std::size_t alo, std::size_t ahi,
                    const std::vector<std::string>& b, std::size_t blo, std::size_t bhi, GestaltResult& out) {
  std::size_t best = 0, bi = alo, bj = blo;
  bool tie = false;
  for (std::size_t i = alo; i < ahi; ++i) {
    for (std::size_t j = blo; j < bhi; ++j) {
      std::size_t k = 0;
      while (i + k < ahi && j + k < bhi && a[i + k] == b[j + k]) ++k;
      if (k > best) {
        best = k;
        bi = i;
        bj = j;
        tie = false;
      } else if (k == best && k > 0) {
        tie = true;
      }
    }
  }
  if (best == 0) return;
  out.saw_tie = out.saw_tie || tie;
  out.matched += best;
  gestalt(a, alo, bi, b, blo, bj, out);
  gestalt(a, bi + best, ahi, b, bj + best, bhi, out);
}

inline GestaltResult gestalt(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  GestaltResult r;
  gestalt(a, 0, a.size(), b, 0, b.size(), r);
  return r;
}

}  // namespace oracle
