// Copyright 2026 The synctrack Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Brute-force reference implementations shared by the unit tests and the
// acceptance runner. They favour obviousness over speed.

#ifndef SYNCTRACK_TESTS_SUPPORT_ORACLES_HPP_
#define SYNCTRACK_TESTS_SUPPORT_ORACLES_HPP_

#include <algorithm>
#include <cstddef>
#include <functional>
#include <limits>
#include <vector>

#include "synctrack/geometry.hpp"

namespace synctrack::oracle {

// Greedy max-min selection that recomputes every candidate's distance to the
// whole selected set with true distances at each step.
inline std::vector<std::size_t> greedy_fps(const std::vector<Vec3>& pts, std::size_t k,
                                           std::size_t start) {
  std::vector<std::size_t> sel{start};
  while (sel.size() < k) {
    double best = -1.0;
    std::size_t arg = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (std::find(sel.begin(), sel.end(), i) != sel.end()) continue;
      double m = std::numeric_limits<double>::infinity();
      for (std::size_t s : sel) m = std::min(m, (pts[i] - pts[s]).norm());
      if (m > best) {
        best = m;
        arg = i;
      }
    }
    sel.push_back(arg);
  }
  return sel;
}

inline double min_pairwise_distance(const std::vector<Vec3>& pts,
                                    const std::vector<std::size_t>& idx) {
  double m = std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < idx.size(); ++a)
    for (std::size_t b = a + 1; b < idx.size(); ++b)
      m = std::min(m, (pts[idx[a]] - pts[idx[b]]).norm());
  return m;
}

// logits[m][t][c] for heads m, query rows t and key columns c (row-major
// [n, n] per head). Enumerates every k-subset of the search columns in
// lexicographic order and keeps the first with the largest summed
// template-to-search logit.
inline std::vector<std::size_t> best_search_subset(
    const std::vector<std::vector<double>>& logits, std::size_t n_template,
    std::size_t n_search, std::size_t k) {
  const std::size_t n = n_template + n_search;
  auto objective = [&](const std::vector<std::size_t>& subset) {
    double total = 0.0;
    for (const auto& head : logits)
      for (std::size_t t = 0; t < n_template; ++t)
        for (std::size_t j : subset) total += head[t * n + n_template + j];
    return total;
  };
  std::vector<std::size_t> best;
  double best_value = -std::numeric_limits<double>::infinity();
  std::vector<std::size_t> cur;
  std::function<void(std::size_t)> rec = [&](std::size_t from) {
    if (cur.size() == k) {
      const double v = objective(cur);
      if (v > best_value) {
        best_value = v;
        best = cur;
      }
      return;
    }
    for (std::size_t j = from; j < n_search; ++j) {
      cur.push_back(j);
      rec(j + 1);
      cur.pop_back();
    }
  };
  rec(0);
  return best;
}

}  // namespace synctrack::oracle

#endif  // SYNCTRACK_TESTS_SUPPORT_ORACLES_HPP_
