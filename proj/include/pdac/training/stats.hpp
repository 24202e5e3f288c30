// Copyright 2026 The pdac Authors.
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

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

namespace pdac::training {

enum class Alternative { two_sided, greater, less };

struct MannWhitneyResult {
  double u = 0;  // U of the first sample: pairs (a, b) with a > b, ties counting one half
  double p = 1;
  bool exact = false;
};

namespace detail {

// Midranks of the pooled sample, doubled so that they stay integral.
inline std::vector<long> doubled_midranks(std::span<const double> pooled) {
  std::vector<std::size_t> order(pooled.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto x, auto y) { return pooled[x] < pooled[y]; });
  std::vector<long> rank2(pooled.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && pooled[order[j]] == pooled[order[i]]) ++j;
    // Ranks i+1 .. j share (i+1+j)/2.
    for (std::size_t k = i; k < j; ++k) rank2[order[k]] = static_cast<long>(i + 1 + j);
    i = j;
  }
  return rank2;
}

// Visits every way of choosing `k` of the doubled ranks for the first sample
// and reports each doubled rank sum.
template <typename F>
void for_each_rank_sum(const std::vector<long>& rank2, std::size_t k, F&& visit) {
  std::vector<std::size_t> pick(k);
  std::iota(pick.begin(), pick.end(), 0);
  const std::size_t n = rank2.size();
  while (true) {
    long s = 0;
    for (auto i : pick) s += rank2[i];
    visit(s);
    std::size_t i = k;
    while (i > 0 && pick[i - 1] == n - k + i - 1) --i;
    if (i == 0) return;
    ++pick[i - 1];
    for (std::size_t j = i; j < k; ++j) pick[j] = pick[j - 1] + 1;
  }
}

}  // namespace detail

/// Mann-Whitney U test with midranks for ties. Exact enumeration of the
/// permutation distribution when both samples have at most `exact_limit`
/// items; otherwise the normal approximation with tie-corrected variance
/// and continuity correction.
inline MannWhitneyResult mann_whitney_u(std::span<const double> a, std::span<const double> b,
                                        Alternative alt = Alternative::two_sided, std::size_t exact_limit = 8) {
  if (a.empty() || b.empty()) throw std::invalid_argument("mann_whitney_u: samples must be non-empty");
  const std::size_t na = a.size(), nb = b.size(), n = na + nb;
  std::vector<double> pooled(a.begin(), a.end());
  pooled.insert(pooled.end(), b.begin(), b.end());
  const auto rank2 = detail::doubled_midranks(pooled);
  long r2 = 0;
  for (std::size_t i = 0; i < na; ++i) r2 += rank2[i];
  // 2U = 2R - na(na+1)
  const long base2 = static_cast<long>(na * (na + 1));
  const long u2 = r2 - base2;
  const long mean2 = static_cast<long>(na * nb);  // 2 * E[U]

  MannWhitneyResult res;
  res.u = static_cast<double>(u2) / 2.0;

  if (na <= exact_limit && nb <= exact_limit) {
    res.exact = true;
    std::size_t total = 0, hits = 0;
    const long dev = std::abs(u2 - mean2);
    detail::for_each_rank_sum(rank2, na, [&](long s) {
      const long u = s - base2;
      ++total;
      bool extreme = false;
      switch (alt) {
        case Alternative::two_sided: extreme = std::abs(u - mean2) >= dev; break;
        case Alternative::greater: extreme = u >= u2; break;
        case Alternative::less: extreme = u <= u2; break;
      }
      hits += extreme;
    });
    res.p = static_cast<double>(hits) / static_cast<double>(total);
    return res;
  }

  double ties = 0;
  {
    std::vector<double> sorted = pooled;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < sorted.size();) {
      std::size_t j = i;
      while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
      const double t = static_cast<double>(j - i);
      ties += t * t * t - t;
      i = j;
    }
  }
  const double dn = static_cast<double>(n);
  const double var = static_cast<double>(na) * static_cast<double>(nb) / 12.0 * ((dn + 1) - ties / (dn * (dn - 1)));
  if (var <= 0) {
    res.p = 1.0;
    return res;
  }
  const double sd = std::sqrt(var);
  const double diff = res.u - static_cast<double>(mean2) / 2.0;
  auto upper_tail = [](double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); };
  switch (alt) {
    case Alternative::two_sided:
      res.p = 2 * upper_tail(std::max(0.0, std::abs(diff) - 0.5) / sd);
      break;
    case Alternative::greater: res.p = upper_tail((diff - 0.5) / sd); break;
    case Alternative::less: res.p = upper_tail((-diff - 0.5) / sd); break;
  }
  res.p = std::clamp(res.p, 0.0, 1.0);
  return res;
}

struct Summary {
  double mean = 0;
  double stddev = 0;  // sample standard deviation, 0 for a single value
};

inline Summary summarize(std::span<const double> xs) {
  if (xs.empty()) return {};
  Summary s;
  for (double x : xs) s.mean += x;
  s.mean /= static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0;
    for (double x : xs) ss += (x - s.mean) * (x - s.mean);
    s.stddev = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  }
  return s;
}

}  // namespace pdac::training
