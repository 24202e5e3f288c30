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
#include <cstdint>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "pdac/data/manifest.hpp"
#include "pdac/data/wav.hpp"
#include "pdac/features/cache.hpp"
#include "pdac/features/features.hpp"
#include "pdac/model/inputs.hpp"
#include "pdac/util/parallel.hpp"

namespace pdac::data {

using FeatureLookup = std::map<std::string, features::FeatureSequence>;

inline FeatureLookup index_cache(std::vector<features::CachedUtterance> records) {
  FeatureLookup out;
  for (auto& r : records) out.insert_or_assign(std::move(r.id), std::move(r.features));
  return out;
}

/// Features for every manifest entry, from `cache` when it has the id and
/// from the audio otherwise.
inline std::vector<model::Example> load_examples(const Manifest& manifest, const LabelMap& labels,
                                                 const features::FrontendConfig& frontend = {},
                                                 const FeatureLookup* cache = nullptr,
                                                 std::size_t threads = util::worker_count()) {
  std::vector<model::Example> out(manifest.entries.size());
  util::parallel_for(
      out.size(),
      [&](std::size_t i) {
        const auto& e = manifest.entries[i];
        out[i].id = e.id;
        out[i].label = labels.index(e.label());
        if (cache) {
          if (auto it = cache->find(e.id); it != cache->end()) {
            out[i].features = it->second;
            return;
          }
        }
        try {
          out[i].features = features::extract_features(read_wav(e.audio.string()), frontend);
        } catch (const std::exception& ex) {
          throw std::runtime_error("utterance '" + e.id + "': " + ex.what());
        }
      },
      threads);
  return out;
}

/// Shuffled mini-batches of indices into n items for one epoch. The order
/// depends only on (seed, epoch); the last batch holds the remainder.
inline std::vector<std::vector<std::size_t>> make_batches(std::size_t n, std::size_t batch_size, std::uint64_t seed,
                                                          std::uint64_t epoch = 0) {
  if (batch_size == 0) throw std::invalid_argument("batch size must be positive");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(epoch), static_cast<std::uint32_t>(epoch >> 32)};
  std::mt19937_64 rng(seq);
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < n; start += batch_size)
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(std::min(n, start + batch_size)));
  return batches;
}

/// Consecutive, unshuffled batches for evaluation.
inline std::vector<std::vector<std::size_t>> sequential_batches(std::size_t n, std::size_t batch_size) {
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < n; start += batch_size) {
    batches.emplace_back();
    for (std::size_t i = start; i < std::min(n, start + batch_size); ++i) batches.back().push_back(i);
  }
  return batches;
}

}  // namespace pdac::data
