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

// Gate-score export: one JSON line per utterance with 20-bin histograms of
// its global scores over [-1, 1] and local gate values over [0, 1], then
// one summary line per label with the pooled histograms.

#include <algorithm>
#include <array>
#include <cstddef>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pdac/data/dataset.hpp"
#include "pdac/model/network.hpp"

namespace pdac::training {

inline constexpr std::size_t kHistogramBins = 20;

struct Histogram {
  double lo = 0, hi = 1;
  std::array<std::size_t, kHistogramBins> counts{};
  std::size_t total = 0;

  void add(double v) {
    const double pos = (v - lo) / (hi - lo) * static_cast<double>(kHistogramBins);
    const auto bin = static_cast<std::size_t>(std::clamp(pos, 0.0, static_cast<double>(kHistogramBins - 1)));
    ++counts[bin];
    ++total;
  }

  void merge(const Histogram& o) {
    for (std::size_t b = 0; b < kHistogramBins; ++b) counts[b] += o.counts[b];
    total += o.total;
  }

  std::vector<double> edges() const {
    std::vector<double> e(kHistogramBins + 1);
    for (std::size_t b = 0; b <= kHistogramBins; ++b)
      e[b] = lo + (hi - lo) * static_cast<double>(b) / static_cast<double>(kHistogramBins);
    return e;
  }

  std::vector<double> mass() const {
    std::vector<double> m(kHistogramBins, 0.0);
    if (total)
      for (std::size_t b = 0; b < kHistogramBins; ++b)
        m[b] = static_cast<double>(counts[b]) / static_cast<double>(total);
    return m;
  }

  nlohmann::json to_json() const { return {{"edges", edges()}, {"mass", mass()}, {"count", total}}; }
};

struct GateSummary {
  Histogram global{-1.0, 1.0};
  Histogram beta{0.0, 1.0};
  std::size_t utterances = 0;
};

/// Runs the model with tracing over `items`, writes JSON lines to `out` and
/// returns the per-label summaries.
template <typename Real>
std::map<std::string, GateSummary> export_gate_traces(model::Model<Real>& m, const std::vector<model::Example>& items,
                                                      const model::Normalizer& norm, const data::LabelMap& labels,
                                                      std::ostream& out, std::size_t batch_size = 32) {
  std::map<std::string, GateSummary> by_label;
  for (const auto& idx : data::sequential_batches(items.size(), batch_size)) {
    std::vector<const model::Example*> ptrs;
    for (auto i : idx) ptrs.push_back(&items[i]);
    numerics::Tape<Real> tape;
    const auto batch = model::make_batch<Real>(std::span<const model::Example* const>(ptrs), norm);
    const auto res = m.forward(tape, batch, {.trace = true});
    for (std::size_t b = 0; b < batch.size; ++b) {
      const auto& tr = res.traces[b];
      const auto& label = labels.name(batch.labels[b]);
      GateSummary s;
      s.utterances = 1;
      for (double v : tr.global_score.data()) s.global.add(v);
      if (tr.local_beta)
        for (double v : tr.local_beta->data()) s.beta.add(v);
      nlohmann::json line{{"type", "utterance"},
                          {"id", tr.id},
                          {"label", label},
                          {"frames", batch.lengths[b]},
                          {"global_score", s.global.to_json()},
                          {"centered_similarity_mean", tr.centered_similarity_mean},
                          {"centered_dissimilarity_mean", tr.centered_dissimilarity_mean}};
      line["local_beta"] = tr.local_beta ? s.beta.to_json() : nlohmann::json();
      out << line.dump() << '\n';
      auto& agg = by_label[label];
      agg.global.merge(s.global);
      agg.beta.merge(s.beta);
      agg.utterances += 1;
    }
  }
  for (const auto& [label, s] : by_label) {
    nlohmann::json line{{"type", "label_summary"},
                        {"label", label},
                        {"utterances", s.utterances},
                        {"global_score", s.global.to_json()}};
    line["local_beta"] = s.beta.total ? s.beta.to_json() : nlohmann::json();
    out << line.dump() << '\n';
  }
  return by_label;
}

}  // namespace pdac::training
