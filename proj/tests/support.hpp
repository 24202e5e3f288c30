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

// Helpers shared by the model tests and the acceptance runner.

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "pdac/model/network.hpp"

namespace pdac::testing {

inline model::Example random_example(std::string id, std::size_t frames, std::uint64_t seed, std::size_t label = 0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0, 1);
  model::Example ex{std::move(id), {}, label};
  ex.features.frames.resize(frames);
  for (auto& f : ex.features.frames) {
    for (auto& v : f.lfbe) v = g(rng) * 2 - 5;
    for (auto& v : f.energy) v = -std::abs(g(rng));
    for (auto& v : f.pitch) v = 0.3 * g(rng);
  }
  return ex;
}

inline std::vector<double> logits_of(model::Model<double>& m, const model::Batch<double>& b,
                                     const model::ForwardOptions& opt = {}) {
  numerics::Tape<double> tape;
  const numerics::Tensor<double> v = m.forward(tape, b, opt).logits.value();
  return {v.data().begin(), v.data().end()};
}

inline model::Batch<double> batch_of(const std::vector<const model::Example*>& ex, const model::Normalizer& n = {}) {
  return model::make_batch<double>(std::span<const model::Example* const>(ex), n);
}

/// Copies the parameters a baseline model shares with `full`: encoder input
/// weights lose their leading prosody rows, the classifier its trailing
/// global-fusion rows.
inline void copy_into_baseline(const model::Model<double>& full, model::Model<double>& base) {
  for (auto& p : base.parameters()) {
    const auto& src = full.parameter(p.name).value;
    const std::size_t skip = src.rows() - p.value.rows();
    const std::size_t offset = p.name == "classifier.W_f" ? 0 : skip;
    for (std::size_t r = 0; r < p.value.rows(); ++r)
      for (std::size_t c = 0; c < p.value.cols(); ++c) p.value(r, c) = src(r + offset, c);
  }
}

/// Silences every prosody pathway of a gated model: zero embedding, zero
/// CNN and zero classifier rows for the fused global representation.
inline void zero_prosody(model::Model<double>& m) {
  const auto pooled_rows = m.parameter("classifier.W_f").value.rows();
  const auto encoder_width = m.config().lstm_hidden;
  for (auto& p : m.parameters()) {
    if (p.name.starts_with("prosody.") || p.name.starts_with("cnn.")) p.value.fill(0.0);
    if (p.name == "classifier.W_f")
      for (std::size_t r = encoder_width; r < pooled_rows; ++r)
        for (std::size_t c = 0; c < p.value.cols(); ++c) p.value(r, c) = 0.0;
  }
}

}  // namespace pdac::testing
