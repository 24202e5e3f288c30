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

// Finite-difference check of every parameter of a small full model on one
// random 12-frame utterance.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "pdac/model/network.hpp"
#include "pdac/numerics/gradcheck.hpp"

namespace pdac::training {

inline model::ModelConfig selfcheck_config(model::Ablation mode = model::Ablation::full) {
  model::ModelConfig c;
  c.prosody_embed_dim = 4;
  c.lstm_hidden = 8;
  c.cnn_filters = 3;
  c.affinity_dim = 4;
  c.n_classes = 3;
  c.ablation = mode;
  return c;
}

inline model::Example random_utterance(std::size_t frames, std::uint64_t seed, std::size_t label) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  model::Example ex{"random", {}, label};
  ex.features.frames.resize(frames);
  for (auto& f : ex.features.frames) {
    for (auto& v : f.lfbe) v = g(rng);
    for (auto& v : f.energy) v = -std::abs(g(rng));
    for (auto& v : f.pitch) v = 0.5 * g(rng);
  }
  return ex;
}

/// Gradient report at a random parameter point. `analytic_scale` other than
/// 1 corrupts the analytic gradients, for testing the check itself.
inline numerics::GradientReport model_selfcheck(std::uint64_t seed = 1, double analytic_scale = 1.0,
                                                const model::ModelConfig& cfg = selfcheck_config()) {
  const auto ex = random_utterance(12, seed, seed % cfg.n_classes);
  const auto batch = model::make_batch<double>(ex, model::Normalizer{});
  model::Model<double> m(cfg);
  m.init(seed);
  std::mt19937_64 rng(seed + 1);
  std::uniform_real_distribution<double> jitter(-0.1, 0.1);
  for (auto& p : m.parameters())
    for (auto& v : p.value.data()) v += jitter(rng);
  std::vector<numerics::Parameter<double>*> params;
  for (auto& p : m.parameters()) params.push_back(&p);
  numerics::GradcheckOptions opts;
  opts.analytic_scale = analytic_scale;
  return numerics::check_gradients<double>(
      [&](numerics::Tape<double>& t) { return numerics::cross_entropy(m.forward(t, batch).logits, batch.labels); },
      params, opts);
}

}  // namespace pdac::training
