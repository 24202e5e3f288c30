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
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "pdac/features/features.hpp"
#include "pdac/model/config.hpp"
#include "pdac/numerics/tensor.hpp"

namespace pdac::model {

/// One labelled utterance ready for the network.
struct Example {
  std::string id;
  features::FeatureSequence features;
  std::size_t label = 0;
};

/// Per-dimension z-normalization of LFBE, fitted on training frames.
struct Normalizer {
  std::array<double, features::kNumMels> mean{};
  std::array<double, features::kNumMels> stddev{};

  Normalizer() { stddev.fill(1.0); }

  static Normalizer fit(std::span<const Example> examples) {
    Normalizer n;
    std::size_t count = 0;
    std::array<double, features::kNumMels> sum{}, sq{};
    for (const auto& ex : examples)
      for (const auto& f : ex.features.frames) {
        ++count;
        for (std::size_t m = 0; m < features::kNumMels; ++m) sum[m] += f.lfbe[m];
      }
    if (count == 0) return n;
    for (std::size_t m = 0; m < features::kNumMels; ++m) n.mean[m] = sum[m] / static_cast<double>(count);
    for (const auto& ex : examples)
      for (const auto& f : ex.features.frames)
        for (std::size_t m = 0; m < features::kNumMels; ++m) sq[m] += (f.lfbe[m] - n.mean[m]) * (f.lfbe[m] - n.mean[m]);
    for (std::size_t m = 0; m < features::kNumMels; ++m) {
      const double sd = std::sqrt(sq[m] / static_cast<double>(count));
      n.stddev[m] = sd > 1e-8 ? sd : 1.0;
    }
    return n;
  }

  double apply(std::size_t dim, double value) const { return (value - mean[dim]) / stddev[dim]; }
};

/// Padded, time-major network input for B utterances: row i*B + b holds
/// frame i of utterance b, zero past that utterance's length.
template <typename Real>
struct Batch {
  std::size_t size = 0;
  std::size_t steps = 0;
  numerics::Tensor<Real> lfbe;
  numerics::Tensor<Real> prosody;  // energy triple then pitch triple
  std::vector<std::size_t> lengths;
  std::vector<std::size_t> labels;
  std::vector<std::string> ids;
};

template <typename Real>
Batch<Real> make_batch(std::span<const Example* const> examples, const Normalizer& norm) {
  if (examples.empty()) throw std::invalid_argument("make_batch: empty batch");
  Batch<Real> batch;
  batch.size = examples.size();
  for (const auto* ex : examples) {
    if (ex->features.empty()) throw std::invalid_argument("utterance '" + ex->id + "' has no frames");
    batch.steps = std::max(batch.steps, ex->features.size());
    batch.lengths.push_back(ex->features.size());
    batch.labels.push_back(ex->label);
    batch.ids.push_back(ex->id);
  }
  const std::size_t rows = batch.steps * batch.size;
  batch.lfbe = numerics::Tensor<Real>(rows, features::kNumMels);
  batch.prosody = numerics::Tensor<Real>(rows, 6);
  for (std::size_t b = 0; b < batch.size; ++b) {
    const auto& frames = examples[b]->features.frames;
    for (std::size_t i = 0; i < frames.size(); ++i) {
      const std::size_t r = i * batch.size + b;
      for (std::size_t m = 0; m < features::kNumMels; ++m)
        batch.lfbe(r, m) = static_cast<Real>(norm.apply(m, frames[i].lfbe[m]));
      for (std::size_t j = 0; j < 3; ++j) {
        batch.prosody(r, j) = static_cast<Real>(frames[i].energy[j]);
        batch.prosody(r, 3 + j) = static_cast<Real>(frames[i].pitch[j]);
      }
    }
  }
  return batch;
}

template <typename Real>
Batch<Real> make_batch(const Example& example, const Normalizer& norm) {
  const Example* one[] = {&example};
  return make_batch<Real>(std::span<const Example* const>(one), norm);
}

}  // namespace pdac::model
