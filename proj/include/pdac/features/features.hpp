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

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "pdac/features/frontend.hpp"
#include "pdac/features/pitch.hpp"

namespace pdac::features {

struct FrameFeatures {
  MelFrame lfbe{};
  Triple energy{};
  Triple pitch{};

  friend bool operator==(const FrameFeatures&, const FrameFeatures&) = default;
};

struct FeatureSequence {
  std::vector<FrameFeatures> frames;

  std::size_t size() const { return frames.size(); }
  bool empty() const { return frames.empty(); }

  bool all_finite() const {
    for (const auto& f : frames) {
      for (double v : f.lfbe)
        if (!std::isfinite(v)) return false;
      for (double v : f.energy)
        if (!std::isfinite(v)) return false;
      for (double v : f.pitch)
        if (!std::isfinite(v)) return false;
    }
    return true;
  }

  friend bool operator==(const FeatureSequence&, const FeatureSequence&) = default;
};

struct FrontendConfig {
  FrameConfig framing;
  PitchConfig pitch;
};

/// LFBE, energy and pitch streams on one shared frame grid.
inline FeatureSequence extract_features(const Waveform& wave, const FrontendConfig& cfg = {}) {
  const auto windows = frame_signal(wave, cfg.framing);
  const auto energies = mel_energies(windows, wave.sample_rate);
  const auto lfbe = log_mel(energies);
  const auto energy = extract_energy(energies);
  const auto pitch = extract_pitch(wave, cfg.pitch, cfg.framing);
  if (lfbe.size() != pitch.size()) throw std::logic_error("pitch and LFBE frame grids disagree");
  FeatureSequence seq;
  seq.frames.resize(lfbe.size());
  for (std::size_t k = 0; k < lfbe.size(); ++k) seq.frames[k] = {lfbe[k], energy[k], pitch[k]};
  return seq;
}

}  // namespace pdac::features
