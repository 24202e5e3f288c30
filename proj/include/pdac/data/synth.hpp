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

// Synthetic corpus whose four classes differ only in prosody: a rising or
// falling pitch contour at steady loudness, or a flat contour with a loud
// burst late or early in the utterance. Carrier timbre, level, length and
// noise are drawn from the same distributions for every class.

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "pdac/data/manifest.hpp"
#include "pdac/data/wav.hpp"
#include "pdac/features/frontend.hpp"

namespace pdac::data {

enum class SynthClass { rising, falling, late_burst, early_burst };

inline constexpr std::array<SynthClass, 4> kSynthClasses{SynthClass::rising, SynthClass::falling,
                                                          SynthClass::late_burst, SynthClass::early_burst};

inline const char* to_string(SynthClass c) {
  switch (c) {
    case SynthClass::rising: return "rising";
    case SynthClass::falling: return "falling";
    case SynthClass::late_burst: return "late_burst";
    case SynthClass::early_burst: return "early_burst";
  }
  return "?";
}

struct SynthConfig {
  std::size_t train_per_class = 64;
  std::size_t validation_per_class = 32;
  std::size_t test_per_class = 32;
  std::uint64_t seed = 1;
  double sample_rate = 8000.0;
};

namespace detail {

inline double raised_cosine_edge(double t, double width) {
  if (t <= 0) return 0.0;
  if (t >= width) return 1.0;
  return 0.5 - 0.5 * std::cos(std::numbers::pi * t / width);
}

}  // namespace detail

inline features::Waveform synth_waveform(SynthClass cls, std::mt19937_64& rng, double sample_rate = 8000.0) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * u(rng); };

  const double duration = uniform(0.8, 1.5);
  const auto n = static_cast<std::size_t>(duration * sample_rate);
  const double centre_f0 = std::exp(uniform(std::log(110.0), std::log(200.0)));
  const double sweep = uniform(0.35, 0.6);  // total change in log f0
  const double slope = cls == SynthClass::rising ? sweep : cls == SynthClass::falling ? -sweep : 0.0;
  const double vibrato_hz = uniform(3.0, 6.0), vibrato_depth = uniform(0.005, 0.015);

  // Timbre: spectral tilt plus two resonances.
  const double tilt = uniform(0.4, 1.4);
  const double f1 = uniform(400, 900), f2 = uniform(1100, 2500);
  const double bw1 = uniform(150, 300), bw2 = uniform(200, 400);
  const std::size_t harmonics = 4 + static_cast<std::size_t>(u(rng) * 7);
  std::vector<double> phase(harmonics);
  for (auto& p : phase) p = uniform(0, 2 * std::numbers::pi);
  auto resonance = [](double f, double centre, double bw) {
    const double x = (f - centre) / bw;
    return 1.0 + 3.0 / (1.0 + x * x);
  };

  double burst_centre = 0, burst_len = 0, burst_gain = 1;
  if (cls == SynthClass::late_burst || cls == SynthClass::early_burst) {
    burst_len = uniform(0.15, 0.25);
    burst_gain = uniform(2.5, 4.0);
    const double third = duration / 3.0;
    const double lo = cls == SynthClass::early_burst ? 0.05 + burst_len / 2 : 2 * third + burst_len / 2;
    const double hi = cls == SynthClass::early_burst ? third - burst_len / 2 : duration - 0.05 - burst_len / 2;
    burst_centre = uniform(lo, std::max(lo, hi));
  }

  const double level = uniform(0.04, 0.15);
  features::Waveform wave;
  wave.sample_rate = sample_rate;
  wave.samples.resize(n);
  double f0_phase = 0;
  const double nyquist = sample_rate / 2 - 200;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / sample_rate;
    const double f0 = centre_f0 * std::exp(slope * (t / duration - 0.5)) *
                      (1 + vibrato_depth * std::sin(2 * std::numbers::pi * vibrato_hz * t));
    f0_phase += 2 * std::numbers::pi * f0 / sample_rate;
    double s = 0;
    for (std::size_t h = 1; h <= harmonics; ++h) {
      const double fh = f0 * static_cast<double>(h);
      if (fh >= nyquist) break;
      const double amp = std::pow(static_cast<double>(h), -tilt) * resonance(fh, f1, bw1) * resonance(fh, f2, bw2);
      s += amp * std::sin(static_cast<double>(h) * f0_phase + phase[h - 1]);
    }
    double env = detail::raised_cosine_edge(t, 0.03) * detail::raised_cosine_edge(duration - t, 0.03);
    if (burst_len > 0) {
      const double into = t - (burst_centre - burst_len / 2), left = burst_centre + burst_len / 2 - t;
      env *= 1 + (burst_gain - 1) * detail::raised_cosine_edge(into, 0.02) * detail::raised_cosine_edge(left, 0.02);
    }
    wave.samples[i] = level * env * s / 3.0;
  }

  double power = 0;
  for (double s : wave.samples) power += s * s;
  power /= static_cast<double>(n);
  const double snr_db = uniform(15, 30);
  std::normal_distribution<double> noise(0.0, std::sqrt(power / std::pow(10.0, snr_db / 10)));
  double peak = 0;
  for (auto& s : wave.samples) {
    s += noise(rng);
    peak = std::max(peak, std::abs(s));
  }
  if (peak > 0.95)
    for (auto& s : wave.samples) s *= 0.95 / peak;
  return wave;
}

/// Deterministic generator for utterance `index` of `cls` in `split`.
inline std::mt19937_64 synth_rng(std::uint64_t seed, std::size_t split, SynthClass cls, std::size_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(split), static_cast<std::uint32_t>(cls),
                    static_cast<std::uint32_t>(index)};
  return std::mt19937_64(seq);
}

/// Writes wav/<id>.wav files and train/validation/test manifests into `dir`.
inline Corpus synth_generate(const SynthConfig& cfg, const std::filesystem::path& dir) {
  if (cfg.train_per_class == 0) throw std::invalid_argument("synth: need at least one utterance per class");
  std::filesystem::create_directories(dir / "wav");
  const std::array<std::pair<const char*, std::size_t>, 3> splits{
      {{"train", cfg.train_per_class}, {"validation", cfg.validation_per_class}, {"test", cfg.test_per_class}}};
  std::array<Manifest, 3> manifests;
  for (std::size_t s = 0; s < splits.size(); ++s) {
    const auto& [name, per_class] = splits[s];
    for (std::size_t i = 0; i < per_class; ++i)
      for (auto cls : kSynthClasses) {
        char id[64];
        std::snprintf(id, sizeof id, "%s-%s-%04zu", name, to_string(cls), i);
        auto rng = synth_rng(cfg.seed, s, cls, i);
        const auto path = dir / "wav" / (std::string(id) + ".wav");
        write_wav(path.string(), synth_waveform(cls, rng, cfg.sample_rate));
        manifests[s].entries.push_back({id, path, {to_string(cls)}});
      }
    write_manifest(dir / (std::string(name) + ".tsv"), manifests[s]);
  }
  Corpus c{std::move(manifests[0]), std::move(manifests[1]), std::move(manifests[2]), {}};
  c.labels = build_label_map(c.train);
  return c;
}

}  // namespace pdac::data
