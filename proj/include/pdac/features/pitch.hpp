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

// NCCF pitch tracker on the LFBE frame grid. Per frame it scores every
// integer lag in the search range, picks a continuous lag path with Viterbi,
// and turns that path into the three pitch features.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "pdac/features/frontend.hpp"

namespace pdac::features {

struct PitchConfig {
  double min_f0 = 60.0;
  double max_f0 = 400.0;
  // Subtracted per sample of lag from the NCCF; favours the shortest period
  // among equally good multiples.
  double lag_bias = 1e-4;
  // Viterbi cost per unit of |log lag| change between consecutive frames.
  double transition_weight = 2.0;
  double mean_window_s = 1.5;
};

struct PitchTrack {
  std::vector<std::size_t> lag;      // selected integer lag per frame
  std::vector<double> pitch_hz;      // interpolated pitch per frame
  std::vector<double> nccf;          // raw NCCF at the selected lag
  std::vector<Triple> features;      // warped NCCF, normalized log pitch, delta log pitch
};

namespace detail {

struct LagRange {
  std::size_t lo, hi;  // inclusive
};

inline LagRange lag_range(double sample_rate, const PitchConfig& cfg) {
  const auto lo = static_cast<std::size_t>(std::floor(sample_rate / cfg.max_f0));
  const auto hi = static_cast<std::size_t>(std::ceil(sample_rate / cfg.min_f0));
  return {std::max<std::size_t>(lo, 1), std::max(hi, lo + 1)};
}

// NCCF for every lag of one frame. The frame of `window` samples starting at
// `start` is compared with the same-length segment `lag` samples later;
// samples past the end of the utterance read as zero.
inline std::vector<double> frame_nccf(const std::vector<double>& x, std::size_t start, std::size_t window,
                                      LagRange lags) {
  const std::size_t span = window + lags.hi;
  std::vector<double> seg(span, 0.0);
  for (std::size_t i = 0; i < span && start + i < x.size(); ++i) seg[i] = x[start + i];

  double e0 = 0;
  for (std::size_t n = 0; n < window; ++n) e0 += seg[n] * seg[n];
  std::vector<double> out(lags.hi - lags.lo + 1, 0.0);
  for (std::size_t lag = lags.lo; lag <= lags.hi; ++lag) {
    double cross = 0, el = 0;
    for (std::size_t n = 0; n < window; ++n) {
      cross += seg[n] * seg[n + lag];
      el += seg[n + lag] * seg[n + lag];
    }
    const double denom = std::sqrt(e0 * el);
    out[lag - lags.lo] = denom > 1e-12 ? cross / denom : 0.0;
  }
  return out;
}

}  // namespace detail

inline PitchTrack track_pitch(const Waveform& wave, const PitchConfig& cfg = {}, const FrameConfig& frames = {}) {
  validate(wave, frames);
  const std::size_t window = frames.window_length(wave.sample_rate);
  const std::size_t hop = frames.hop_length(wave.sample_rate);
  const std::size_t n = frame_count(wave.samples.size(), window, hop);
  const auto lags = detail::lag_range(wave.sample_rate, cfg);
  const std::size_t n_lags = lags.hi - lags.lo + 1;

  std::vector<std::vector<double>> nccf(n);
  for (std::size_t k = 0; k < n; ++k) nccf[k] = detail::frame_nccf(wave.samples, k * hop, window, lags);

  std::vector<double> log_lag(n_lags);
  for (std::size_t j = 0; j < n_lags; ++j) log_lag[j] = std::log(static_cast<double>(lags.lo + j));
  auto local_cost = [&](std::size_t k, std::size_t j) {
    return 1.0 - (nccf[k][j] - cfg.lag_bias * static_cast<double>(lags.lo + j));
  };

  // Viterbi over lag states.
  std::vector<double> cost(n_lags), next(n_lags);
  std::vector<std::vector<std::size_t>> back(n, std::vector<std::size_t>(n_lags, 0));
  for (std::size_t j = 0; j < n_lags; ++j) cost[j] = local_cost(0, j);
  for (std::size_t k = 1; k < n; ++k) {
    for (std::size_t j = 0; j < n_lags; ++j) {
      double best = std::numeric_limits<double>::infinity();
      std::size_t arg = 0;
      for (std::size_t i = 0; i < n_lags; ++i) {
        const double c = cost[i] + cfg.transition_weight * std::abs(log_lag[j] - log_lag[i]);
        if (c < best) {
          best = c;
          arg = i;
        }
      }
      next[j] = best + local_cost(k, j);
      back[k][j] = arg;
    }
    std::swap(cost, next);
  }
  std::vector<std::size_t> path(n);
  path[n - 1] = static_cast<std::size_t>(std::min_element(cost.begin(), cost.end()) - cost.begin());
  for (std::size_t k = n - 1; k > 0; --k) path[k - 1] = back[k][path[k]];

  PitchTrack track;
  track.lag.resize(n);
  track.pitch_hz.resize(n);
  track.nccf.resize(n);
  track.features.resize(n);
  std::vector<double> log_pitch(n), pov(n);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t j = path[k];
    double offset = 0;
    if (j > 0 && j + 1 < n_lags) {
      const double ym = nccf[k][j - 1], y0 = nccf[k][j], yp = nccf[k][j + 1];
      const double curv = ym - 2 * y0 + yp;
      if (curv < 0) offset = std::clamp(0.5 * (ym - yp) / curv, -0.5, 0.5);
    }
    const double period = static_cast<double>(lags.lo + j) + offset;
    track.lag[k] = lags.lo + j;
    track.nccf[k] = nccf[k][j];
    track.pitch_hz[k] = wave.sample_rate / period;
    log_pitch[k] = std::log(track.pitch_hz[k]);
    pov[k] = std::max(0.0, nccf[k][j]);
    track.features[k][0] = nccf[k][j] - cfg.lag_bias * static_cast<double>(lags.lo + j);
  }

  // POV-weighted mean subtraction over a centred window, truncated at the edges.
  const double frame_s = static_cast<double>(hop) / wave.sample_rate;
  const auto half = static_cast<std::size_t>(std::lround(cfg.mean_window_s / frame_s / 2.0));
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t lo = k >= half ? k - half : 0;
    const std::size_t hi = std::min(n - 1, k + half);
    double wsum = 0, wlp = 0, plain = 0;
    for (std::size_t i = lo; i <= hi; ++i) {
      wsum += pov[i];
      wlp += pov[i] * log_pitch[i];
      plain += log_pitch[i];
    }
    const double mean = wsum >= 1e-6 ? wlp / wsum : plain / static_cast<double>(hi - lo + 1);
    track.features[k][1] = log_pitch[k] - mean;
  }

  for (std::size_t k = 0; k < n; ++k) {
    double d = 0;
    if (n > 1) {
      if (k == 0) d = log_pitch[1] - log_pitch[0];
      else if (k == n - 1) d = log_pitch[n - 1] - log_pitch[n - 2];
      else d = 0.5 * (log_pitch[k + 1] - log_pitch[k - 1]);
    }
    track.features[k][2] = d;
  }
  return track;
}

inline std::vector<Triple> extract_pitch(const Waveform& wave, const PitchConfig& cfg = {},
                                         const FrameConfig& frames = {}) {
  return track_pitch(wave, cfg, frames).features;
}

}  // namespace pdac::features
