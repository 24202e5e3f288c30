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

// Framing, power spectrum, and the 40-band log mel filterbank (LFBE) plus
// the three utterance-relative energy features derived from it.

#include <fftw3.h>

#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <mutex>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace pdac::features {

inline constexpr std::size_t kNumMels = 40;
inline constexpr double kLogFloor = 1e-10;

class UtteranceTooShort : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Waveform {
  std::vector<double> samples;
  double sample_rate = 8000.0;
};

struct FrameConfig {
  double window_ms = 25.0;
  double hop_ms = 10.0;

  std::size_t window_length(double sample_rate) const {
    return static_cast<std::size_t>(std::lround(window_ms * sample_rate / 1000.0));
  }
  std::size_t hop_length(double sample_rate) const {
    return static_cast<std::size_t>(std::lround(hop_ms * sample_rate / 1000.0));
  }
};

inline std::size_t frame_count(std::size_t n_samples, std::size_t window, std::size_t hop) {
  if (n_samples < window) return 0;
  return (n_samples - window) / hop + 1;
}

inline void validate(const Waveform& wave, const FrameConfig& cfg) {
  if (!(wave.sample_rate > 0)) throw std::invalid_argument("sample rate must be positive");
  if (!(cfg.hop_ms > 0) || cfg.window_ms < cfg.hop_ms)
    throw std::invalid_argument("framing needs window_ms >= hop_ms > 0");
  const std::size_t window = cfg.window_length(wave.sample_rate);
  if (wave.samples.size() < window || window == 0)
    throw UtteranceTooShort("utterance of " + std::to_string(wave.samples.size()) +
                            " samples is shorter than one " + std::to_string(window) + "-sample window");
}

inline std::vector<double> hamming_window(std::size_t n) {
  std::vector<double> w(n, 1.0);
  if (n == 1) return w;
  for (std::size_t i = 0; i < n; ++i)
    w[i] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n - 1));
  return w;
}

/// Hamming-windowed frames; frame k starts at sample k * hop.
inline std::vector<std::vector<double>> frame_signal(const Waveform& wave, const FrameConfig& cfg = {}) {
  validate(wave, cfg);
  const std::size_t window = cfg.window_length(wave.sample_rate);
  const std::size_t hop = cfg.hop_length(wave.sample_rate);
  const auto analysis = hamming_window(window);
  const std::size_t n = frame_count(wave.samples.size(), window, hop);
  std::vector<std::vector<double>> frames(n, std::vector<double>(window));
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < window; ++i) frames[k][i] = wave.samples[k * hop + i] * analysis[i];
  return frames;
}

inline std::size_t fft_size_for(std::size_t window) {
  std::size_t n = 1;
  while (n < window) n <<= 1;
  return n;
}

/// |FFT|^2 of a zero-padded frame, bins 0..n/2. Plans are created once per
/// size; execution with new-array FFTW calls is thread-safe.
class PowerSpectrum {
 public:
  explicit PowerSpectrum(std::size_t fft_size) : n_(fft_size), plan_(plan_for(fft_size)) {}

  std::size_t fft_size() const { return n_; }
  std::size_t bins() const { return n_ / 2 + 1; }

  std::vector<double> operator()(std::span<const double> frame) const {
    if (frame.size() > n_) throw std::invalid_argument("frame longer than FFT size");
    std::vector<double> in(n_, 0.0);
    std::copy(frame.begin(), frame.end(), in.begin());
    std::vector<std::complex<double>> out(bins());
    fftw_execute_dft_r2c(plan_, in.data(), reinterpret_cast<fftw_complex*>(out.data()));
    std::vector<double> power(bins());
    for (std::size_t k = 0; k < bins(); ++k) power[k] = std::norm(out[k]);
    return power;
  }

 private:
  static fftw_plan plan_for(std::size_t n) {
    static std::mutex mutex;
    static std::vector<std::pair<std::size_t, fftw_plan>> plans;
    std::lock_guard lock(mutex);
    for (const auto& [size, plan] : plans)
      if (size == n) return plan;
    std::vector<double> in(n);
    std::vector<std::complex<double>> out(n / 2 + 1);
    fftw_plan plan = fftw_plan_dft_r2c_1d(static_cast<int>(n), in.data(),
                                          reinterpret_cast<fftw_complex*>(out.data()),
                                          FFTW_ESTIMATE | FFTW_UNALIGNED);
    if (!plan) throw std::runtime_error("FFTW could not create a plan");
    plans.emplace_back(n, plan);
    return plan;
  }

  std::size_t n_;
  fftw_plan plan_;
};

inline double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

/// Triangular filters equally spaced on the HTK mel scale from 0 Hz to Nyquist.
class MelFilterbank {
 public:
  MelFilterbank(std::size_t n_mels, std::size_t fft_size, double sample_rate)
      : weights_(n_mels, std::vector<double>(fft_size / 2 + 1, 0.0)), centers_hz_(n_mels) {
    const double top = hz_to_mel(sample_rate / 2.0);
    const double step = top / static_cast<double>(n_mels + 1);
    for (std::size_t m = 0; m < n_mels; ++m) {
      const double left = step * static_cast<double>(m);
      const double center = left + step;
      const double right = center + step;
      centers_hz_[m] = mel_to_hz(center);
      for (std::size_t k = 0; k < weights_[m].size(); ++k) {
        const double mel = hz_to_mel(static_cast<double>(k) * sample_rate / static_cast<double>(fft_size));
        if (mel > left && mel < center) weights_[m][k] = (mel - left) / (center - left);
        else if (mel >= center && mel < right) weights_[m][k] = (right - mel) / (right - center);
      }
    }
  }

  std::size_t size() const { return weights_.size(); }
  const std::vector<double>& centers_hz() const { return centers_hz_; }

  std::vector<double> apply(std::span<const double> power) const {
    std::vector<double> out(weights_.size(), 0.0);
    for (std::size_t m = 0; m < weights_.size(); ++m)
      for (std::size_t k = 0; k < power.size(); ++k) out[m] += weights_[m][k] * power[k];
    return out;
  }

 private:
  std::vector<std::vector<double>> weights_;
  std::vector<double> centers_hz_;
};

using MelFrame = std::array<double, kNumMels>;

/// Pre-log mel band energies for each windowed frame.
inline std::vector<MelFrame> mel_energies(const std::vector<std::vector<double>>& windows, double sample_rate) {
  std::vector<MelFrame> out;
  if (windows.empty()) return out;
  const PowerSpectrum spectrum(fft_size_for(windows.front().size()));
  const MelFilterbank bank(kNumMels, spectrum.fft_size(), sample_rate);
  out.reserve(windows.size());
  for (const auto& w : windows) {
    const auto bands = bank.apply(spectrum(w));
    MelFrame frame{};
    std::copy(bands.begin(), bands.end(), frame.begin());
    out.push_back(frame);
  }
  return out;
}

inline double floored_log(double x) { return std::log(std::max(x, kLogFloor)); }

inline std::vector<MelFrame> log_mel(const std::vector<MelFrame>& energies) {
  std::vector<MelFrame> out(energies.size());
  for (std::size_t k = 0; k < energies.size(); ++k)
    for (std::size_t m = 0; m < kNumMels; ++m) out[k][m] = floored_log(energies[k][m]);
  return out;
}

inline std::vector<MelFrame> extract_lfbe(const std::vector<std::vector<double>>& windows, double sample_rate) {
  return log_mel(mel_energies(windows, sample_rate));
}

using Triple = std::array<double, 3>;

/// Per frame: log(total / utterance max total), log(low-half share),
/// log(high-half share). Ratios are floored before the log.
inline std::vector<Triple> extract_energy(const std::vector<MelFrame>& energies) {
  constexpr std::size_t half = kNumMels / 2;
  std::vector<double> totals(energies.size(), 0.0);
  double max_total = 0;
  for (std::size_t k = 0; k < energies.size(); ++k) {
    for (double e : energies[k]) totals[k] += e;
    max_total = std::max(max_total, totals[k]);
  }
  std::vector<Triple> out(energies.size());
  for (std::size_t k = 0; k < energies.size(); ++k) {
    double low = 0, high = 0;
    for (std::size_t m = 0; m < half; ++m) low += energies[k][m];
    for (std::size_t m = half; m < kNumMels; ++m) high += energies[k][m];
    const double total = totals[k];
    out[k][0] = floored_log(max_total > 0 ? total / max_total : 0.0);
    out[k][1] = floored_log(total > 0 ? low / total : 0.0);
    out[k][2] = floored_log(total > 0 ? high / total : 0.0);
  }
  return out;
}

}  // namespace pdac::features
