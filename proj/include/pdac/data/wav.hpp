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

// 16-bit PCM mono RIFF/WAVE reading and writing.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>

#include "pdac/features/frontend.hpp"
#include "pdac/io/binary.hpp"

namespace pdac::data {

namespace detail {

inline void write_u16(std::ostream& out, std::uint16_t v) {
  const char b[2] = {static_cast<char>(v & 0xff), static_cast<char>(v >> 8)};
  out.write(b, 2);
}

inline std::uint16_t read_u16(std::istream& in) {
  unsigned char b[2];
  io::read_exact(in, reinterpret_cast<char*>(b), 2, "wav header");
  return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

}  // namespace detail

inline std::int16_t to_pcm16(double s) {
  return static_cast<std::int16_t>(std::clamp(std::lround(s * 32767.0), -32768L, 32767L));
}

inline void write_wav(const std::string& path, const features::Waveform& wave) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  const auto rate = static_cast<std::uint32_t>(wave.sample_rate);
  const auto bytes = static_cast<std::uint32_t>(wave.samples.size() * 2);
  out.write("RIFF", 4);
  io::write_u32(out, 36 + bytes);
  out.write("WAVEfmt ", 8);
  io::write_u32(out, 16);
  detail::write_u16(out, 1);  // PCM
  detail::write_u16(out, 1);  // mono
  io::write_u32(out, rate);
  io::write_u32(out, rate * 2);
  detail::write_u16(out, 2);
  detail::write_u16(out, 16);
  out.write("data", 4);
  io::write_u32(out, bytes);
  for (double s : wave.samples) detail::write_u16(out, static_cast<std::uint16_t>(to_pcm16(s)));
  if (!out) throw std::runtime_error("failed writing " + path);
}

inline features::Waveform read_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  char tag[4];
  io::read_exact(in, tag, 4, "wav header");
  if (std::string(tag, 4) != "RIFF") throw io::FormatError(path + ": not a RIFF file");
  io::read_u32(in, "wav header");
  io::read_exact(in, tag, 4, "wav header");
  if (std::string(tag, 4) != "WAVE") throw io::FormatError(path + ": not a WAVE file");

  features::Waveform wave;
  bool have_fmt = false;
  while (true) {
    io::read_exact(in, tag, 4, "wav chunk");
    const std::string id(tag, 4);
    const std::uint32_t size = io::read_u32(in, "wav chunk");
    if (id == "fmt ") {
      const auto format = detail::read_u16(in);
      const auto channels = detail::read_u16(in);
      const auto rate = io::read_u32(in, "wav fmt");
      io::read_u32(in, "wav fmt");
      detail::read_u16(in);
      const auto bits = detail::read_u16(in);
      if (format != 1 || channels != 1 || bits != 16)
        throw io::FormatError(path + ": only 16-bit PCM mono WAV is supported");
      wave.sample_rate = rate;
      in.ignore(size - 16 + (size & 1));
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw io::FormatError(path + ": data chunk before fmt chunk");
      wave.samples.resize(size / 2);
      for (auto& s : wave.samples) s = static_cast<std::int16_t>(detail::read_u16(in)) / 32768.0;
      return wave;
    } else {
      in.ignore(size + (size & 1));
    }
  }
}

}  // namespace pdac::data
