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

// Feature cache: "PDAC-FEAT\x01" followed by one record per utterance:
// u32 id length, UTF-8 id, u32 frame count t, then t*40 LFBE, t*3 energy and
// t*3 pitch values as little-endian float32, each stream frame-major.

#include <cstdint>
#include <fstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "pdac/features/features.hpp"
#include "pdac/io/binary.hpp"

namespace pdac::features {

inline constexpr std::string_view kFeatureMagic{"PDAC-FEAT\x01", 10};

struct CachedUtterance {
  std::string id;
  FeatureSequence features;
};

inline void write_feature_record(std::ostream& out, const std::string& id, const FeatureSequence& seq) {
  io::write_string(out, id);
  io::write_u32(out, static_cast<std::uint32_t>(seq.size()));
  for (const auto& f : seq.frames)
    for (double v : f.lfbe) io::write_f32(out, static_cast<float>(v));
  for (const auto& f : seq.frames)
    for (double v : f.energy) io::write_f32(out, static_cast<float>(v));
  for (const auto& f : seq.frames)
    for (double v : f.pitch) io::write_f32(out, static_cast<float>(v));
}

inline void write_feature_cache(const std::string& path, const std::vector<CachedUtterance>& records) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write feature cache " + path);
  out.write(kFeatureMagic.data(), static_cast<std::streamsize>(kFeatureMagic.size()));
  for (const auto& r : records) write_feature_record(out, r.id, r.features);
  if (!out) throw std::runtime_error("failed writing feature cache " + path);
}

inline std::vector<CachedUtterance> read_feature_cache(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open feature cache " + path);
  io::expect_magic(in, kFeatureMagic);
  std::vector<CachedUtterance> records;
  while (in.peek() != std::char_traits<char>::eof()) {
    CachedUtterance r;
    r.id = io::read_string(in, "utterance id");
    const auto t = io::read_u32(in, "frame count");
    r.features.frames.resize(t);
    for (auto& f : r.features.frames)
      for (double& v : f.lfbe) v = io::read_f32(in, "LFBE stream");
    for (auto& f : r.features.frames)
      for (double& v : f.energy) v = io::read_f32(in, "energy stream");
    for (auto& f : r.features.frames)
      for (double& v : f.pitch) v = io::read_f32(in, "pitch stream");
    records.push_back(std::move(r));
  }
  return records;
}

}  // namespace pdac::features
