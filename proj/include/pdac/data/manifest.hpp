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

// Manifest files: one utterance per line,
//   utterance_id <TAB> audio path relative to the manifest <TAB> label1|label2|...
// A corpus directory holds train.tsv, validation.tsv and test.tsv.

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "pdac/data/labels.hpp"

namespace pdac::data {

class ManifestError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ManifestEntry {
  std::string id;
  std::filesystem::path audio;  // resolved against the manifest's directory
  std::vector<std::string> raw_labels;

  std::string label() const { return combine_labels(raw_labels); }
};

struct Manifest {
  std::vector<ManifestEntry> entries;
};

namespace detail {

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(s.substr(start, pos - start));
    if (pos == std::string::npos) return out;
    start = pos + 1;
  }
}

}  // namespace detail

/// Parses and validates one split. With `check_audio`, every referenced file
/// must exist.
inline Manifest read_manifest(const std::filesystem::path& path, bool check_audio = true) {
  std::ifstream in(path);
  if (!in) throw ManifestError("cannot open manifest " + path.string());
  const auto base = path.parent_path();
  Manifest m;
  std::set<std::string> seen;
  std::vector<std::string> missing;
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto where = path.string() + ":" + std::to_string(lineno);
    const auto fields = detail::split(line, '\t');
    if (fields.size() != 3) throw ManifestError(where + ": expected 3 tab-separated fields");
    if (fields[0].empty()) throw ManifestError(where + ": empty utterance id");
    if (fields[1].empty()) throw ManifestError(where + ": empty audio path");
    ManifestEntry e{fields[0], base / fields[1], detail::split(fields[2], '|')};
    for (const auto& l : e.raw_labels)
      if (l.empty()) throw ManifestError(where + ": empty label");
    if (!seen.insert(e.id).second) throw ManifestError(where + ": duplicate utterance id '" + e.id + "'");
    if (check_audio && !std::filesystem::exists(e.audio)) missing.push_back(e.id);
    m.entries.push_back(std::move(e));
  }
  if (!missing.empty()) {
    std::string ids;
    for (const auto& id : missing) ids += (ids.empty() ? "" : ", ") + id;
    throw ManifestError(path.string() + ": missing audio for " + ids);
  }
  return m;
}

inline void write_manifest(const std::filesystem::path& path, const Manifest& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ManifestError("cannot write manifest " + path.string());
  const auto base = path.parent_path();
  for (const auto& e : m.entries) {
    out << e.id << '\t' << e.audio.lexically_relative(base).generic_string() << '\t';
    for (std::size_t i = 0; i < e.raw_labels.size(); ++i) out << (i ? "|" : "") << e.raw_labels[i];
    out << '\n';
  }
}

struct Corpus {
  Manifest train, validation, test;
  LabelMap labels;
};

inline LabelMap build_label_map(const Manifest& train) {
  std::vector<std::string> combined;
  for (const auto& e : train.entries) combined.push_back(e.label());
  return LabelMap::from_labels(combined);
}

inline Corpus load_corpus(const std::filesystem::path& dir, bool check_audio = true) {
  Corpus c{read_manifest(dir / "train.tsv", check_audio), read_manifest(dir / "validation.tsv", check_audio),
           read_manifest(dir / "test.tsv", check_audio), {}};
  c.labels = build_label_map(c.train);
  return c;
}

}  // namespace pdac::data
