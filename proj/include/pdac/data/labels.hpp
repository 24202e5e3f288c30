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
#include <cstddef>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace pdac::data {

inline constexpr const char* kUnknownLabel = "<unk>";

/// Canonical single label for an utterance tagged with one or more dialogue
/// acts: the acts sorted and joined with '+'.
inline std::string combine_labels(std::vector<std::string> raw) {
  if (raw.empty()) throw std::invalid_argument("combine_labels: utterance has no labels");
  std::sort(raw.begin(), raw.end());
  std::string out;
  for (const auto& l : raw) {
    if (l.empty()) throw std::invalid_argument("combine_labels: empty label");
    if (!out.empty()) out += '+';
    out += l;
  }
  return out;
}

/// Combined label to class index, built from training labels only. Labels
/// never seen in training map to unknown(), one past the last class.
class LabelMap {
 public:
  LabelMap() = default;

  template <typename Range>
  static LabelMap from_labels(const Range& combined) {
    std::set<std::string> sorted(std::begin(combined), std::end(combined));
    LabelMap m;
    m.names_.assign(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < m.names_.size(); ++i) m.index_.emplace(m.names_[i], i);
    return m;
  }

  std::size_t size() const { return names_.size(); }
  std::size_t unknown() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }

  std::size_t index(const std::string& combined) const {
    auto it = index_.find(combined);
    return it == index_.end() ? unknown() : it->second;
  }

  const std::string& name(std::size_t idx) const {
    static const std::string unk = kUnknownLabel;
    return idx < names_.size() ? names_[idx] : unk;
  }

  friend bool operator==(const LabelMap& a, const LabelMap& b) { return a.names_ == b.names_; }

  friend void to_json(nlohmann::json& j, const LabelMap& m) { j = m.names_; }
  friend void from_json(const nlohmann::json& j, LabelMap& m) {
    m = from_labels(j.get<std::vector<std::string>>());
    if (m.size() != j.size()) throw std::invalid_argument("label map has duplicate entries");
  }

 private:
  std::vector<std::string> names_;
  std::map<std::string, std::size_t> index_;
};

}  // namespace pdac::data
