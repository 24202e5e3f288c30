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

// Flat key/value configuration shared by the training subcommands. Layers:
// defaults, then a JSON file, then --set key=value overrides.

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pdac/model/config.hpp"
#include "pdac/training/trainer.hpp"

namespace pdac::cli {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  model::ModelConfig model;
  training::TrainConfig train;
  std::string feature_cache;  // optional feature cache consulted before audio
};

inline nlohmann::json to_flat_json(const RunConfig& c) {
  nlohmann::json j = c.model;
  // Fixed by the feature frontend or derived from the data.
  j.erase("lfbe_dim");
  j.erase("prosody_in_dim");
  j.erase("n_classes");
  const nlohmann::json t = c.train;
  j.update(t);
  j.erase("checkpoint_dir");  // set by the subcommand's --out
  j["feature_cache"] = c.feature_cache;
  return j;
}

inline std::vector<std::string> valid_keys() {
  std::vector<std::string> keys;
  const auto defaults = to_flat_json(RunConfig{});
  for (const auto& [k, v] : defaults.items()) keys.push_back(k);
  return keys;
}

inline std::string valid_keys_text() {
  std::string s;
  for (const auto& k : valid_keys()) s += (s.empty() ? "" : ", ") + k;
  return s;
}

inline RunConfig from_flat_json(const nlohmann::json& j) {
  RunConfig c;
  try {
    auto m = nlohmann::json(c.model);
    for (const auto& [k, v] : m.items())
      if (j.contains(k)) m[k] = j[k];
    c.model = m.get<model::ModelConfig>();
    auto& t = c.train;
    t.lr = j.at("lr").get<double>();
    t.batch_size = j.at("batch_size").get<std::size_t>();
    t.epochs = j.at("epochs").get<std::size_t>();
    t.seed = j.at("seed").get<std::uint64_t>();
    t.runs = j.at("runs").get<std::size_t>();
    t.clip_norm = j.at("clip_norm").get<double>();
    t.track_train_accuracy = j.at("track_train_accuracy").get<bool>();
    const auto precision = j.at("precision").get<std::string>();
    if (precision != "float32" && precision != "float64")
      throw ConfigError("precision must be float32 or float64, got '" + precision + "'");
    t.double_precision = precision == "float64";
    c.feature_cache = j.at("feature_cache").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad configuration value: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return c;
}

/// Applies every key of `patch`; unknown keys are rejected.
inline RunConfig apply_patch(const RunConfig& base, const nlohmann::json& patch) {
  if (!patch.is_object()) throw ConfigError("configuration must be a JSON object");
  auto j = to_flat_json(base);
  for (const auto& [k, v] : patch.items()) {
    if (!j.contains(k)) throw ConfigError("unknown configuration key '" + k + "' (valid keys: " + valid_keys_text() + ")");
    j[k] = v;
  }
  return from_flat_json(j);
}

inline RunConfig apply_file(const RunConfig& base, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  try {
    return apply_patch(base, nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

/// "key=value"; the value is read as JSON when it parses and as a plain
/// string otherwise, so both epochs=5 and ablation=baseline work.
inline RunConfig apply_override(const RunConfig& base, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override must look like key=value: '" + assignment + "'");
  const auto key = assignment.substr(0, eq);
  const auto text = assignment.substr(eq + 1);
  nlohmann::json value = nlohmann::json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  return apply_patch(base, nlohmann::json{{key, value}});
}

}  // namespace pdac::cli
