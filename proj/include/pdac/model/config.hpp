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
#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace pdac::model {

enum class Ablation {
  full,
  baseline,             // LFBE only; no prosody anywhere
  local_concat,         // prosody concatenated to LFBE, gate fixed at 1
  no_local_gate,        // prosody only enters through the global branch
  no_global_gate,       // local gating kept; softmax attention replaces S*G
  global_encoder_only,  // softmax-attention global branch alone
  no_pitch,
  no_energy,
};

inline constexpr std::array<std::pair<Ablation, std::string_view>, 8> kAblationNames{{
    {Ablation::full, "full"},
    {Ablation::baseline, "baseline"},
    {Ablation::local_concat, "local_concat"},
    {Ablation::no_local_gate, "no_local_gate"},
    {Ablation::no_global_gate, "no_global_gate"},
    {Ablation::global_encoder_only, "global_encoder_only"},
    {Ablation::no_pitch, "no_pitch"},
    {Ablation::no_energy, "no_energy"},
}};

inline std::string_view to_string(Ablation a) {
  for (const auto& [mode, name] : kAblationNames)
    if (mode == a) return name;
  return "unknown";
}

inline Ablation parse_ablation(std::string_view name) {
  for (const auto& [mode, n] : kAblationNames)
    if (n == name) return mode;
  std::string valid;
  for (const auto& [mode, n] : kAblationNames) valid += (valid.empty() ? "" : ", ") + std::string(n);
  throw std::invalid_argument("unknown ablation mode '" + std::string(name) + "' (valid: " + valid + ")");
}

enum class LocalFusion { none, concat, gated };
enum class GlobalFusion { none, gated, softmax };

inline LocalFusion local_fusion(Ablation a) {
  switch (a) {
    case Ablation::baseline:
    case Ablation::no_local_gate:
    case Ablation::global_encoder_only: return LocalFusion::none;
    case Ablation::local_concat: return LocalFusion::concat;
    default: return LocalFusion::gated;
  }
}

inline GlobalFusion global_fusion(Ablation a) {
  switch (a) {
    case Ablation::baseline: return GlobalFusion::none;
    case Ablation::no_global_gate:
    case Ablation::global_encoder_only: return GlobalFusion::softmax;
    default: return GlobalFusion::gated;
  }
}

struct ModelConfig {
  std::size_t lfbe_dim = 40;
  std::size_t prosody_in_dim = 6;
  std::size_t prosody_embed_dim = 32;
  std::size_t lstm_layers = 3;
  // Width of each layer's projected output; each direction has half of it.
  std::size_t lstm_hidden = 512;
  std::vector<std::size_t> cnn_kernel_lengths{5, 10, 25, 50};
  std::size_t cnn_filters = 64;
  std::size_t affinity_dim = 128;
  std::size_t n_classes = 2;
  // One W^h/W^v pair for both affinity matrices, or one pair each.
  bool shared_affinity_projection = true;
  Ablation ablation = Ablation::full;

  bool uses_prosody() const { return ablation != Ablation::baseline; }
  std::size_t direction_hidden() const { return lstm_hidden / 2; }
  std::size_t max_kernel() const {
    return *std::max_element(cnn_kernel_lengths.begin(), cnn_kernel_lengths.end());
  }

  void validate() const {
    auto positive = [](std::size_t v, const char* name) {
      if (v == 0) throw std::invalid_argument(std::string(name) + " must be positive");
    };
    positive(lfbe_dim, "lfbe_dim");
    positive(prosody_embed_dim, "prosody_embed_dim");
    positive(lstm_layers, "lstm_layers");
    positive(cnn_filters, "cnn_filters");
    positive(affinity_dim, "affinity_dim");
    positive(n_classes, "n_classes");
    if (prosody_in_dim != 6) throw std::invalid_argument("prosody_in_dim must be 6 (energy + pitch triples)");
    if (lstm_hidden < 2 || lstm_hidden % 2 != 0)
      throw std::invalid_argument("lstm_hidden must be even and at least 2");
    if (cnn_kernel_lengths.empty()) throw std::invalid_argument("cnn_kernel_lengths must be non-empty");
    for (auto k : cnn_kernel_lengths) positive(k, "cnn kernel length");
  }
};

inline ModelConfig ablate(ModelConfig cfg, std::string_view mode) {
  cfg.ablation = parse_ablation(mode);
  return cfg;
}

inline void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = nlohmann::json{{"lfbe_dim", c.lfbe_dim},
                     {"prosody_in_dim", c.prosody_in_dim},
                     {"prosody_embed_dim", c.prosody_embed_dim},
                     {"lstm_layers", c.lstm_layers},
                     {"lstm_hidden", c.lstm_hidden},
                     {"cnn_kernel_lengths", c.cnn_kernel_lengths},
                     {"cnn_filters", c.cnn_filters},
                     {"affinity_dim", c.affinity_dim},
                     {"n_classes", c.n_classes},
                     {"shared_affinity_projection", c.shared_affinity_projection},
                     {"ablation", std::string(to_string(c.ablation))}};
}

inline void from_json(const nlohmann::json& j, ModelConfig& c) {
  c.lfbe_dim = j.at("lfbe_dim").get<std::size_t>();
  c.prosody_in_dim = j.at("prosody_in_dim").get<std::size_t>();
  c.prosody_embed_dim = j.at("prosody_embed_dim").get<std::size_t>();
  c.lstm_layers = j.at("lstm_layers").get<std::size_t>();
  c.lstm_hidden = j.at("lstm_hidden").get<std::size_t>();
  c.cnn_kernel_lengths = j.at("cnn_kernel_lengths").get<std::vector<std::size_t>>();
  c.cnn_filters = j.at("cnn_filters").get<std::size_t>();
  c.affinity_dim = j.at("affinity_dim").get<std::size_t>();
  c.n_classes = j.at("n_classes").get<std::size_t>();
  c.shared_affinity_projection = j.at("shared_affinity_projection").get<bool>();
  c.ablation = parse_ablation(j.at("ablation").get<std::string>());
}

}  // namespace pdac::model
