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

// Checkpoint file: magic, a length-prefixed JSON header (model config, label
// names, LFBE normalization), then named float32 tensors.

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pdac/data/labels.hpp"
#include "pdac/io/binary.hpp"
#include "pdac/model/network.hpp"

namespace pdac::training {

inline constexpr std::string_view kCheckpointMagic{"PDAC-CKPT\x01", 10};

struct NamedTensor {
  std::string name;
  numerics::Tensor<float> value;
};

struct Checkpoint {
  model::ModelConfig config;
  data::LabelMap labels;
  model::Normalizer normalizer;
  std::vector<NamedTensor> tensors;

  template <typename Real>
  static Checkpoint of(const model::Model<Real>& m, const data::LabelMap& labels, const model::Normalizer& norm) {
    Checkpoint c{m.config(), labels, norm, {}};
    for (const auto& p : m.parameters()) c.tensors.push_back({p.name, p.value.template cast<float>()});
    return c;
  }

  /// Copies the stored tensors into `m`, which must have the same parameter
  /// names and shapes.
  template <typename Real>
  void load_into(model::Model<Real>& m) const {
    if (m.parameters().size() != tensors.size())
      throw io::FormatError("checkpoint has " + std::to_string(tensors.size()) + " tensors, model expects " +
                            std::to_string(m.parameters().size()));
    for (const auto& t : tensors) {
      if (!m.has(t.name)) throw io::FormatError("checkpoint tensor '" + t.name + "' is not a model parameter");
      auto& p = m.parameter(t.name);
      if (p.value.shape() != t.value.shape())
        throw io::FormatError("checkpoint tensor '" + t.name + "' has shape " + numerics::shape_string(t.value.shape()) +
                              ", model expects " + numerics::shape_string(p.value.shape()));
      p.value = t.value.template cast<Real>();
    }
  }

  template <typename Real>
  model::Model<Real> make_model() const {
    model::Model<Real> m(config);
    load_into(m);
    return m;
  }
};

inline void to_json(nlohmann::json& j, const model::Normalizer& n) {
  j = nlohmann::json{{"mean", n.mean}, {"stddev", n.stddev}};
}

inline void from_json(const nlohmann::json& j, model::Normalizer& n) {
  n.mean = j.at("mean").get<decltype(n.mean)>();
  n.stddev = j.at("stddev").get<decltype(n.stddev)>();
}

inline void save_checkpoint(const std::string& path, const Checkpoint& c) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path);
  out.write(kCheckpointMagic.data(), static_cast<std::streamsize>(kCheckpointMagic.size()));
  nlohmann::json header{{"model", c.config}, {"labels", c.labels}, {"normalizer", nlohmann::json()}};
  to_json(header["normalizer"], c.normalizer);
  io::write_string(out, header.dump());
  io::write_u32(out, static_cast<std::uint32_t>(c.tensors.size()));
  for (const auto& t : c.tensors) {
    io::write_string(out, t.name);
    io::write_u32(out, static_cast<std::uint32_t>(t.value.rows()));
    io::write_u32(out, static_cast<std::uint32_t>(t.value.cols()));
    for (float v : t.value.data()) io::write_f32(out, v);
  }
  if (!out) throw std::runtime_error("failed writing checkpoint " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path);
  io::expect_magic(in, kCheckpointMagic);
  Checkpoint c;
  try {
    const auto header = nlohmann::json::parse(io::read_string(in, "checkpoint header"));
    c.config = header.at("model").get<model::ModelConfig>();
    c.labels = header.at("labels").get<data::LabelMap>();
    from_json(header.at("normalizer"), c.normalizer);
  } catch (const nlohmann::json::exception& e) {
    throw io::FormatError(std::string("bad checkpoint header: ") + e.what());
  }
  const auto count = io::read_u32(in, "tensor count");
  for (std::uint32_t k = 0; k < count; ++k) {
    NamedTensor t;
    t.name = io::read_string(in, "tensor name");
    const auto rows = io::read_u32(in, "tensor shape");
    const auto cols = io::read_u32(in, "tensor shape");
    t.value = numerics::Tensor<float>(rows, cols);
    for (auto& v : t.value.data()) v = io::read_f32(in, "tensor data");
    c.tensors.push_back(std::move(t));
  }
  if (in.peek() != std::char_traits<char>::eof()) throw io::FormatError("trailing bytes after checkpoint tensors");
  return c;
}

}  // namespace pdac::training
