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

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "pdac/model/config.hpp"
#include "pdac/model/inputs.hpp"
#include "pdac/model/layers.hpp"
#include "pdac/numerics/tape.hpp"

namespace pdac::model {

using numerics::Parameter;

/// Gate activity of one utterance, trimmed to its true length.
struct GateTrace {
  std::string id;
  std::optional<numerics::Tensor<double>> local_beta;  // len x d_p
  numerics::Tensor<double> global_score;                // len x m, S*G or attention weights
  numerics::Tensor<double> similarity;                  // S
  numerics::Tensor<double> gate;                        // G
  double centered_similarity_mean = 0;
  double centered_dissimilarity_mean = 0;
};

struct ForwardOptions {
  bool trace = false;
  // Replace a gate's pre-activation everywhere with this constant.
  std::optional<double> local_gate_preactivation{};
  std::optional<double> global_gate_preactivation{};
};

template <typename Real>
struct ForwardResult {
  Var<Real> logits;
  std::vector<GateTrace> traces;
};

template <typename Real>
class Model {
 public:
  explicit Model(ModelConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    build();
  }

  const ModelConfig& config() const { return cfg_; }
  std::vector<Parameter<Real>>& parameters() { return params_; }
  const std::vector<Parameter<Real>>& parameters() const { return params_; }

  bool has(const std::string& name) const { return index_.contains(name); }
  Parameter<Real>& parameter(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::out_of_range("no parameter named '" + name + "'");
    return params_[it->second];
  }
  const Parameter<Real>& parameter(const std::string& name) const {
    return const_cast<Model&>(*this).parameter(name);
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.value.size();
    return n;
  }

  /// Glorot-uniform weights, zero biases, forget-gate biases at 1.
  void init(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    for (auto& p : params_) {
      p.zero_grad();
      if (is_bias(p.name)) {
        p.value.fill(Real(0));
        if (p.name.find(".fw.") != std::string::npos || p.name.find(".bw.") != std::string::npos) {
          const std::size_t h = p.value.cols() / 4;
          for (std::size_t c = h; c < 2 * h; ++c) p.value(0, c) = Real(1);
        }
        continue;
      }
      const double limit = std::sqrt(6.0 / static_cast<double>(p.value.rows() + p.value.cols()));
      std::uniform_real_distribution<double> u(-limit, limit);
      for (auto& v : p.value.data()) v = static_cast<Real>(u(rng));
    }
  }

  ForwardResult<Real> forward(Tape<Real>& tape, const Batch<Real>& batch, const ForwardOptions& opt = {}) {
    using namespace numerics;
    const std::size_t B = batch.size;
    const auto& len = batch.lengths;
    std::vector<bool> valid(batch.steps * B);
    for (std::size_t i = 0; i < batch.steps; ++i)
      for (std::size_t b = 0; b < B; ++b) valid[i * B + b] = i < len[b];

    auto p = [&](const std::string& name) { return tape.param(parameter(name)); };
    auto lfbe = tape.constant(batch.lfbe);
    const auto lmode = local_fusion(cfg_.ablation);
    const auto gmode = global_fusion(cfg_.ablation);

    std::optional<Var<Real>> prosody;
    if (cfg_.uses_prosody()) {
      Tensor<Real> raw = batch.prosody;
      const std::size_t from = cfg_.ablation == Ablation::no_pitch ? 3 : 0;
      if (cfg_.ablation == Ablation::no_pitch || cfg_.ablation == Ablation::no_energy)
        for (std::size_t r = 0; r < raw.rows(); ++r)
          for (std::size_t c = from; c < from + 3; ++c) raw(r, c) = Real(0);
      prosody = mask_rows(prosody_embed(tape.constant(std::move(raw)), p("prosody.W_ec"), p("prosody.b_ec")), valid);
    }

    ForwardResult<Real> result;
    if (opt.trace) {
      result.traces.resize(B);
      for (std::size_t b = 0; b < B; ++b) result.traces[b].id = b < batch.ids.size() ? batch.ids[b] : "";
    }

    Var<Real> encoder_in = lfbe;
    if (lmode == LocalFusion::concat) {
      encoder_in = concat<Real>({*prosody, lfbe}, 1);
      if (opt.trace)
        for (std::size_t b = 0; b < B; ++b)
          result.traces[b].local_beta = numerics::Tensor<double>(len[b], cfg_.prosody_embed_dim, 1.0);
    } else if (lmode == LocalFusion::gated) {
      Var<Real> beta;
      if (opt.local_gate_preactivation) {
        Tensor<Real> pre(prosody->rows(), prosody->cols(), static_cast<Real>(*opt.local_gate_preactivation));
        beta = sigmoid(tape.constant(std::move(pre)));
      } else {
        beta = local_gate(*prosody, lfbe, p("local.W_p"), p("local.W_l"), p("local.W_lp"), p("local.b"));
      }
      encoder_in = local_fuse(beta, *prosody, lfbe);
      if (opt.trace)
        for (std::size_t b = 0; b < B; ++b) result.traces[b].local_beta = utterance_rows(beta.value(), B, b, len[b]);
    }

    std::vector<EncoderLayerVars<Real>> layers;
    for (std::size_t l = 0; l < cfg_.lstm_layers; ++l) {
      const std::string pre = "encoder.l" + std::to_string(l) + ".";
      auto dir = [&](const std::string& d) {
        return LstmVars<Real>{p(pre + d + ".W_x"), p(pre + d + ".W_h"), p(pre + d + ".b")};
      };
      layers.push_back({dir("fw"), dir("bw"), p(pre + "W_o"), p(pre + "b_o")});
    }
    auto encoded = encode_acoustic(encoder_in, layers, B, len);

    Var<Real> pooled;
    if (gmode == GlobalFusion::none) {
      pooled = max_pool_over_time(encoded, B, len);
    } else {
      std::vector<ConvVars<Real>> convs;
      for (auto k : cfg_.cnn_kernel_lengths) {
        const std::string pre = "cnn.k" + std::to_string(k) + ".";
        convs.push_back({k, p(pre + "W"), p(pre + "b")});
      }
      auto v = global_prosody_cnn(*prosody, convs, B, len);
      auto h_sim = affine(encoded, p("global.W_h"), p("global.b_h"));
      auto v_sim = affine(v, p("global.W_v"), p("global.b_v"));
      auto a_sim = centered_similarity(h_sim, v_sim, B, len);
      Var<Real> weights, s, g;
      std::optional<Var<Real>> a_dis;
      if (gmode == GlobalFusion::softmax) {
        weights = softmax(a_sim);
      } else {
        s = tanh(a_sim);
        if (opt.global_gate_preactivation) {
          Tensor<Real> pre(a_sim.rows(), a_sim.cols(), static_cast<Real>(*opt.global_gate_preactivation));
          g = sigmoid(tape.constant(std::move(pre)));
        } else {
          const bool shared = cfg_.shared_affinity_projection;
          auto h_dis = shared ? h_sim : affine(encoded, p("global.dis.W_h"), p("global.dis.b_h"));
          auto v_dis = shared ? v_sim : affine(v, p("global.dis.W_v"), p("global.dis.b_v"));
          a_dis = centered_dissimilarity(h_dis, v_dis, B, len);
          g = sigmoid(*a_dis);
        }
        weights = mul(s, g);
      }
      if (opt.trace) {
        for (std::size_t b = 0; b < B; ++b) {
          auto& t = result.traces[b];
          t.global_score = utterance_rows(weights.value(), B, b, len[b]);
          t.centered_similarity_mean = utterance_mean(a_sim.value(), B, b, len[b]);
          if (gmode == GlobalFusion::gated) {
            t.similarity = utterance_rows(s.value(), B, b, len[b]);
            t.gate = utterance_rows(g.value(), B, b, len[b]);
            if (a_dis) t.centered_dissimilarity_mean = utterance_mean(a_dis->value(), B, b, len[b]);
          }
        }
      }
      pooled = global_fuse(encoded, weights, v, B, len);
    }
    result.logits = classify_logits(pooled, p("classifier.W_f"), p("classifier.b_f"));
    return result;
  }

 private:
  static bool is_bias(const std::string& name) {
    const auto dot = name.rfind('.');
    return name.compare(dot + 1, 1, "b") == 0;
  }

  static numerics::Tensor<double> utterance_rows(const numerics::Tensor<Real>& a, std::size_t batch, std::size_t b,
                                                 std::size_t len) {
    numerics::Tensor<double> out(len, a.cols());
    for (std::size_t i = 0; i < len; ++i)
      for (std::size_t c = 0; c < a.cols(); ++c) out(i, c) = static_cast<double>(a(i * batch + b, c));
    return out;
  }

  static double utterance_mean(const numerics::Tensor<Real>& a, std::size_t batch, std::size_t b, std::size_t len) {
    double s = 0;
    for (std::size_t i = 0; i < len; ++i)
      for (std::size_t c = 0; c < a.cols(); ++c) s += static_cast<double>(a(i * batch + b, c));
    return s / static_cast<double>(len * a.cols());
  }

  void add(const std::string& name, std::size_t rows, std::size_t cols) {
    index_.emplace(name, params_.size());
    params_.emplace_back(name, numerics::Tensor<Real>(rows, cols));
  }

  void build() {
    const auto lmode = local_fusion(cfg_.ablation);
    const auto gmode = global_fusion(cfg_.ablation);
    const std::size_t dp = cfg_.prosody_embed_dim, nl = cfg_.lfbe_dim;
    if (cfg_.uses_prosody()) {
      add("prosody.W_ec", cfg_.prosody_in_dim, dp);
      add("prosody.b_ec", 1, dp);
    }
    if (lmode == LocalFusion::gated) {
      add("local.W_p", dp, dp);
      add("local.W_l", nl, dp);
      add("local.W_lp", nl, dp);
      add("local.b", 1, dp);
    }
    const std::size_t hd = cfg_.direction_hidden();
    std::size_t in = lmode == LocalFusion::none ? nl : nl + dp;
    for (std::size_t l = 0; l < cfg_.lstm_layers; ++l) {
      const std::string pre = "encoder.l" + std::to_string(l) + ".";
      for (const char* d : {"fw", "bw"}) {
        add(pre + d + ".W_x", in, 4 * hd);
        add(pre + d + ".W_h", hd, 4 * hd);
        add(pre + d + ".b", 1, 4 * hd);
      }
      add(pre + "W_o", 2 * hd, cfg_.lstm_hidden);
      add(pre + "b_o", 1, cfg_.lstm_hidden);
      in = cfg_.lstm_hidden;
    }
    std::size_t pooled = cfg_.lstm_hidden;
    if (gmode != GlobalFusion::none) {
      for (auto k : cfg_.cnn_kernel_lengths) {
        const std::string pre = "cnn.k" + std::to_string(k) + ".";
        if (has(pre + "W")) throw std::invalid_argument("duplicate cnn kernel length " + std::to_string(k));
        add(pre + "W", k * dp, cfg_.cnn_filters);
        add(pre + "b", 1, cfg_.cnn_filters);
      }
      add("global.W_h", cfg_.lstm_hidden, cfg_.affinity_dim);
      add("global.b_h", 1, cfg_.affinity_dim);
      add("global.W_v", cfg_.cnn_filters, cfg_.affinity_dim);
      add("global.b_v", 1, cfg_.affinity_dim);
      if (gmode == GlobalFusion::gated && !cfg_.shared_affinity_projection) {
        add("global.dis.W_h", cfg_.lstm_hidden, cfg_.affinity_dim);
        add("global.dis.b_h", 1, cfg_.affinity_dim);
        add("global.dis.W_v", cfg_.cnn_filters, cfg_.affinity_dim);
        add("global.dis.b_v", 1, cfg_.affinity_dim);
      }
      pooled += cfg_.cnn_filters;
    }
    add("classifier.W_f", pooled, cfg_.n_classes);
    add("classifier.b_f", 1, cfg_.n_classes);
  }

  ModelConfig cfg_;
  std::vector<Parameter<Real>> params_;
  std::map<std::string, std::size_t> index_;
};

}  // namespace pdac::model
