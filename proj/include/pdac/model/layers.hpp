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

// Building blocks of the prosody-gated classifier, as functions over tape
// variables. Sequence inputs use the batched time-major layout of ops.hpp.

#include <algorithm>
#include <cstddef>
#include <vector>

#include "pdac/numerics/ops.hpp"

namespace pdac::model {

using numerics::Tape;
using numerics::Tensor;
using numerics::Var;

/// p_i = ReLU(W_ec [e_i; c_i] + b)
template <typename Real>
Var<Real> prosody_embed(Var<Real> energy_pitch, Var<Real> weight, Var<Real> bias) {
  return numerics::relu(numerics::affine(energy_pitch, weight, bias));
}

/// W_p p_i + W_l l_i + (W_lp l_i) * p_i + b, before the sigmoid.
template <typename Real>
Var<Real> local_gate_preactivation(Var<Real> p, Var<Real> lfbe, Var<Real> w_p, Var<Real> w_l, Var<Real> w_lp,
                                   Var<Real> bias) {
  using namespace numerics;
  auto linear = add(add(matmul(p, w_p), matmul(lfbe, w_l)), bias);
  return add(linear, mul(matmul(lfbe, w_lp), p));
}

template <typename Real>
Var<Real> local_gate(Var<Real> p, Var<Real> lfbe, Var<Real> w_p, Var<Real> w_l, Var<Real> w_lp, Var<Real> bias) {
  return numerics::sigmoid(local_gate_preactivation(p, lfbe, w_p, w_l, w_lp, bias));
}

/// a_i = [beta_i * p_i ; l_i]
template <typename Real>
Var<Real> local_fuse(Var<Real> beta, Var<Real> p, Var<Real> lfbe) {
  return numerics::concat<Real>({numerics::mul(beta, p), lfbe}, 1);
}

template <typename Real>
struct LstmVars {
  Var<Real> input_weight;      // in x 4H
  Var<Real> recurrent_weight;  // H x 4H
  Var<Real> bias;              // 1 x 4H
};

template <typename Real>
struct EncoderLayerVars {
  LstmVars<Real> forward;
  LstmVars<Real> backward;
  Var<Real> proj_weight;  // 2H x hidden
  Var<Real> proj_bias;
};

namespace detail {

// One direction over all steps. Steps past an utterance's length leave its
// state untouched, so the reverse pass starts from zeros at the true end.
template <typename Real>
std::vector<Var<Real>> run_direction(Var<Real> input, const LstmVars<Real>& w, std::size_t batch,
                                     const std::vector<std::size_t>& lengths, bool reverse) {
  using namespace numerics;
  Tape<Real>& tape = *input.tape;
  const std::size_t steps = input.rows() / batch;
  const std::size_t hd = w.recurrent_weight.rows();
  auto projected = affine(input, w.input_weight, w.bias);
  LstmState<Real> state{tape.constant(Tensor<Real>(batch, hd)), tape.constant(Tensor<Real>(batch, hd))};
  std::vector<Var<Real>> outputs(steps);
  for (std::size_t n = 0; n < steps; ++n) {
    const std::size_t i = reverse ? steps - 1 - n : n;
    auto next = lstm_cell(slice_rows(projected, i * batch, batch), state, w.recurrent_weight);
    std::vector<bool> keep(batch);
    bool all = true;
    for (std::size_t b = 0; b < batch; ++b) all = (keep[b] = i < lengths[b]) && all;
    if (all) {
      state = next;
    } else {
      state = {select_rows(next.h, state.h, keep), select_rows(next.c, state.c, keep)};
    }
    outputs[i] = state.h;
  }
  return outputs;
}

}  // namespace detail

/// Stacked bidirectional LSTM; each layer's two directions are concatenated
/// and projected back to the layer width.
template <typename Real>
Var<Real> encode_acoustic(Var<Real> input, const std::vector<EncoderLayerVars<Real>>& layers, std::size_t batch,
                          const std::vector<std::size_t>& lengths) {
  using namespace numerics;
  Var<Real> x = input;
  for (const auto& layer : layers) {
    auto fw = concat(detail::run_direction(x, layer.forward, batch, lengths, false), 0);
    auto bw = concat(detail::run_direction(x, layer.backward, batch, lengths, true), 0);
    x = affine(concat<Real>({fw, bw}, 1), layer.proj_weight, layer.proj_bias);
  }
  return x;
}

template <typename Real>
struct ConvVars {
  std::size_t kernel = 0;
  Var<Real> weight;  // kernel*d_p x filters
  Var<Real> bias;
};

/// Multi-width convolution over time with ReLU and max-over-time pooling.
/// Returns V with row j*B + b holding kernel j's pooled filters for
/// utterance b. Utterances shorter than a kernel are zero-padded to it; the
/// rows of `prosody` past each length must already be zero.
template <typename Real>
Var<Real> global_prosody_cnn(Var<Real> prosody, const std::vector<ConvVars<Real>>& convs, std::size_t batch,
                             const std::vector<std::size_t>& lengths) {
  using namespace numerics;
  const std::size_t steps = prosody.rows() / batch;
  std::size_t widest = 0;
  for (const auto& c : convs) widest = std::max(widest, c.kernel);
  auto padded = pad_rows(prosody, steps < widest ? (widest - steps) * batch : 0);
  std::vector<Var<Real>> rows;
  for (const auto& c : convs) {
    std::vector<std::size_t> positions(batch);
    for (std::size_t b = 0; b < batch; ++b) positions[b] = lengths[b] >= c.kernel ? lengths[b] - c.kernel + 1 : 1;
    auto response = relu(affine(unfold_time(padded, batch, c.kernel), c.weight, c.bias));
    rows.push_back(max_pool_over_time(response, batch, positions));
  }
  return concat(rows, 0);
}

/// A^(s) - mean(A^(s)) with A^(s)_ij = h'_i . v'_j
template <typename Real>
Var<Real> centered_similarity(Var<Real> h_proj, Var<Real> v_proj, std::size_t batch,
                              const std::vector<std::size_t>& lengths) {
  return numerics::center_per_utterance(numerics::pairwise_dot(h_proj, v_proj, batch), batch, lengths);
}

/// A^(d) - mean(A^(d)) with A^(d)_ij = -|h'_i - v'_j|_1
template <typename Real>
Var<Real> centered_dissimilarity(Var<Real> h_proj, Var<Real> v_proj, std::size_t batch,
                                 const std::vector<std::size_t>& lengths) {
  using namespace numerics;
  return center_per_utterance(scale(l1_pairwise_distance(h_proj, v_proj, batch), Real(-1)), batch, lengths);
}

/// S = tanh(A^(s) - mean(A^(s)))
template <typename Real>
Var<Real> global_similarity(Var<Real> h_proj, Var<Real> v_proj, std::size_t batch,
                            const std::vector<std::size_t>& lengths) {
  return numerics::tanh(centered_similarity(h_proj, v_proj, batch, lengths));
}

/// G = sigmoid(A^(d) - mean(A^(d)))
template <typename Real>
Var<Real> global_gate(Var<Real> h_proj, Var<Real> v_proj, std::size_t batch, const std::vector<std::size_t>& lengths) {
  return numerics::sigmoid(centered_dissimilarity(h_proj, v_proj, batch, lengths));
}

/// f = max-pool over time of [H ; W V], where W is S*G or an attention map.
template <typename Real>
Var<Real> global_fuse(Var<Real> encoded, Var<Real> weights, Var<Real> v, std::size_t batch,
                      const std::vector<std::size_t>& lengths) {
  using namespace numerics;
  auto fused = concat<Real>({encoded, attend(weights, v, batch)}, 1);
  return max_pool_over_time(fused, batch, lengths);
}

template <typename Real>
Var<Real> classify_logits(Var<Real> pooled, Var<Real> weight, Var<Real> bias) {
  return numerics::affine(pooled, weight, bias);
}

template <typename Real>
Var<Real> classify(Var<Real> pooled, Var<Real> weight, Var<Real> bias) {
  return numerics::softmax(classify_logits(pooled, weight, bias));
}

}  // namespace pdac::model
