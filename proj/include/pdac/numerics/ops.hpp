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

// Differentiable operations over Tape variables. Matrices are row-major;
// sequence tensors for a batch of B utterances are laid out time-major with
// row index i*B + b for time step i of utterance b.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <string>
#include <type_traits>
#include <vector>

#include <cblas.h>

#include "pdac/numerics/tape.hpp"
#include "pdac/numerics/tensor.hpp"

namespace pdac::numerics {

namespace detail {

inline void require(bool ok, const char* op, const Shape& a, const Shape& b) {
  if (!ok) throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a) + " vs " +
                            shape_string(b));
}

template <typename Real>
Real sigmoid(Real x) {
  if (x >= 0) return Real(1) / (Real(1) + std::exp(-x));
  Real e = std::exp(x);
  return e / (Real(1) + e);
}

template <typename Real>
void add_into(Tensor<Real>* dst, const Tensor<Real>& src) {
  if (!dst) return;
  auto d = dst->data();
  auto s = src.data();
  for (std::size_t k = 0; k < d.size(); ++k) d[k] += s[k];
}

inline void single_threaded_blas() {
  static const bool once = [] {
    openblas_set_num_threads(1);
    return true;
  }();
  (void)once;
}

// c += op(a) * op(b) with row-major storage.
template <typename Real>
void gemm(bool ta, bool tb, std::size_t n, std::size_t m, std::size_t k, const Real* a, std::size_t lda,
          const Real* b, std::size_t ldb, Real* c) {
  if (n == 0 || m == 0 || k == 0) return;
  single_threaded_blas();
  const auto ot = ta ? CblasTrans : CblasNoTrans;
  const auto bt = tb ? CblasTrans : CblasNoTrans;
  const auto N = static_cast<blasint>(n), M = static_cast<blasint>(m), K = static_cast<blasint>(k);
  if constexpr (std::is_same_v<Real, float>) {
    cblas_sgemm(CblasRowMajor, ot, bt, N, M, K, 1.0f, a, static_cast<blasint>(lda), b, static_cast<blasint>(ldb),
                1.0f, c, M);
  } else {
    static_assert(std::is_same_v<Real, double>, "tensors hold float or double");
    cblas_dgemm(CblasRowMajor, ot, bt, N, M, K, 1.0, a, static_cast<blasint>(lda), b, static_cast<blasint>(ldb), 1.0,
                c, M);
  }
}

// c += a * b
template <typename Real>
void gemm_nn(const Tensor<Real>& a, const Tensor<Real>& b, Tensor<Real>& c) {
  gemm(false, false, a.rows(), b.cols(), a.cols(), a.data().data(), a.cols(), b.data().data(), b.cols(),
       c.data().data());
}

// c += a * b^T
template <typename Real>
void gemm_nt(const Tensor<Real>& a, const Tensor<Real>& b, Tensor<Real>& c) {
  gemm(false, true, a.rows(), b.rows(), a.cols(), a.data().data(), a.cols(), b.data().data(), b.cols(),
       c.data().data());
}

// c += a^T * b
template <typename Real>
void gemm_tn(const Tensor<Real>& a, const Tensor<Real>& b, Tensor<Real>& c) {
  gemm(true, false, a.cols(), b.cols(), a.rows(), a.data().data(), a.cols(), b.data().data(), b.cols(),
       c.data().data());
}


}  // namespace detail

template <typename Real>
Var<Real> matmul(Var<Real> a, Var<Real> b) {
  const auto& av = a.value();
  const auto& bv = b.value();
  detail::require(av.rank() == 2 && bv.rank() == 2 && av.cols() == bv.rows(), "matmul", av.shape(),
                  bv.shape());
  Tensor<Real> out(av.rows(), bv.cols());
  detail::gemm_nn(av, bv, out);
  return a.tape->record(std::move(out), {a, b},
                        [a, b](Tape<Real>& t, const Tensor<Real>& g) {
                          if (auto* ga = t.accumulate(a)) detail::gemm_nt(g, t.value(b), *ga);
                          if (auto* gb = t.accumulate(b)) detail::gemm_tn(t.value(a), g, *gb);
                        },
                        "matmul");
}

/// Elementwise sum. `b` may also be a 1 x cols row broadcast over every row of `a`.
template <typename Real>
Var<Real> add(Var<Real> a, Var<Real> b) {
  const auto& av = a.value();
  const auto& bv = b.value();
  const bool same = av.shape() == bv.shape();
  const bool bcast = !same && av.rank() == 2 && bv.rank() == 2 && bv.rows() == 1 &&
                     bv.cols() == av.cols();
  detail::require(same || bcast, "add", av.shape(), bv.shape());
  Tensor<Real> out = av;
  if (same) {
    detail::add_into(&out, bv);
  } else {
    for (std::size_t r = 0; r < av.rows(); ++r)
      for (std::size_t c = 0; c < av.cols(); ++c) out(r, c) += bv(0, c);
  }
  return a.tape->record(std::move(out), {a, b},
                        [a, b, same](Tape<Real>& t, const Tensor<Real>& g) {
                          detail::add_into(t.accumulate(a), g);
                          if (auto* gb = t.accumulate(b)) {
                            if (same) {
                              detail::add_into(gb, g);
                            } else {
                              for (std::size_t r = 0; r < g.rows(); ++r)
                                for (std::size_t c = 0; c < g.cols(); ++c) (*gb)(0, c) += g(r, c);
                            }
                          }
                        },
                        "add");
}

template <typename Real>
Var<Real> mul(Var<Real> a, Var<Real> b) {
  const auto& av = a.value();
  const auto& bv = b.value();
  detail::require(av.shape() == bv.shape(), "elementwise_mul", av.shape(), bv.shape());
  Tensor<Real> out = av;
  for (std::size_t k = 0; k < out.size(); ++k) out[k] *= bv[k];
  return a.tape->record(std::move(out), {a, b},
                        [a, b](Tape<Real>& t, const Tensor<Real>& g) {
                          if (auto* ga = t.accumulate(a)) {
                            const auto& bv = t.value(b);
                            for (std::size_t k = 0; k < g.size(); ++k) (*ga)[k] += g[k] * bv[k];
                          }
                          if (auto* gb = t.accumulate(b)) {
                            const auto& av = t.value(a);
                            for (std::size_t k = 0; k < g.size(); ++k) (*gb)[k] += g[k] * av[k];
                          }
                        },
                        "elementwise_mul");
}

template <typename Real>
Var<Real> scale(Var<Real> a, Real factor) {
  Tensor<Real> out = a.value();
  for (auto& v : out.data()) v *= factor;
  return a.tape->record(std::move(out), {a},
                        [a, factor](Tape<Real>& t, const Tensor<Real>& g) {
                          if (auto* ga = t.accumulate(a))
                            for (std::size_t k = 0; k < g.size(); ++k) (*ga)[k] += factor * g[k];
                        },
                        "scale");
}

/// Concatenation along `axis` (0 = rows, 1 = columns).
template <typename Real>
Var<Real> concat(const std::vector<Var<Real>>& parts, int axis) {
  if (parts.empty()) throw ShapeError("concat: no operands");
  if (axis != 0 && axis != 1) throw ShapeError("concat: axis must be 0 or 1");
  Tape<Real>* tape = parts.front().tape;
  const auto& first = parts.front().value();
  std::size_t total = 0;
  for (const auto& p : parts) {
    const auto& v = p.value();
    const bool ok = v.rank() == 2 && (axis == 0 ? v.cols() == first.cols() : v.rows() == first.rows());
    detail::require(ok, "concat", first.shape(), v.shape());
    total += axis == 0 ? v.rows() : v.cols();
  }
  Tensor<Real> out = axis == 0 ? Tensor<Real>(total, first.cols()) : Tensor<Real>(first.rows(), total);
  std::vector<std::size_t> offsets;
  std::size_t off = 0;
  for (const auto& p : parts) {
    const auto& v = p.value();
    offsets.push_back(off);
    for (std::size_t r = 0; r < v.rows(); ++r)
      for (std::size_t c = 0; c < v.cols(); ++c) {
        if (axis == 0) out(off + r, c) = v(r, c);
        else out(r, off + c) = v(r, c);
      }
    off += axis == 0 ? v.rows() : v.cols();
  }
  return tape->record(std::move(out), parts,
                      [parts, offsets, axis](Tape<Real>& t, const Tensor<Real>& g) {
                        for (std::size_t i = 0; i < parts.size(); ++i) {
                          auto* gp = t.accumulate(parts[i]);
                          if (!gp) continue;
                          for (std::size_t r = 0; r < gp->rows(); ++r)
                            for (std::size_t c = 0; c < gp->cols(); ++c)
                              (*gp)(r, c) += axis == 0 ? g(offsets[i] + r, c) : g(r, offsets[i] + c);
                        }
                      },
                      "concat");
}

template <typename Real>
Var<Real> slice_rows(Var<Real> a, std::size_t start, std::size_t count) {
  const auto& av = a.value();
  if (count == 0 || start + count > av.rows())
    throw ShapeError("slice_rows: rows [" + std::to_string(start) + ", " +
                     std::to_string(start + count) + ") out of " + shape_string(av.shape()));
  const std::size_t w = av.cols();
  Tensor<Real> out(count, w);
  std::copy_n(av.data().begin() + start * w, count * w, out.data().begin());
  return a.tape->record(std::move(out), {a},
                        [a, start, count, w](Tape<Real>& t, const Tensor<Real>& g) {
                          if (auto* ga = t.accumulate(a))
                            for (std::size_t k = 0; k < count * w; ++k) (*ga)[start * w + k] += g[k];
                        },
                        "slice_rows");
}

template <typename Real>
Var<Real> slice_cols(Var<Real> a, std::size_t start, std::size_t count) {
  const auto& av = a.value();
  if (count == 0 || start + count > av.cols())
    throw ShapeError("slice_cols: cols [" + std::to_string(start) + ", " +
                     std::to_string(start + count) + ") out of " + shape_string(av.shape()));
  Tensor<Real> out(av.rows(), count);
  for (std::size_t r = 0; r < av.rows(); ++r)
    for (std::size_t c = 0; c < count; ++c) out(r, c) = av(r, start + c);
  return a.tape->record(std::move(out), {a},
                        [a, start, count](Tape<Real>& t, const Tensor<Real>& g) {
                          if (auto* ga = t.accumulate(a))
                            for (std::size_t r = 0; r < g.rows(); ++r)
                              for (std::size_t c = 0; c < count; ++c) (*ga)(r, start + c) += g(r, c);
                        },
                        "slice_cols");
}

namespace detail {

// Pointwise op whose derivative is expressed in terms of its output.
template <typename Real, typename F, typename DF>
Var<Real> pointwise(Var<Real> a, F f, DF df_from_out, const char* name) {
  Tensor<Real> out = a.value();
  for (auto& v : out.data()) v = f(v);
  Tape<Real>* tape = a.tape;
  const std::size_t self = tape->size();
  return tape->record(std::move(out), {a},
                      [a, self, df_from_out](Tape<Real>& t, const Tensor<Real>& g) {
                        if (auto* ga = t.accumulate(a)) {
                          const auto& y = t.value(Var<Real>{&t, self});
                          for (std::size_t k = 0; k < g.size(); ++k) (*ga)[k] += g[k] * df_from_out(y[k]);
                        }
                      },
                      name);
}

}  // namespace detail

template <typename Real>
Var<Real> relu(Var<Real> a) {
  return detail::pointwise(
      a, [](Real x) { return x > 0 ? x : Real(0); }, [](Real y) { return y > 0 ? Real(1) : Real(0); },
      "relu");
}

template <typename Real>
Var<Real> sigmoid(Var<Real> a) {
  return detail::pointwise(
      a, [](Real x) { return detail::sigmoid(x); }, [](Real y) { return y * (Real(1) - y); },
      "sigmoid");
}

template <typename Real>
Var<Real> tanh(Var<Real> a) {
  return detail::pointwise(
      a, [](Real x) { return std::tanh(x); }, [](Real y) { return Real(1) - y * y; }, "tanh");
}

/// Row-wise softmax.
template <typename Real>
Var<Real> softmax(Var<Real> a) {
  const auto& av = a.value();
  Tensor<Real> out(av.rows(), av.cols());
  for (std::size_t r = 0; r < av.rows(); ++r) {
    Real mx = av(r, 0);
    for (std::size_t c = 1; c < av.cols(); ++c) mx = std::max(mx, av(r, c));
    Real s = 0;
    for (std::size_t c = 0; c < av.cols(); ++c) s += out(r, c) = std::exp(av(r, c) - mx);
    for (std::size_t c = 0; c < av.cols(); ++c) out(r, c) /= s;
  }
  Tape<Real>* tape = a.tape;
  const std::size_t self = tape->size();
  return tape->record(std::move(out), {a},
                      [a, self](Tape<Real>& t, const Tensor<Real>& g) {
                        auto* ga = t.accumulate(a);
                        if (!ga) return;
                        const auto& y = t.value(Var<Real>{&t, self});
                        for (std::size_t r = 0; r < y.rows(); ++r) {
                          Real dot = 0;
                          for (std::size_t c = 0; c < y.cols(); ++c) dot += g(r, c) * y(r, c);
                          for (std::size_t c = 0; c < y.cols(); ++c) (*ga)(r, c) += y(r, c) * (g(r, c) - dot);
                        }
                      },
                      "softmax");
}

/// Mean over rows of -log softmax(logits)[row, label[row]], as a 1 x 1 tensor.
template <typename Real>
Var<Real> cross_entropy(Var<Real> logits, const std::vector<std::size_t>& labels) {
  const auto& lv = logits.value();
  if (labels.size() != lv.rows())
    throw ShapeError("cross_entropy: " + std::to_string(labels.size()) + " labels for logits " +
                     shape_string(lv.shape()));
  Tensor<Real> probs(lv.rows(), lv.cols());
  Real loss = 0;
  for (std::size_t r = 0; r < lv.rows(); ++r) {
    if (labels[r] >= lv.cols()) throw ShapeError("cross_entropy: label out of range");
    Real mx = lv(r, 0);
    for (std::size_t c = 1; c < lv.cols(); ++c) mx = std::max(mx, lv(r, c));
    Real s = 0;
    for (std::size_t c = 0; c < lv.cols(); ++c) s += probs(r, c) = std::exp(lv(r, c) - mx);
    for (std::size_t c = 0; c < lv.cols(); ++c) probs(r, c) /= s;
    loss += -(lv(r, labels[r]) - mx - std::log(s));
  }
  const Real n = static_cast<Real>(lv.rows());
  return logits.tape->record(Tensor<Real>::scalar(loss / n), {logits},
                             [logits, labels, probs = std::move(probs), n](Tape<Real>& t,
                                                                          const Tensor<Real>& g) {
                               auto* gl = t.accumulate(logits);
                               if (!gl) return;
                               const Real s = g[0] / n;
                               for (std::size_t r = 0; r < probs.rows(); ++r)
                                 for (std::size_t c = 0; c < probs.cols(); ++c)
                                   (*gl)(r, c) += s * (probs(r, c) - (c == labels[r] ? Real(1) : Real(0)));
                             },
                             "cross_entropy");
}

template <typename Real>
Var<Real> sum_all(Var<Real> a) {
  Real s = 0;
  for (auto v : a.value().data()) s += v;
  return a.tape->record(Tensor<Real>::scalar(s), {a},
                        [a](Tape<Real>& t, const Tensor<Real>& g) {
                          if (auto* ga = t.accumulate(a))
                            for (auto& v : ga->data()) v += g[0];
                        },
                        "sum_all");
}

template <typename Real>
Var<Real> mean_all(Var<Real> a) {
  return scale(sum_all(a), Real(1) / static_cast<Real>(a.value().size()));
}

/// Max over time per utterance and feature. `lengths[b]` limits the rows of
/// utterance b that take part; ties go to the lowest time index.
template <typename Real>
Var<Real> max_pool_over_time(Var<Real> x, std::size_t batch, const std::vector<std::size_t>& lengths) {
  const auto& xv = x.value();
  if (batch == 0 || xv.rows() % batch != 0 || lengths.size() != batch)
    throw ShapeError("max_pool_over_time: " + shape_string(xv.shape()) + " is not a batch of " +
                     std::to_string(batch));
  const std::size_t steps = xv.rows() / batch, w = xv.cols();
  Tensor<Real> out(batch, w);
  std::vector<std::size_t> argmax(batch * w);
  for (std::size_t b = 0; b < batch; ++b) {
    if (lengths[b] == 0 || lengths[b] > steps) throw ShapeError("max_pool_over_time: bad length");
    for (std::size_t c = 0; c < w; ++c) {
      std::size_t best = b;
      for (std::size_t i = 1; i < lengths[b]; ++i) {
        const std::size_t row = i * batch + b;
        if (xv(row, c) > xv(best, c)) best = row;
      }
      argmax[b * w + c] = best;
      out(b, c) = xv(best, c);
    }
  }
  return x.tape->record(std::move(out), {x},
                        [x, argmax = std::move(argmax), w](Tape<Real>& t, const Tensor<Real>& g) {
                          if (auto* gx = t.accumulate(x))
                            for (std::size_t k = 0; k < argmax.size(); ++k)
                              (*gx)(argmax[k], k % w) += g[k];
                        },
                        "max_pool_over_time");
}

namespace detail {

inline void check_pairwise(const char* op, const Shape& h, const Shape& v, std::size_t batch) {
  const bool ok = h.size() == 2 && v.size() == 2 && h[1] == v[1] && batch > 0 && h[0] % batch == 0 &&
                  v[0] % batch == 0;
  require(ok, op, h, v);
}

}  // namespace detail

/// out(i*B+b, j) = h(i*B+b) . v(j*B+b)
template <typename Real>
Var<Real> pairwise_dot(Var<Real> h, Var<Real> v, std::size_t batch) {
  const auto& hv = h.value();
  const auto& vv = v.value();
  detail::check_pairwise("pairwise_dot", hv.shape(), vv.shape(), batch);
  const std::size_t steps = hv.rows() / batch, m = vv.rows() / batch, d = hv.cols();
  Tensor<Real> out(hv.rows(), m);
  for (std::size_t i = 0; i < steps; ++i)
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t j = 0; j < m; ++j) {
        Real s = 0;
        for (std::size_t k = 0; k < d; ++k) s += hv(i * batch + b, k) * vv(j * batch + b, k);
        out(i * batch + b, j) = s;
      }
  return h.tape->record(std::move(out), {h, v},
                        [h, v, batch, steps, m, d](Tape<Real>& t, const Tensor<Real>& g) {
                          auto* gh = t.accumulate(h);
                          auto* gv = t.accumulate(v);
                          const auto& hv = t.value(h);
                          const auto& vv = t.value(v);
                          for (std::size_t i = 0; i < steps; ++i)
                            for (std::size_t b = 0; b < batch; ++b)
                              for (std::size_t j = 0; j < m; ++j) {
                                const std::size_t hr = i * batch + b, vr = j * batch + b;
                                const Real gij = g(hr, j);
                                for (std::size_t k = 0; k < d; ++k) {
                                  if (gh) (*gh)(hr, k) += gij * vv(vr, k);
                                  if (gv) (*gv)(vr, k) += gij * hv(hr, k);
                                }
                              }
                        },
                        "pairwise_dot");
}

/// out(i*B+b, j) = || h(i*B+b) - v(j*B+b) ||_1
template <typename Real>
Var<Real> l1_pairwise_distance(Var<Real> h, Var<Real> v, std::size_t batch) {
  const auto& hv = h.value();
  const auto& vv = v.value();
  detail::check_pairwise("l1_pairwise_distance", hv.shape(), vv.shape(), batch);
  const std::size_t steps = hv.rows() / batch, m = vv.rows() / batch, d = hv.cols();
  Tensor<Real> out(hv.rows(), m);
  for (std::size_t i = 0; i < steps; ++i)
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t j = 0; j < m; ++j) {
        Real s = 0;
        for (std::size_t k = 0; k < d; ++k) s += std::abs(hv(i * batch + b, k) - vv(j * batch + b, k));
        out(i * batch + b, j) = s;
      }
  return h.tape->record(std::move(out), {h, v},
                        [h, v, batch, steps, m, d](Tape<Real>& t, const Tensor<Real>& g) {
                          auto* gh = t.accumulate(h);
                          auto* gv = t.accumulate(v);
                          const auto& hv = t.value(h);
                          const auto& vv = t.value(v);
                          for (std::size_t i = 0; i < steps; ++i)
                            for (std::size_t b = 0; b < batch; ++b)
                              for (std::size_t j = 0; j < m; ++j) {
                                const std::size_t hr = i * batch + b, vr = j * batch + b;
                                const Real gij = g(hr, j);
                                for (std::size_t k = 0; k < d; ++k) {
                                  const Real diff = hv(hr, k) - vv(vr, k);
                                  const Real sgn = diff > 0 ? Real(1) : (diff < 0 ? Real(-1) : Real(0));
                                  if (gh) (*gh)(hr, k) += gij * sgn;
                                  if (gv) (*gv)(vr, k) -= gij * sgn;
                                }
                              }
                        },
                        "l1_pairwise_distance");
}

/// Subtracts from every entry of utterance b the mean over its first
/// lengths[b] time rows and all columns.
template <typename Real>
Var<Real> center_per_utterance(Var<Real> a, std::size_t batch, const std::vector<std::size_t>& lengths) {
  const auto& av = a.value();
  if (batch == 0 || av.rows() % batch != 0 || lengths.size() != batch)
    throw ShapeError("center_per_utterance: " + shape_string(av.shape()) + " is not a batch of " +
                     std::to_string(batch));
  const std::size_t m = av.cols();
  Tensor<Real> out = av;
  for (std::size_t b = 0; b < batch; ++b) {
    Real s = 0;
    for (std::size_t i = 0; i < lengths[b]; ++i)
      for (std::size_t j = 0; j < m; ++j) s += av(i * batch + b, j);
    const Real mean = s / static_cast<Real>(lengths[b] * m);
    for (std::size_t i = 0; i < av.rows() / batch; ++i)
      for (std::size_t j = 0; j < m; ++j) out(i * batch + b, j) -= mean;
  }
  return a.tape->record(std::move(out), {a},
                        [a, batch, lengths, m](Tape<Real>& t, const Tensor<Real>& g) {
                          auto* ga = t.accumulate(a);
                          if (!ga) return;
                          const std::size_t steps = g.rows() / batch;
                          for (std::size_t b = 0; b < batch; ++b) {
                            Real s = 0;
                            for (std::size_t i = 0; i < steps; ++i)
                              for (std::size_t j = 0; j < m; ++j) s += g(i * batch + b, j);
                            const Real shift = s / static_cast<Real>(lengths[b] * m);
                            for (std::size_t i = 0; i < steps; ++i)
                              for (std::size_t j = 0; j < m; ++j)
                                (*ga)(i * batch + b, j) += g(i * batch + b, j) - (i < lengths[b] ? shift : Real(0));
                          }
                        },
                        "center_per_utterance");
}

/// out(i*B+b) = sum_j w(i*B+b, j) * v(j*B+b)
template <typename Real>
Var<Real> attend(Var<Real> w, Var<Real> v, std::size_t batch) {
  const auto& wv = w.value();
  const auto& vv = v.value();
  const bool ok = wv.rank() == 2 && vv.rank() == 2 && batch > 0 && wv.rows() % batch == 0 &&
                  vv.rows() == wv.cols() * batch;
  detail::require(ok, "attend", wv.shape(), vv.shape());
  const std::size_t steps = wv.rows() / batch, m = wv.cols(), f = vv.cols();
  Tensor<Real> out(wv.rows(), f);
  for (std::size_t i = 0; i < steps; ++i)
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t j = 0; j < m; ++j) {
        const Real wij = wv(i * batch + b, j);
        for (std::size_t k = 0; k < f; ++k) out(i * batch + b, k) += wij * vv(j * batch + b, k);
      }
  return w.tape->record(std::move(out), {w, v},
                        [w, v, batch, steps, m, f](Tape<Real>& t, const Tensor<Real>& g) {
                          auto* gw = t.accumulate(w);
                          auto* gv = t.accumulate(v);
                          const auto& wv = t.value(w);
                          const auto& vv = t.value(v);
                          for (std::size_t i = 0; i < steps; ++i)
                            for (std::size_t b = 0; b < batch; ++b)
                              for (std::size_t j = 0; j < m; ++j) {
                                const std::size_t r = i * batch + b, vr = j * batch + b;
                                Real dw = 0;
                                for (std::size_t k = 0; k < f; ++k) {
                                  dw += g(r, k) * vv(vr, k);
                                  if (gv) (*gv)(vr, k) += wv(r, j) * g(r, k);
                                }
                                if (gw) (*gw)(r, j) += dw;
                              }
                        },
                        "attend");
}

/// Cell state of an LSTM step. `gates` holds the pre-activations of the
/// input, forget, candidate and output blocks, in that order, each H wide.
template <typename Real>
Var<Real> lstm_cell_state(Var<Real> gates, Var<Real> c_prev) {
  const auto& gv = gates.value();
  const auto& cv = c_prev.value();
  const std::size_t n = cv.rows(), hd = cv.cols();
  detail::require(gv.rows() == n && gv.cols() == 4 * hd, "lstm_cell", gv.shape(), cv.shape());
  Tensor<Real> out(n, hd);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t k = 0; k < hd; ++k) {
      const Real ig = detail::sigmoid(gv(r, k));
      const Real fg = detail::sigmoid(gv(r, hd + k));
      const Real cand = std::tanh(gv(r, 2 * hd + k));
      out(r, k) = fg * cv(r, k) + ig * cand;
    }
  return gates.tape->record(std::move(out), {gates, c_prev},
                            [gates, c_prev, n, hd](Tape<Real>& t, const Tensor<Real>& g) {
                              auto* gg = t.accumulate(gates);
                              auto* gc = t.accumulate(c_prev);
                              const auto& gv = t.value(gates);
                              const auto& cv = t.value(c_prev);
                              for (std::size_t r = 0; r < n; ++r)
                                for (std::size_t k = 0; k < hd; ++k) {
                                  const Real ig = detail::sigmoid(gv(r, k));
                                  const Real fg = detail::sigmoid(gv(r, hd + k));
                                  const Real cand = std::tanh(gv(r, 2 * hd + k));
                                  const Real d = g(r, k);
                                  if (gg) {
                                    (*gg)(r, k) += d * cand * ig * (1 - ig);
                                    (*gg)(r, hd + k) += d * cv(r, k) * fg * (1 - fg);
                                    (*gg)(r, 2 * hd + k) += d * ig * (1 - cand * cand);
                                  }
                                  if (gc) (*gc)(r, k) += d * fg;
                                }
                            },
                            "lstm_cell");
}

/// Hidden output of an LSTM step: sigmoid(output gate) * tanh(cell).
template <typename Real>
Var<Real> lstm_cell_output(Var<Real> gates, Var<Real> cell) {
  const auto& gv = gates.value();
  const auto& cv = cell.value();
  const std::size_t n = cv.rows(), hd = cv.cols();
  detail::require(gv.rows() == n && gv.cols() == 4 * hd, "lstm_cell", gv.shape(), cv.shape());
  Tensor<Real> out(n, hd);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t k = 0; k < hd; ++k)
      out(r, k) = detail::sigmoid(gv(r, 3 * hd + k)) * std::tanh(cv(r, k));
  return gates.tape->record(std::move(out), {gates, cell},
                            [gates, cell, n, hd](Tape<Real>& t, const Tensor<Real>& g) {
                              auto* gg = t.accumulate(gates);
                              auto* gc = t.accumulate(cell);
                              const auto& gv = t.value(gates);
                              const auto& cv = t.value(cell);
                              for (std::size_t r = 0; r < n; ++r)
                                for (std::size_t k = 0; k < hd; ++k) {
                                  const Real og = detail::sigmoid(gv(r, 3 * hd + k));
                                  const Real tc = std::tanh(cv(r, k));
                                  if (gg) (*gg)(r, 3 * hd + k) += g(r, k) * tc * og * (1 - og);
                                  if (gc) (*gc)(r, k) += g(r, k) * og * (1 - tc * tc);
                                }
                            },
                            "lstm_cell");
}

template <typename Real>
struct LstmState {
  Var<Real> h;
  Var<Real> c;
};

/// One classic LSTM step. `input_proj` is x W_x + b, already computed for
/// the step; the recurrent term h_prev W_h is added here.
template <typename Real>
LstmState<Real> lstm_cell(Var<Real> input_proj, const LstmState<Real>& prev, Var<Real> recurrent) {
  Var<Real> gates = add(input_proj, matmul(prev.h, recurrent));
  Var<Real> c = lstm_cell_state(gates, prev.c);
  return {lstm_cell_output(gates, c), c};
}

/// Row r of the result is next(r) where keep[r] is set and prev(r) otherwise.
template <typename Real>
Var<Real> select_rows(Var<Real> next, Var<Real> prev, const std::vector<bool>& keep) {
  const auto& nv = next.value();
  const auto& pv = prev.value();
  detail::require(nv.shape() == pv.shape() && keep.size() == nv.rows(), "select_rows", nv.shape(),
                  pv.shape());
  Tensor<Real> out = pv;
  for (std::size_t r = 0; r < nv.rows(); ++r)
    if (keep[r])
      for (std::size_t c = 0; c < nv.cols(); ++c) out(r, c) = nv(r, c);
  return next.tape->record(std::move(out), {next, prev},
                           [next, prev, keep](Tape<Real>& t, const Tensor<Real>& g) {
                             auto* gn = t.accumulate(next);
                             auto* gp = t.accumulate(prev);
                             for (std::size_t r = 0; r < g.rows(); ++r) {
                               auto* dst = keep[r] ? gn : gp;
                               if (!dst) continue;
                               for (std::size_t c = 0; c < g.cols(); ++c) (*dst)(r, c) += g(r, c);
                             }
                           },
                           "select_rows");
}

/// Zeroes every row whose keep flag is unset.
template <typename Real>
Var<Real> mask_rows(Var<Real> a, const std::vector<bool>& keep) {
  const auto& av = a.value();
  if (keep.size() != av.rows()) throw ShapeError("mask_rows: mask length mismatch for " + shape_string(av.shape()));
  Tensor<Real> out = av;
  for (std::size_t r = 0; r < av.rows(); ++r)
    if (!keep[r])
      for (std::size_t c = 0; c < av.cols(); ++c) out(r, c) = 0;
  return a.tape->record(std::move(out), {a},
                        [a, keep](Tape<Real>& t, const Tensor<Real>& g) {
                          if (auto* ga = t.accumulate(a))
                            for (std::size_t r = 0; r < g.rows(); ++r)
                              if (keep[r])
                                for (std::size_t c = 0; c < g.cols(); ++c) (*ga)(r, c) += g(r, c);
                        },
                        "mask_rows");
}

/// Appends `extra` zero rows.
template <typename Real>
Var<Real> pad_rows(Var<Real> a, std::size_t extra) {
  if (extra == 0) return a;
  const auto& av = a.value();
  Tensor<Real> out(av.rows() + extra, av.cols());
  std::copy(av.data().begin(), av.data().end(), out.data().begin());
  return a.tape->record(std::move(out), {a},
                        [a](Tape<Real>& t, const Tensor<Real>& g) {
                          if (auto* ga = t.accumulate(a))
                            for (std::size_t k = 0; k < ga->size(); ++k) (*ga)[k] += g[k];
                        },
                        "pad_rows");
}

/// Sliding windows of `width` consecutive time steps, stride 1. Output row
/// s*B+b is the concatenation of rows (s+r)*B+b for r in [0, width).
template <typename Real>
Var<Real> unfold_time(Var<Real> x, std::size_t batch, std::size_t width) {
  const auto& xv = x.value();
  if (batch == 0 || width == 0 || xv.rows() % batch != 0 || xv.rows() / batch < width)
    throw ShapeError("unfold_time: cannot take windows of " + std::to_string(width) + " from " +
                     shape_string(xv.shape()) + " with batch " + std::to_string(batch));
  const std::size_t steps = xv.rows() / batch, d = xv.cols(), positions = steps - width + 1;
  Tensor<Real> out(positions * batch, width * d);
  for (std::size_t s = 0; s < positions; ++s)
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t r = 0; r < width; ++r)
        std::copy_n(xv.data().data() + ((s + r) * batch + b) * d, d, &out(s * batch + b, r * d));
  return x.tape->record(std::move(out), {x},
                        [x, batch, width, d, positions](Tape<Real>& t, const Tensor<Real>& g) {
                          auto* gx = t.accumulate(x);
                          if (!gx) return;
                          for (std::size_t s = 0; s < positions; ++s)
                            for (std::size_t b = 0; b < batch; ++b)
                              for (std::size_t r = 0; r < width; ++r)
                                for (std::size_t k = 0; k < d; ++k)
                                  (*gx)((s + r) * batch + b, k) += g(s * batch + b, r * d + k);
                        },
                        "unfold_time");
}

/// x W + b with b broadcast over rows.
template <typename Real>
Var<Real> affine(Var<Real> x, Var<Real> weight, Var<Real> bias) {
  return add(matmul(x, weight), bias);
}

}  // namespace pdac::numerics
