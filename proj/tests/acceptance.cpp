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

// Acceptance runner: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "pdac/data/synth.hpp"
#include "pdac/features/features.hpp"
#include "pdac/training/selfcheck.hpp"
#include "pdac/training/stats.hpp"
#include "pdac/training/trainer.hpp"
#include "support.hpp"

#include <unistd.h>

namespace {

using namespace pdac;
using model::Ablation;
using model::Example;
using model::ModelConfig;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Small configuration used for every synthetic-corpus training criterion.
ModelConfig small_model(Ablation mode) {
  ModelConfig c;
  c.prosody_embed_dim = 8;
  c.lstm_layers = 1;
  c.lstm_hidden = 16;
  c.cnn_filters = 8;
  c.affinity_dim = 8;
  c.n_classes = data::kSynthClasses.size();
  c.ablation = mode;
  return c;
}

training::TrainConfig small_training(std::size_t epochs) {
  training::TrainConfig t;
  t.lr = 5e-3;
  t.batch_size = 32;
  t.epochs = epochs;
  return t;
}

data::LabelMap synth_labels() {
  std::vector<std::string> names;
  for (auto c : data::kSynthClasses) names.emplace_back(data::to_string(c));
  return data::LabelMap::from_labels(names);
}

std::vector<Example> synth_split(std::size_t split, std::size_t per_class, std::uint64_t seed,
                                 const data::LabelMap& labels) {
  std::vector<std::pair<data::SynthClass, std::size_t>> jobs;
  for (std::size_t i = 0; i < per_class; ++i)
    for (auto c : data::kSynthClasses) jobs.emplace_back(c, i);
  std::vector<Example> out(jobs.size());
  util::parallel_for(jobs.size(), [&](std::size_t k) {
    auto [cls, i] = jobs[k];
    auto rng = data::synth_rng(seed, split, cls, i);
    out[k].id = std::string(data::to_string(cls)) + "-" + std::to_string(split) + "-" + std::to_string(i);
    out[k].label = labels.index(data::to_string(cls));
    out[k].features = features::extract_features(data::synth_waveform(cls, rng));
  });
  return out;
}

// --- 1 -----------------------------------------------------------------------

Outcome gradient_suite() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto report = training::model_selfcheck(1);
  const double elapsed = seconds_since(t0);
  std::size_t flagged = 0;
  for (const auto& p : report.parameters) flagged += p.flagged;
  return {report.passed() && elapsed < 60.0,
          fmt("%zu tensors, %zu entries above tol 1e-4, max rel err %.2e, %.1f s (< 60 s)", report.parameters.size(),
              flagged, report.max_rel_error(), elapsed)};
}

// --- 2 -----------------------------------------------------------------------

// Parameters at initialization scale and inputs normalized as in training;
// far outside that regime a double-precision sigmoid rounds to exactly 1.
Outcome gate_ranges() {
  std::mt19937_64 rng(2);
  std::size_t violations = 0, values = 0;
  double worst_mean = 0;
  for (int pass = 0; pass < 1000; ++pass) {
    model::Model<double> m(training::selfcheck_config());
    m.init(static_cast<std::uint64_t>(pass));
    std::uniform_real_distribution<double> u(-0.1, 0.1);
    for (auto& p : m.parameters())
      for (auto& v : p.value.data()) v += u(rng);
    const std::size_t batch = 1 + rng() % 3;
    std::vector<Example> ex;
    for (std::size_t b = 0; b < batch; ++b)
      ex.push_back(testing::random_example("u" + std::to_string(b), 1 + rng() % 80, rng()));
    std::vector<const Example*> ptrs;
    for (const auto& e : ex) ptrs.push_back(&e);
    numerics::Tape<double> tape;
    const auto res = m.forward(tape, testing::batch_of(ptrs, model::Normalizer::fit(ex)), {.trace = true});
    for (const auto& tr : res.traces) {
      for (double v : tr.local_beta->data()) violations += !(v > 0 && v < 1);
      for (double v : tr.similarity.data()) violations += !(v > -1 && v < 1);
      for (double v : tr.gate.data()) violations += !(v > 0 && v < 1);
      values += tr.local_beta->size() + tr.similarity.size() + tr.gate.size();
      worst_mean = std::max({worst_mean, std::abs(tr.centered_similarity_mean), std::abs(tr.centered_dissimilarity_mean)});
    }
  }
  return {violations == 0 && worst_mean <= 1e-9,
          fmt("1000 passes, %zu of %zu gate values out of range, max |centered mean| %.1e (<= 1e-9)", violations,
              values, worst_mean)};
}

// --- 3 -----------------------------------------------------------------------

Outcome reductions() {
  double concat_err = 0, zero_err = 0;
  for (std::uint64_t trial = 0; trial < 20; ++trial) {
    const auto a = testing::random_example("a", 5 + trial * 3, 100 + trial);
    const auto b = testing::random_example("b", 40, 200 + trial);
    const auto batch = testing::batch_of({&a, &b});

    model::Model<double> full(training::selfcheck_config()), concat(training::selfcheck_config(Ablation::local_concat));
    full.init(trial);
    for (auto& p : concat.parameters()) p.value = full.parameter(p.name).value;
    const auto y_pinned = testing::logits_of(full, batch, {.local_gate_preactivation = 30.0});
    const auto y_concat = testing::logits_of(concat, batch);
    for (std::size_t k = 0; k < y_pinned.size(); ++k) concat_err = std::max(concat_err, std::abs(y_pinned[k] - y_concat[k]));

    model::Model<double> silent(training::selfcheck_config()), base(training::selfcheck_config(Ablation::baseline));
    silent.init(trial + 50);
    std::mt19937_64 rng(trial);
    std::uniform_real_distribution<double> u(-0.2, 0.2);
    for (auto& p : silent.parameters())
      for (auto& v : p.value.data()) v += u(rng);
    testing::zero_prosody(silent);
    testing::copy_into_baseline(silent, base);
    const auto y_silent = testing::logits_of(silent, batch);
    const auto y_base = testing::logits_of(base, batch);
    for (std::size_t k = 0; k < y_silent.size(); ++k) zero_err = std::max(zero_err, std::abs(y_silent[k] - y_base[k]));
  }
  return {concat_err <= 1e-9 && zero_err <= 1e-9,
          fmt("20 trials, local gate +30 vs concat max diff %.1e, zeroed prosody vs baseline max diff %.1e (<= 1e-9)",
              concat_err, zero_err)};
}

// --- 4 -----------------------------------------------------------------------

Outcome padding_invariance() {
  std::mt19937_64 rng(4);
  std::vector<Example> ex;
  for (std::size_t i = 0; i < 100; ++i) ex.push_back(testing::random_example("u" + std::to_string(i), 10 + rng() % 191, rng()));
  ModelConfig cfg;
  cfg.n_classes = 5;
  model::Model<float> m(cfg);
  m.init(4);
  const model::Normalizer norm;
  auto logits = [&](const std::vector<const Example*>& ptrs) {
    numerics::Tape<float> tape;
    const auto batch = model::make_batch<float>(std::span<const Example* const>(ptrs), norm);
    return numerics::Tensor<float>(m.forward(tape, batch).logits.value());
  };
  double worst = 0;
  for (std::size_t start = 0; start < ex.size(); start += 10) {
    std::vector<const Example*> group;
    for (std::size_t i = start; i < start + 10; ++i) group.push_back(&ex[i]);
    const auto batched = logits(group);
    for (std::size_t b = 0; b < group.size(); ++b) {
      const auto alone = logits({group[b]});
      for (std::size_t c = 0; c < cfg.n_classes; ++c)
        worst = std::max(worst, std::abs(static_cast<double>(alone(0, c)) - static_cast<double>(batched(b, c))));
    }
  }
  return {worst <= 1e-5, fmt("100 utterances of 10-200 frames in batches of 10 (float32), max diff %.1e (<= 1e-5)", worst)};
}

// --- 5 -----------------------------------------------------------------------

Outcome overfit() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto labels = synth_labels();
  training::Dataset data;
  data.labels = labels;
  data.train = synth_split(0, 8, 55, labels);
  auto tcfg = small_training(60);
  tcfg.batch_size = 8;
  tcfg.track_train_accuracy = true;
  const auto run = training::train<float>(tcfg, small_model(Ablation::full), data, 1);
  std::size_t reached = 0;
  double best = 0;
  for (const auto& e : run.epochs) {
    best = std::max(best, *e.train_accuracy);
    if (!reached && *e.train_accuracy >= 0.95) reached = e.epoch;
  }
  const double elapsed = seconds_since(t0);
  return {reached > 0 && elapsed < 300.0,
          fmt("32 utterances, train accuracy >= 0.95 first at epoch %zu of 60 (best %.3f, final %.3f), %.1f s (< 300 s)",
              reached, best, *run.epochs.back().train_accuracy, elapsed)};
}

// --- 6 and 7 -----------------------------------------------------------------

struct Arms {
  training::ProtocolResult full, concat, baseline;
  double seconds = 0;
  std::size_t test_size = 0;
};

// The corpus goes through the same files `pdac synth` writes.
Arms run_arms() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto dir = std::filesystem::temp_directory_path() / ("pdac-acceptance-" + std::to_string(::getpid()));
  const auto corpus = data::synth_generate(
      {.train_per_class = 64, .validation_per_class = 32, .test_per_class = 32, .seed = 1}, dir);
  Arms arms;
  training::Dataset data;
  data.labels = corpus.labels;
  data.train = data::load_examples(corpus.train, data.labels);
  data.validation = data::load_examples(corpus.validation, data.labels);
  data.test = data::load_examples(corpus.test, data.labels);
  std::filesystem::remove_all(dir);
  arms.test_size = data.test.size();
  auto tcfg = small_training(60);
  tcfg.runs = 10;
  arms.baseline = training::run_protocol<float>(tcfg, small_model(Ablation::baseline), data);
  const training::ReferenceRuns ref{"baseline", arms.baseline.test_accuracies()};
  arms.full = training::run_protocol<float>(tcfg, small_model(Ablation::full), data, ref);
  arms.concat = training::run_protocol<float>(tcfg, small_model(Ablation::local_concat), data, ref);
  arms.seconds = seconds_since(t0);
  return arms;
}

Outcome separation(const Arms& a) {
  const auto& sig = *a.full.significance;
  return {a.full.test_accuracy.mean > a.baseline.test_accuracy.mean && sig.p_value < 0.05,
          fmt("full %.4f +- %.4f vs baseline %.4f +- %.4f, U = %.1f, two-sided p = %.2e (< 0.05), 10 runs each, %.0f s",
              a.full.test_accuracy.mean, a.full.test_accuracy.stddev, a.baseline.test_accuracy.mean,
              a.baseline.test_accuracy.stddev, sig.u_statistic, sig.p_value, a.seconds)};
}

Outcome ordering(const Arms& a) {
  const double f = a.full.test_accuracy.mean, c = a.concat.test_accuracy.mean, b = a.baseline.test_accuracy.mean;
  return {f >= c && c >= b, fmt("mean test accuracy full %.4f >= local_concat %.4f >= baseline %.4f (one test utterance = %.4f)",
                                f, c, b, 1.0 / static_cast<double>(a.test_size))};
}

// --- 8 -----------------------------------------------------------------------

double pairwise_u(const std::vector<double>& a, const std::vector<double>& b) {
  double u = 0;
  for (double x : a)
    for (double y : b) u += x > y ? 1.0 : x == y ? 0.5 : 0.0;
  return u;
}

// Two-sided p by enumerating every assignment of the pooled values.
double enumerated_p(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> pooled(a);
  pooled.insert(pooled.end(), b.begin(), b.end());
  const std::size_t n = pooled.size();
  const double mean = 0.5 * static_cast<double>(a.size() * b.size()), dev = std::abs(pairwise_u(a, b) - mean);
  std::size_t total = 0, extreme = 0;
  std::vector<double> x, y;
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
    if (static_cast<std::size_t>(std::popcount(mask)) != a.size()) continue;
    x.clear();
    y.clear();
    for (std::size_t i = 0; i < n; ++i) (mask >> i & 1u ? x : y).push_back(pooled[i]);
    ++total;
    extreme += std::abs(pairwise_u(x, y) - mean) >= dev - 1e-12;
  }
  return static_cast<double>(extreme) / static_cast<double>(total);
}

Outcome mann_whitney() {
  std::mt19937_64 rng(8);
  double worst_p = 0, worst_sum = 0;
  std::size_t cases = 0;
  for (std::size_t na = 1; na <= 8; ++na)
    for (std::size_t nb = 1; nb <= 8; ++nb)
      for (int levels : {4, 1000}) {  // with and without ties
        std::uniform_int_distribution<int> d(0, levels - 1);
        std::vector<double> a(na), b(nb);
        for (auto& v : a) v = d(rng);
        for (auto& v : b) v = d(rng) + (nb % 2);
        const auto r = training::mann_whitney_u(a, b);
        const auto s = training::mann_whitney_u(b, a);
        worst_p = std::max(worst_p, r.exact ? std::abs(r.p - enumerated_p(a, b)) : 1.0);
        worst_sum = std::max(worst_sum, std::abs(r.u + s.u - static_cast<double>(na * nb)));
        ++cases;
      }
  return {worst_p <= 1e-9 && worst_sum == 0.0,
          fmt("%zu sample-size cases up to 8x8, max |p - enumerated| %.1e (<= 1e-9), max |U_a + U_b - n_a n_b| %.1e",
              cases, worst_p, worst_sum)};
}

// --- 9 -----------------------------------------------------------------------

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double fitted_slope(const std::vector<double>& y) {
  const double n = static_cast<double>(y.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double x = static_cast<double>(i);
    sx += x;
    sy += y[i];
    sxx += x * x;
    sxy += x * y[i];
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

Outcome pitch_oracle() {
  std::string tones;
  bool pass = true;
  for (double hz : {200.0, 300.0}) {
    features::Waveform w;
    for (std::size_t i = 0; i < 8000; ++i)
      w.samples.push_back(0.5 * std::sin(2 * std::numbers::pi * hz * static_cast<double>(i) / 8000.0));
    const double med = median(features::track_pitch(w).pitch_hz);
    pass = pass && std::abs(med - hz) <= 0.05 * hz;
    tones += fmt("%.0f Hz -> %.1f Hz, ", hz, med);
  }
  const std::size_t n = 100;
  std::vector<int> ok(n, 0);
  util::parallel_for(n, [&](std::size_t i) {
    auto rng = data::synth_rng(9, 0, data::SynthClass::rising, i);
    std::vector<double> lp;
    for (double f : features::track_pitch(data::synth_waveform(data::SynthClass::rising, rng)).pitch_hz)
      lp.push_back(std::log(f));
    ok[i] = fitted_slope(lp) > 0;
  });
  const auto rising = static_cast<std::size_t>(std::count(ok.begin(), ok.end(), 1));
  pass = pass && rising * 100 >= 95 * n;
  return {pass, tones + fmt("rising class positive log-pitch slope in %zu/%zu (>= 95%%)", rising, n)};
}

// --- 10 ----------------------------------------------------------------------

Outcome determinism() {
  const auto labels = synth_labels();
  training::Dataset data;
  data.labels = labels;
  data.train = synth_split(0, 6, 10, labels);
  data.validation = synth_split(1, 3, 10, labels);
  data.test = synth_split(2, 3, 10, labels);
  auto tcfg = small_training(3);
  tcfg.batch_size = 8;
  tcfg.runs = 2;
  tcfg.double_precision = true;
  const auto mcfg = small_model(Ablation::full);
  auto report = [&](std::size_t threads) {
    const auto p = training::run_protocol<double>(tcfg, mcfg, data, std::nullopt, training::Alternative::two_sided, threads);
    return training::report_json(tcfg, mcfg, labels, p).dump(2);
  };
  const auto a = report(1), b = report(1), c = report(2);
  return {a == b && a == c, fmt("float64 report of %zu bytes identical across repeats: %s, across thread counts: %s",
                                a.size(), a == b ? "yes" : "no", a == c ? "yes" : "no")};
}

}  // namespace

int main() {
  bool all = true;
  auto report = [&](int id, const char* name, const std::function<Outcome()>& criterion) {
    Outcome o;
    try {
      o = criterion();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    all = all && o.pass;
    std::printf("[%s] %2d %s: %s\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str());
    std::fflush(stdout);
  };
  report(1, "gradient suite", gradient_suite);
  report(2, "gate ranges", gate_ranges);
  report(3, "reduction identities", reductions);
  report(4, "padding invariance", padding_invariance);
  report(5, "overfit oracle", overfit);
  std::optional<Arms> arms;
  auto with_arms = [&](Outcome (*f)(const Arms&)) {
    return [&, f] {
      if (!arms) arms = run_arms();
      return f(*arms);
    };
  };
  report(6, "prosody-signal separation", with_arms(separation));
  report(7, "ablation ordering", with_arms(ordering));
  report(8, "Mann-Whitney exactness", mann_whitney);
  report(9, "pitch oracle", pitch_oracle);
  report(10, "determinism", determinism);
  return all ? 0 : 1;
}
