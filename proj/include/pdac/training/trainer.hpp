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
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "pdac/data/dataset.hpp"
#include "pdac/model/network.hpp"
#include "pdac/numerics/adam.hpp"
#include "pdac/training/checkpoint.hpp"
#include "pdac/training/stats.hpp"
#include "pdac/util/parallel.hpp"

namespace pdac::training {

using model::Example;

struct TrainConfig {
  double lr = 1e-4;
  std::size_t batch_size = 32;
  std::size_t epochs = 60;
  std::uint64_t seed = 1;
  std::size_t runs = 10;
  double clip_norm = 5.0;
  std::string checkpoint_dir{};  // empty: best parameters are kept in memory only
  bool track_train_accuracy = false;
  bool double_precision = false;

  void validate() const {
    if (!(lr >= 0) || !std::isfinite(lr)) throw std::invalid_argument("lr must be a finite non-negative number");
    if (epochs == 0) throw std::invalid_argument("epochs must be at least 1");
    if (runs == 0) throw std::invalid_argument("runs must be at least 1");
    if (batch_size == 0) throw std::invalid_argument("batch_size must be at least 1");
    if (!(clip_norm > 0)) throw std::invalid_argument("clip_norm must be positive");
  }
};

inline void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = nlohmann::json{{"lr", c.lr},
                     {"batch_size", c.batch_size},
                     {"epochs", c.epochs},
                     {"seed", c.seed},
                     {"runs", c.runs},
                     {"clip_norm", c.clip_norm},
                     {"checkpoint_dir", c.checkpoint_dir},
                     {"track_train_accuracy", c.track_train_accuracy},
                     {"precision", c.double_precision ? "float64" : "float32"}};
}

class DivergedAtStep : public std::runtime_error {
 public:
  explicit DivergedAtStep(std::size_t step, const std::string& why = "non-finite loss")
      : std::runtime_error("training diverged at step " + std::to_string(step) + ": " + why), step_(step) {}
  std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

/// Training, validation and test examples with their label map.
struct Dataset {
  std::vector<Example> train, validation, test;
  data::LabelMap labels;
};

struct ClassScore {
  std::string label;
  std::size_t count = 0;
  double accuracy = 0;
};

struct Evaluation {
  double accuracy = 0;
  double loss = 0;  // mean cross-entropy over items whose label is known
  std::vector<ClassScore> per_class;
  // confusion[true][predicted]; the last row collects unknown-label items.
  std::vector<std::vector<std::size_t>> confusion;
};

/// Accuracy bookkeeping for predicted class indices. Labels >= n_classes
/// are unknown and always count as wrong.
inline Evaluation score_predictions(const std::vector<std::size_t>& labels, const std::vector<std::size_t>& predicted,
                                    const data::LabelMap& names) {
  if (labels.size() != predicted.size()) throw std::invalid_argument("score_predictions: size mismatch");
  const std::size_t k = names.size();
  Evaluation ev;
  ev.confusion.assign(k + 1, std::vector<std::size_t>(k, 0));
  std::vector<std::size_t> correct(k + 1, 0), count(k + 1, 0);
  std::size_t right = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (predicted[i] >= k) throw std::invalid_argument("score_predictions: prediction out of range");
    const std::size_t row = std::min(labels[i], k);
    ++ev.confusion[row][predicted[i]];
    ++count[row];
    if (row < k && predicted[i] == row) {
      ++correct[row];
      ++right;
    }
  }
  ev.accuracy = labels.empty() ? 0.0 : static_cast<double>(right) / static_cast<double>(labels.size());
  for (std::size_t c = 0; c <= k; ++c)
    if (count[c] > 0)
      ev.per_class.push_back(
          {names.name(c), count[c], static_cast<double>(correct[c]) / static_cast<double>(count[c])});
  return ev;
}

namespace detail {

template <typename Real>
model::Batch<Real> gather(const std::vector<Example>& items, const std::vector<std::size_t>& idx,
                          const model::Normalizer& norm) {
  std::vector<const Example*> ptrs;
  for (auto i : idx) ptrs.push_back(&items[i]);
  return model::make_batch<Real>(std::span<const Example* const>(ptrs), norm);
}

}  // namespace detail

template <typename Real>
Evaluation evaluate(model::Model<Real>& m, const std::vector<Example>& items, const model::Normalizer& norm,
                    const data::LabelMap& labels, std::size_t batch_size = 32) {
  std::vector<std::size_t> truth, predicted;
  double loss = 0;
  std::size_t known = 0;
  for (const auto& idx : data::sequential_batches(items.size(), batch_size)) {
    numerics::Tape<Real> tape;
    const auto batch = detail::gather<Real>(items, idx, norm);
    const auto& logits = m.forward(tape, batch).logits.value();
    for (std::size_t b = 0; b < batch.size; ++b) {
      std::size_t arg = 0;
      double top = -std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < logits.cols(); ++c)
        if (static_cast<double>(logits(b, c)) > top) {
          top = static_cast<double>(logits(b, c));
          arg = c;
        }
      truth.push_back(batch.labels[b]);
      predicted.push_back(arg);
      if (batch.labels[b] < logits.cols()) {
        double z = 0;
        for (std::size_t c = 0; c < logits.cols(); ++c) z += std::exp(static_cast<double>(logits(b, c)) - top);
        loss += top + std::log(z) - static_cast<double>(logits(b, batch.labels[b]));
        ++known;
      }
    }
  }
  auto ev = score_predictions(truth, predicted, labels);
  ev.loss = known ? loss / static_cast<double>(known) : 0.0;
  return ev;
}

struct EpochMetrics {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0;
  double val_loss = 0;
  double val_accuracy = 0;
  std::optional<double> train_accuracy;
};

struct RunResult {
  std::uint64_t seed = 0;
  std::vector<EpochMetrics> epochs;
  std::size_t best_epoch = 0;
  double best_val_loss = 0;
  Evaluation test;
  std::size_t parameter_count = 0;
  Checkpoint best;
};

/// Index of the smallest loss, 1-based; the earliest wins ties.
inline std::size_t best_epoch_of(const std::vector<double>& val_losses) {
  if (val_losses.empty()) throw std::invalid_argument("no epochs");
  return static_cast<std::size_t>(std::min_element(val_losses.begin(), val_losses.end()) - val_losses.begin()) + 1;
}

/// One training run: Adam over shuffled batches, validation after every
/// epoch, best-validation-loss parameters kept (and saved to
/// checkpoint_dir/best.ckpt when set). Test metrics use those parameters as
/// stored in the checkpoint.
template <typename Real>
RunResult train(const TrainConfig& tcfg, const model::ModelConfig& mcfg, const Dataset& data, std::uint64_t seed) {
  tcfg.validate();
  if (data.train.empty()) throw std::invalid_argument("training split is empty");
  for (const auto& ex : data.train)
    if (ex.label >= mcfg.n_classes)
      throw std::invalid_argument("training label of '" + ex.id + "' is outside the model's classes");
  const auto norm = model::Normalizer::fit(data.train);
  model::Model<Real> m(mcfg);
  m.init(seed);
  numerics::Adam<Real> adam({.lr = tcfg.lr});
  const auto& eval_set = data.validation.empty() ? data.train : data.validation;

  RunResult run;
  run.seed = seed;
  run.parameter_count = m.parameter_count();
  run.best_val_loss = std::numeric_limits<double>::infinity();
  std::size_t step = 0;
  for (std::size_t epoch = 1; epoch <= tcfg.epochs; ++epoch) {
    double total = 0;
    for (const auto& idx : data::make_batches(data.train.size(), tcfg.batch_size, seed, epoch)) {
      ++step;
      const auto batch = detail::gather<Real>(data.train, idx, norm);
      double loss = 0;
      try {
        numerics::Tape<Real> tape;
        auto l = numerics::cross_entropy(m.forward(tape, batch).logits, batch.labels);
        loss = static_cast<double>(l.value().item());
        if (!std::isfinite(loss)) throw DivergedAtStep(step);
        tape.backward(l);
      } catch (const numerics::NumericError& e) {
        throw DivergedAtStep(step, e.what());
      }
      numerics::clip_grad_norm(m.parameters(), tcfg.clip_norm);
      adam.step(m.parameters());
      numerics::zero_grads(m.parameters());
      total += loss * static_cast<double>(idx.size());
    }
    EpochMetrics em;
    em.epoch = epoch;
    em.train_loss = total / static_cast<double>(data.train.size());
    const auto val = evaluate(m, eval_set, norm, data.labels, tcfg.batch_size);
    em.val_loss = val.loss;
    em.val_accuracy = val.accuracy;
    if (tcfg.track_train_accuracy) em.train_accuracy = evaluate(m, data.train, norm, data.labels, tcfg.batch_size).accuracy;
    run.epochs.push_back(em);
    if (em.val_loss < run.best_val_loss) {
      run.best_val_loss = em.val_loss;
      run.best_epoch = epoch;
      run.best = Checkpoint::of(m, data.labels, norm);
      if (!tcfg.checkpoint_dir.empty()) {
        std::filesystem::create_directories(tcfg.checkpoint_dir);
        save_checkpoint((std::filesystem::path(tcfg.checkpoint_dir) / "best.ckpt").string(), run.best);
      }
    }
  }
  if (run.best_epoch == 0) {  // every validation loss was NaN
    run.best_epoch = tcfg.epochs;
    run.best = Checkpoint::of(m, data.labels, norm);
  }
  auto best = run.best.make_model<Real>();
  run.test = evaluate(best, data.test, norm, data.labels, tcfg.batch_size);
  return run;
}

/// Evaluates a checkpoint on examples whose labels were indexed with `labels`.
template <typename Real>
Evaluation evaluate_checkpoint(const Checkpoint& ckpt, const std::vector<Example>& items, const data::LabelMap& labels,
                               std::size_t batch_size = 32) {
  if (!(ckpt.labels == labels))
    throw std::invalid_argument("label map of the data does not match the checkpoint's");
  auto m = ckpt.make_model<Real>();
  return evaluate(m, items, ckpt.normalizer, labels, batch_size);
}

struct Significance {
  std::string reference;
  double u_statistic = 0;
  double p_value = 1;
  bool exact = false;
  std::string alternative = "two-sided";
};

struct ProtocolResult {
  std::vector<RunResult> runs;
  Summary test_accuracy;
  std::optional<Significance> significance;

  std::vector<double> test_accuracies() const {
    std::vector<double> out;
    for (const auto& r : runs) out.push_back(r.test.accuracy);
    return out;
  }
};

struct ReferenceRuns {
  std::string name;
  std::vector<double> test_accuracies;
};

inline Significance compare_runs(const std::vector<double>& ours, const ReferenceRuns& ref,
                                 Alternative alt = Alternative::two_sided) {
  const auto r = mann_whitney_u(ours, ref.test_accuracies, alt);
  return {ref.name, r.u, r.p, r.exact,
          alt == Alternative::two_sided ? "two-sided" : alt == Alternative::greater ? "greater" : "less"};
}

/// `runs` independent trainings with seeds seed, seed+1, ...; runs execute
/// in parallel but each is deterministic on its own.
template <typename Real>
ProtocolResult run_protocol(const TrainConfig& tcfg, const model::ModelConfig& mcfg, const Dataset& data,
                            const std::optional<ReferenceRuns>& reference = std::nullopt,
                            Alternative alt = Alternative::two_sided, std::size_t threads = util::worker_count()) {
  tcfg.validate();
  ProtocolResult out;
  out.runs.resize(tcfg.runs);
  util::parallel_for(
      tcfg.runs,
      [&](std::size_t i) {
        auto cfg = tcfg;
        if (!cfg.checkpoint_dir.empty())
          cfg.checkpoint_dir = (std::filesystem::path(cfg.checkpoint_dir) / ("run" + std::to_string(i))).string();
        out.runs[i] = train<Real>(cfg, mcfg, data, tcfg.seed + i);
      },
      threads);
  const auto acc = out.test_accuracies();
  out.test_accuracy = summarize(acc);
  if (reference) out.significance = compare_runs(acc, *reference, alt);
  return out;
}

// --- reports -----------------------------------------------------------------

inline nlohmann::json evaluation_json(const Evaluation& ev, const data::LabelMap& labels) {
  nlohmann::json per_class = nlohmann::json::array();
  for (const auto& c : ev.per_class)
    per_class.push_back({{"label", c.label}, {"count", c.count}, {"accuracy", c.accuracy}});
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t r = 0; r < ev.confusion.size(); ++r)
    rows.push_back({{"label", labels.name(r)}, {"predicted", ev.confusion[r]}});
  return {{"accuracy", ev.accuracy}, {"loss", ev.loss}, {"per_class_accuracy", per_class}, {"confusion_counts", rows}};
}

inline nlohmann::json run_json(const RunResult& r, const data::LabelMap& labels) {
  nlohmann::json epochs = nlohmann::json::array();
  for (const auto& e : r.epochs) {
    nlohmann::json je{{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"val_loss", e.val_loss},
                      {"val_accuracy", e.val_accuracy}};
    if (e.train_accuracy) je["train_accuracy"] = *e.train_accuracy;
    epochs.push_back(je);
  }
  return {{"seed", r.seed},
          {"epochs", epochs},
          {"best_epoch", r.best_epoch},
          {"best_val_loss", r.best_val_loss},
          {"test_accuracy", r.test.accuracy},
          {"test", evaluation_json(r.test, labels)}};
}

/// Full report. Contains no timestamps or paths, so identical inputs give
/// identical bytes.
inline nlohmann::json report_json(const TrainConfig& tcfg, const model::ModelConfig& mcfg,
                                  const data::LabelMap& labels, const ProtocolResult& p) {
  nlohmann::json runs = nlohmann::json::array();
  nlohmann::json seeds = nlohmann::json::array();
  for (const auto& r : p.runs) {
    runs.push_back(run_json(r, labels));
    seeds.push_back(r.seed);
  }
  auto tc = nlohmann::json(tcfg);
  tc.erase("checkpoint_dir");
  nlohmann::json j{{"ablation", std::string(model::to_string(mcfg.ablation))},
                   {"model", mcfg},
                   {"train", tc},
                   {"labels", labels},
                   {"parameter_count", p.runs.empty() ? 0 : p.runs.front().parameter_count},
                   {"seeds", seeds},
                   {"runs", runs},
                   {"test_accuracies", p.test_accuracies()},
                   {"aggregate", {{"mean", p.test_accuracy.mean}, {"std", p.test_accuracy.stddev}}}};
  if (p.significance)
    j["significance"] = {{"reference", p.significance->reference},
                         {"u_statistic", p.significance->u_statistic},
                         {"p_value", p.significance->p_value},
                         {"exact", p.significance->exact},
                         {"alternative", p.significance->alternative}};
  return j;
}

inline ReferenceRuns reference_from_report(const nlohmann::json& report) {
  ReferenceRuns r;
  r.name = report.value("ablation", std::string("reference"));
  r.test_accuracies = report.at("test_accuracies").get<std::vector<double>>();
  if (r.test_accuracies.empty()) throw std::invalid_argument("reference report has no test accuracies");
  return r;
}

inline std::string epochs_csv(const RunResult& r) {
  std::ostringstream out;
  out.precision(17);
  out << "epoch,train_loss,val_loss,val_acc\n";
  for (const auto& e : r.epochs)
    out << e.epoch << ',' << e.train_loss << ',' << e.val_loss << ',' << e.val_accuracy << '\n';
  return out.str();
}

}  // namespace pdac::training
