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

// Subcommand bodies of the pdac tool. Each returns a process exit code and
// writes human-readable progress to `log`.

#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pdac/cli/run_config.hpp"
#include "pdac/data/dataset.hpp"
#include "pdac/data/synth.hpp"
#include "pdac/training/gates.hpp"
#include "pdac/training/selfcheck.hpp"
#include "pdac/training/trainer.hpp"

namespace pdac::cli {

namespace fs = std::filesystem;

inline void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

inline std::string report_text(const nlohmann::json& j) { return j.dump(2) + "\n"; }

inline std::optional<data::FeatureLookup> load_cache(const std::string& path) {
  if (path.empty()) return std::nullopt;
  return data::index_cache(features::read_feature_cache(path));
}

/// Reads the corpus in `dir`, extracts (or looks up) features and sizes the
/// classifier to the training label set.
inline training::Dataset load_dataset(const fs::path& dir, RunConfig& cfg) {
  const auto corpus = data::load_corpus(dir);
  const auto cache = load_cache(cfg.feature_cache);
  const data::FeatureLookup* lookup = cache ? &*cache : nullptr;
  training::Dataset d;
  d.labels = corpus.labels;
  d.train = data::load_examples(corpus.train, d.labels, {}, lookup);
  d.validation = data::load_examples(corpus.validation, d.labels, {}, lookup);
  d.test = data::load_examples(corpus.test, d.labels, {}, lookup);
  cfg.model.n_classes = d.labels.size();
  return d;
}

inline data::Manifest split_manifest(const fs::path& corpus, const std::string& split) {
  if (split != "train" && split != "validation" && split != "test")
    throw ConfigError("split must be train, validation or test, got '" + split + "'");
  return data::read_manifest(corpus / (split + ".tsv"));
}

// --- extract -----------------------------------------------------------------

/// `source` is a manifest file or a corpus directory (all three splits).
inline int cmd_extract(const fs::path& source, const fs::path& out_path, std::ostream& log) {
  std::vector<data::Manifest> manifests;
  if (fs::is_directory(source)) {
    for (const char* split : {"train", "validation", "test"})
      if (fs::exists(source / (std::string(split) + ".tsv")))
        manifests.push_back(data::read_manifest(source / (std::string(split) + ".tsv")));
    if (manifests.empty()) throw std::runtime_error("no manifests found in " + source.string());
  } else {
    manifests.push_back(data::read_manifest(source));
  }
  std::vector<features::CachedUtterance> records;
  for (const auto& m : manifests) {
    std::vector<std::string> names;
    for (const auto& e : m.entries) names.push_back(e.label());
    const auto labels = data::LabelMap::from_labels(names);
    for (auto& ex : data::load_examples(m, labels)) {
      log << ex.id << '\t' << ex.features.size() << '\n';
      records.push_back({std::move(ex.id), std::move(ex.features)});
    }
  }
  if (out_path.has_parent_path()) fs::create_directories(out_path.parent_path());
  features::write_feature_cache(out_path.string(), records);
  log << "wrote " << records.size() << " utterances to " << out_path.string() << '\n';
  return 0;
}

// --- synth -------------------------------------------------------------------

inline int cmd_synth(const data::SynthConfig& cfg, const fs::path& out_dir, std::ostream& log) {
  const auto corpus = data::synth_generate(cfg, out_dir);
  log << "wrote " << corpus.train.entries.size() << " train, " << corpus.validation.entries.size()
      << " validation and " << corpus.test.entries.size() << " test utterances to " << out_dir.string() << '\n';
  return 0;
}

// --- train / protocol --------------------------------------------------------

inline training::Alternative parse_alternative(const std::string& s) {
  if (s == "two-sided") return training::Alternative::two_sided;
  if (s == "greater") return training::Alternative::greater;
  if (s == "less") return training::Alternative::less;
  throw ConfigError("alternative must be two-sided, greater or less, got '" + s + "'");
}

struct ProtocolArgs {
  fs::path corpus;
  fs::path out_dir;
  std::optional<fs::path> reference;
  training::Alternative alternative = training::Alternative::two_sided;
};

/// Trains cfg.train.runs models and writes report.json plus per-run
/// run<i>/epochs.csv and run<i>/best.ckpt under out_dir.
inline int cmd_protocol(RunConfig cfg, const ProtocolArgs& args, std::ostream& log) {
  std::optional<training::ReferenceRuns> reference;
  if (args.reference) {
    std::ifstream in(*args.reference);
    if (!in) throw std::runtime_error("cannot open reference report " + args.reference->string());
    reference = training::reference_from_report(nlohmann::json::parse(in));
  }
  const auto data = load_dataset(args.corpus, cfg);
  cfg.model.validate();
  cfg.train.checkpoint_dir = args.out_dir.string();
  log << "ablation " << model::to_string(cfg.model.ablation) << ": " << cfg.train.runs << " run(s), "
      << data.train.size() << " train / " << data.validation.size() << " validation / " << data.test.size()
      << " test, " << data.labels.size() << " classes\n";
  const auto result = cfg.train.double_precision
                          ? training::run_protocol<double>(cfg.train, cfg.model, data, reference, args.alternative)
                          : training::run_protocol<float>(cfg.train, cfg.model, data, reference, args.alternative);
  for (std::size_t i = 0; i < result.runs.size(); ++i) {
    const auto& r = result.runs[i];
    write_text(args.out_dir / ("run" + std::to_string(i)) / "epochs.csv", training::epochs_csv(r));
    log << "run " << i << " seed " << r.seed << ": best epoch " << r.best_epoch << ", test accuracy "
        << r.test.accuracy << '\n';
  }
  write_text(args.out_dir / "report.json", report_text(training::report_json(cfg.train, cfg.model, data.labels, result)));
  log << "mean test accuracy " << result.test_accuracy.mean << " (std " << result.test_accuracy.stddev << ")\n";
  if (result.significance)
    log << "vs " << result.significance->reference << ": U = " << result.significance->u_statistic
        << ", p = " << result.significance->p_value << " (" << result.significance->alternative << ")\n";
  return 0;
}

/// A single run with seed cfg.train.seed; files land directly in out_dir.
inline int cmd_train(RunConfig cfg, const fs::path& corpus, const fs::path& out_dir, std::ostream& log) {
  auto data = load_dataset(corpus, cfg);
  cfg.model.validate();
  cfg.train.runs = 1;
  cfg.train.checkpoint_dir = out_dir.string();
  log << "training " << model::to_string(cfg.model.ablation) << " on " << data.train.size() << " utterances, "
      << data.labels.size() << " classes\n";
  training::ProtocolResult result;
  result.runs.push_back(cfg.train.double_precision
                            ? training::train<double>(cfg.train, cfg.model, data, cfg.train.seed)
                            : training::train<float>(cfg.train, cfg.model, data, cfg.train.seed));
  result.test_accuracy = training::summarize(result.test_accuracies());
  const auto& r = result.runs.front();
  for (const auto& e : r.epochs)
    log << "epoch " << e.epoch << " train_loss " << e.train_loss << " val_loss " << e.val_loss << " val_acc "
        << e.val_accuracy << '\n';
  write_text(out_dir / "epochs.csv", training::epochs_csv(r));
  write_text(out_dir / "report.json", report_text(training::report_json(cfg.train, cfg.model, data.labels, result)));
  log << "best epoch " << r.best_epoch << ", test accuracy " << r.test.accuracy << '\n';
  return 0;
}

// --- eval / inspect-gates ----------------------------------------------------

struct CheckpointArgs {
  fs::path checkpoint;
  fs::path corpus;
  std::string split = "test";
  std::string feature_cache;
  bool double_precision = false;
};

inline std::vector<model::Example> checkpoint_examples(const training::Checkpoint& ckpt, const CheckpointArgs& a) {
  const auto cache = load_cache(a.feature_cache);
  return data::load_examples(split_manifest(a.corpus, a.split), ckpt.labels, {}, cache ? &*cache : nullptr);
}

inline int cmd_eval(const CheckpointArgs& a, const std::optional<fs::path>& out, std::ostream& log) {
  const auto ckpt = training::load_checkpoint(a.checkpoint.string());
  const auto items = checkpoint_examples(ckpt, a);
  const auto ev = a.double_precision ? training::evaluate_checkpoint<double>(ckpt, items, ckpt.labels)
                                     : training::evaluate_checkpoint<float>(ckpt, items, ckpt.labels);
  auto j = training::evaluation_json(ev, ckpt.labels);
  j["split"] = a.split;
  j["utterances"] = items.size();
  if (out) write_text(*out, report_text(j));
  log << a.split << " accuracy " << ev.accuracy << " loss " << ev.loss << " on " << items.size() << " utterances\n";
  return 0;
}

inline int cmd_inspect_gates(const CheckpointArgs& a, const fs::path& out, std::ostream& log) {
  const auto ckpt = training::load_checkpoint(a.checkpoint.string());
  const auto items = checkpoint_examples(ckpt, a);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  std::ofstream os(out, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + out.string());
  auto run = [&](auto m) { return training::export_gate_traces(m, items, ckpt.normalizer, ckpt.labels, os); };
  const auto summary = a.double_precision ? run(ckpt.make_model<double>()) : run(ckpt.make_model<float>());
  for (const auto& [label, s] : summary) {
    double mean = 0;
    const auto edges = s.global.edges();
    const auto mass = s.global.mass();
    for (std::size_t b = 0; b < mass.size(); ++b) mean += mass[b] * 0.5 * (edges[b] + edges[b + 1]);
    log << label << ": " << s.utterances << " utterances, binned mean global score " << mean << '\n';
  }
  log << "wrote gate traces for " << items.size() << " utterances to " << out.string() << '\n';
  return 0;
}

// --- selfcheck ---------------------------------------------------------------

inline int cmd_selfcheck(std::uint64_t seed, double analytic_scale, std::ostream& log) {
  const auto report = training::model_selfcheck(seed, analytic_scale);
  std::size_t entries = 0;
  for (const auto& p : report.parameters) {
    if (p.flagged) log << "  " << p.name << ": " << p.flagged << " entries above tolerance, max rel error "
                       << p.max_rel_error << '\n';
    entries += 1;
  }
  log << (report.passed() ? "PASS" : "FAIL") << " gradient check over " << entries
      << " parameter tensors, max rel error " << report.max_rel_error() << " (tolerance " << report.tolerance << ")\n";
  return report.passed() ? 0 : 1;
}

}  // namespace pdac::cli
