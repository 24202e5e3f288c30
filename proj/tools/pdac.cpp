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

// Command-line front end: feature extraction, synthetic corpora, training,
// evaluation, gate inspection and a gradient self-check.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pdac/cli/commands.hpp"

namespace {

using namespace pdac;

struct TrainingFlags {
  std::string config;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> runs;
  std::string feature_cache;

  void attach(CLI::App* app, bool with_runs) {
    app->add_option("--config", config, "JSON file with configuration keys")->check(CLI::ExistingFile);
    app->add_option("--set", overrides, "Override one key, key=value (repeatable)")->allow_extra_args(false);
    app->add_option("--seed", seed, "Base random seed");
    app->add_option("--feature-cache", feature_cache, "Feature cache written by extract")->check(CLI::ExistingFile);
    if (with_runs) app->add_option("--runs", runs, "Number of independent runs");
  }

  cli::RunConfig resolve() const {
    cli::RunConfig c;
    if (!config.empty()) c = cli::apply_file(c, config);
    for (const auto& o : overrides) c = cli::apply_override(c, o);
    if (seed) c.train.seed = *seed;
    if (runs) c.train.runs = *runs;
    if (!feature_cache.empty()) c.feature_cache = feature_cache;
    c.train.validate();
    return c;
  }
};

void attach_checkpoint_args(CLI::App* app, cli::CheckpointArgs& a) {
  app->add_option("checkpoint", a.checkpoint, "Checkpoint file")->required()->check(CLI::ExistingFile);
  app->add_option("corpus", a.corpus, "Corpus directory with train/validation/test.tsv")
      ->required()
      ->check(CLI::ExistingDirectory);
  app->add_option("--split", a.split, "Split to use")->check(CLI::IsMember({"train", "validation", "test"}));
  app->add_option("--feature-cache", a.feature_cache, "Feature cache written by extract")->check(CLI::ExistingFile);
  app->add_flag("--double", a.double_precision, "Run the model in 64-bit floating point");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dialogue-act classification from audio with prosody gating"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Help for every subcommand");
  app.footer("Worker threads: PDAC_THREADS (default: all cores).\nConfiguration keys: " + cli::valid_keys_text());

  int status = 0;

  // extract
  std::string extract_source, extract_out;
  auto* extract = app.add_subcommand("extract", "Compute features for a manifest or corpus and write a cache");
  extract->add_option("source", extract_source, "Manifest file or corpus directory")->required()->check(CLI::ExistingPath);
  extract->add_option("--out", extract_out, "Feature cache to write")->required();
  extract->callback([&] { status = cli::cmd_extract(extract_source, extract_out, std::cout); });

  // synth
  data::SynthConfig synth_cfg;
  std::optional<std::size_t> synth_val, synth_test;
  std::string synth_out;
  auto* synth = app.add_subcommand("synth", "Generate a four-class synthetic corpus with prosodic cues");
  synth->add_option("--n", synth_cfg.train_per_class, "Training utterances per class")->check(CLI::PositiveNumber);
  synth->add_option("--n-validation", synth_val, "Validation utterances per class (default n/2)");
  synth->add_option("--n-test", synth_test, "Test utterances per class (default n/2)");
  synth->add_option("--seed", synth_cfg.seed, "Random seed");
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->callback([&] {
    const auto half = std::max<std::size_t>(1, synth_cfg.train_per_class / 2);
    synth_cfg.validation_per_class = synth_val.value_or(half);
    synth_cfg.test_per_class = synth_test.value_or(half);
    status = cli::cmd_synth(synth_cfg, synth_out, std::cout);
  });

  // train
  TrainingFlags train_flags;
  std::string train_corpus, train_out = "pdac-run";
  auto* train = app.add_subcommand("train", "Train one model; writes report.json, epochs.csv and best.ckpt");
  train->add_option("corpus", train_corpus, "Corpus directory")->required()->check(CLI::ExistingDirectory);
  train->add_option("--out", train_out, "Output directory");
  train_flags.attach(train, false);
  train->callback([&] { status = cli::cmd_train(train_flags.resolve(), train_corpus, train_out, std::cout); });

  // protocol
  TrainingFlags proto_flags;
  cli::ProtocolArgs proto_args;
  proto_args.out_dir = "pdac-protocol";
  std::string proto_reference, proto_alternative = "two-sided";
  auto* protocol = app.add_subcommand("protocol", "Independent runs with aggregate statistics and a significance test");
  protocol->add_option("corpus", proto_args.corpus, "Corpus directory")->required()->check(CLI::ExistingDirectory);
  protocol->add_option("--out", proto_args.out_dir, "Output directory");
  protocol->add_option("--reference", proto_reference, "report.json of the arm to compare against")
      ->check(CLI::ExistingFile);
  protocol->add_option("--alternative", proto_alternative, "two-sided, greater or less")
      ->check(CLI::IsMember({"two-sided", "greater", "less"}));
  proto_flags.attach(protocol, true);
  protocol->callback([&] {
    if (!proto_reference.empty()) proto_args.reference = proto_reference;
    proto_args.alternative = cli::parse_alternative(proto_alternative);
    status = cli::cmd_protocol(proto_flags.resolve(), proto_args, std::cout);
  });

  // eval
  cli::CheckpointArgs eval_args;
  std::string eval_out;
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on one split");
  attach_checkpoint_args(eval, eval_args);
  eval->add_option("--out", eval_out, "Write the evaluation as JSON");
  eval->callback([&] {
    status = cli::cmd_eval(eval_args, eval_out.empty() ? std::nullopt : std::optional<std::filesystem::path>(eval_out),
                           std::cout);
  });

  // inspect-gates
  cli::CheckpointArgs gate_args;
  std::string gate_out;
  auto* gates = app.add_subcommand("inspect-gates", "Export per-utterance gate histograms as JSON lines");
  attach_checkpoint_args(gates, gate_args);
  gates->add_option("--out", gate_out, "JSONL file to write")->required();
  gates->callback([&] { status = cli::cmd_inspect_gates(gate_args, gate_out, std::cout); });

  // selfcheck
  std::uint64_t check_seed = 1;
  double check_scale = 1.0;
  auto* selfcheck = app.add_subcommand("selfcheck", "Finite-difference gradient check of a small full model");
  selfcheck->add_option("--seed", check_seed, "Random seed");
  selfcheck->add_option("--analytic-scale", check_scale,
                        "Multiply analytic gradients before comparing (anything but 1 must fail)");
  selfcheck->callback([&] { status = cli::cmd_selfcheck(check_seed, check_scale, std::cout); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const training::DivergedAtStep& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return status;
}
