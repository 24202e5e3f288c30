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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "pdac/data/dataset.hpp"
#include "pdac/data/synth.hpp"
#include "pdac/model/network.hpp"

namespace {

using namespace pdac::data;
namespace fs = std::filesystem;

fs::path fresh_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("pdac_data_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

pdac::features::Waveform tone(double seconds) {
  pdac::features::Waveform w;
  for (std::size_t i = 0; i < static_cast<std::size_t>(seconds * 8000); ++i)
    w.samples.push_back(0.3 * std::sin(0.1 * static_cast<double>(i)));
  return w;
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

TEST(CombineLabels, CanonicalForms) {
  EXPECT_EQ(combine_labels({"affirm"}), "affirm");
  EXPECT_EQ(combine_labels({"request", "ack"}), "ack+request");
  EXPECT_EQ(combine_labels({"bye", "ack", "thankyou"}), "ack+bye+thankyou");
  EXPECT_THROW(combine_labels({}), std::invalid_argument);
}

TEST(CombineLabels, OrderIndependentAndIdempotent) {
  std::vector<std::string> xs{"inform", "ack", "reqalts", "bye"};
  std::sort(xs.begin(), xs.end());
  const auto canonical = combine_labels(xs);
  do {
    EXPECT_EQ(combine_labels(xs), canonical);
  } while (std::next_permutation(xs.begin(), xs.end()));
  std::vector<std::string> parts;
  std::stringstream ss(canonical);
  for (std::string p; std::getline(ss, p, '+');) parts.push_back(p);
  EXPECT_EQ(combine_labels(parts), canonical);
}

TEST(Wav, RoundTripsAtSixteenBitPrecision) {
  const auto dir = fresh_dir("wav");
  auto w = tone(0.1);
  w.samples.push_back(1.5);  // clipped
  write_wav((dir / "a.wav").string(), w);
  const auto back = read_wav((dir / "a.wav").string());
  EXPECT_EQ(back.sample_rate, 8000.0);
  ASSERT_EQ(back.samples.size(), w.samples.size());
  for (std::size_t i = 0; i + 1 < w.samples.size(); ++i) EXPECT_NEAR(back.samples[i], w.samples[i], 1.0 / 32767);
  EXPECT_NEAR(back.samples.back(), 1.0, 1e-4);
  EXPECT_EQ(fs::file_size(dir / "a.wav"), 44 + 2 * w.samples.size());
}

TEST(Wav, RejectsNonPcm16Mono) {
  const auto dir = fresh_dir("wav_bad");
  write_wav((dir / "a.wav").string(), tone(0.01));
  auto bytes = slurp(dir / "a.wav");
  bytes[22] = 2;  // stereo
  write_text(dir / "b.wav", bytes);
  EXPECT_THROW(read_wav((dir / "b.wav").string()), pdac::io::FormatError);
  write_text(dir / "c.wav", "RIFX....");
  EXPECT_THROW(read_wav((dir / "c.wav").string()), pdac::io::FormatError);
}

class ManifestTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir = fresh_dir("manifest");
    fs::create_directories(dir / "audio");
    for (const char* n : {"u1", "u2", "u3"}) write_wav((dir / "audio" / (std::string(n) + ".wav")).string(), tone(0.3));
  }
  fs::path dir;
};

TEST_F(ManifestTest, ParsesValidLines) {
  write_text(dir / "m.tsv", "u1\taudio/u1.wav\taffirm\nu2\taudio/u2.wav\trequest|ack\r\n\nu3\taudio/u3.wav\tbye\n");
  const auto m = read_manifest(dir / "m.tsv");
  ASSERT_EQ(m.entries.size(), 3u);
  EXPECT_EQ(m.entries[1].label(), "ack+request");
  EXPECT_EQ(m.entries[2].audio, dir / "audio/u3.wav");
}

TEST_F(ManifestTest, DuplicateIdIsNamed) {
  write_text(dir / "m.tsv", "u1\taudio/u1.wav\ta\nu1\taudio/u2.wav\tb\n");
  try {
    read_manifest(dir / "m.tsv");
    FAIL();
  } catch (const ManifestError& e) {
    EXPECT_NE(std::string(e.what()).find("'u1'"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find(":2:"), std::string::npos);
  }
}

TEST_F(ManifestTest, MalformedLineReportsLineNumber) {
  write_text(dir / "m.tsv", "u1\taudio/u1.wav\ta\nu2 audio/u2.wav b\n");
  try {
    read_manifest(dir / "m.tsv");
    FAIL();
  } catch (const ManifestError& e) {
    EXPECT_NE(std::string(e.what()).find("m.tsv:2"), std::string::npos) << e.what();
  }
  write_text(dir / "m.tsv", "u1\taudio/u1.wav\ta||b\n");
  EXPECT_THROW(read_manifest(dir / "m.tsv"), ManifestError);
}

TEST_F(ManifestTest, MissingAudioListsIds) {
  write_text(dir / "m.tsv", "u1\taudio/u1.wav\ta\nghost\taudio/none.wav\tb\nspook\tx.wav\tb\n");
  try {
    read_manifest(dir / "m.tsv");
    FAIL();
  } catch (const ManifestError& e) {
    EXPECT_NE(std::string(e.what()).find("ghost, spook"), std::string::npos) << e.what();
  }
}

TEST_F(ManifestTest, LabelMapComesFromTrainAndUnseenIsUnknown) {
  write_text(dir / "train.tsv", "u1\taudio/u1.wav\tinform\nu2\taudio/u2.wav\tack|affirm\n");
  write_text(dir / "validation.tsv", "u3\taudio/u3.wav\tinform\n");
  write_text(dir / "test.tsv", "u3\taudio/u3.wav\tthankyou\n");
  const auto c = load_corpus(dir);
  EXPECT_EQ(c.labels.names(), (std::vector<std::string>{"ack+affirm", "inform"}));
  EXPECT_EQ(c.labels.index("thankyou"), c.labels.unknown());
  EXPECT_EQ(c.labels.name(c.labels.unknown()), "<unk>");
  const auto ex = load_examples(c.test, c.labels, {}, nullptr, 1);
  EXPECT_EQ(ex[0].label, 2u);
  const nlohmann::json j = c.labels;
  EXPECT_EQ(j.get<LabelMap>(), c.labels);
}

TEST_F(ManifestTest, RoundTripsThroughWriter) {
  Manifest m{{{"u1", dir / "audio/u1.wav", {"b", "a"}}, {"u2", dir / "audio/u2.wav", {"c"}}}};
  write_manifest(dir / "out.tsv", m);
  EXPECT_EQ(slurp(dir / "out.tsv"), "u1\taudio/u1.wav\tb|a\nu2\taudio/u2.wav\tc\n");
  EXPECT_EQ(read_manifest(dir / "out.tsv").entries[1].audio, m.entries[1].audio);
}

TEST_F(ManifestTest, ExamplesPreferCachedFeaturesAndNameBrokenAudio) {
  write_text(dir / "m.tsv", "u1\taudio/u1.wav\ta\nu2\taudio/u2.wav\ta\n");
  const auto m = read_manifest(dir / "m.tsv");
  const auto labels = build_label_map(m);
  const auto direct = load_examples(m, labels, {}, nullptr, 2);
  EXPECT_EQ(direct[0].features.size(), 28u);
  FeatureLookup cache{{"u2", direct[0].features}};
  cache["u2"].frames.pop_back();
  const auto cached = load_examples(m, labels, {}, &cache, 2);
  EXPECT_EQ(cached[0].features, direct[0].features);
  EXPECT_EQ(cached[1].features.size(), 27u);
  write_text(dir / "audio/u2.wav", "garbage");
  try {
    load_examples(m, labels, {}, nullptr, 2);
    FAIL();
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("'u2'"), std::string::npos);
  }
}

TEST(MakeBatches, SizesAndDeterminism) {
  const auto b = make_batches(10, 4, 3);
  ASSERT_EQ(b.size(), 3u);
  EXPECT_EQ(b[0].size(), 4u);
  EXPECT_EQ(b[1].size(), 4u);
  EXPECT_EQ(b[2].size(), 2u);
  EXPECT_EQ(make_batches(10, 4, 3), b);
  EXPECT_NE(make_batches(10, 4, 3, 1), b);
  std::set<std::size_t> all;
  for (const auto& batch : b) all.insert(batch.begin(), batch.end());
  EXPECT_EQ(all.size(), 10u);
  EXPECT_EQ(sequential_batches(5, 2), (std::vector<std::vector<std::size_t>>{{0, 1}, {2, 3}, {4}}));
  EXPECT_THROW(make_batches(3, 0, 1), std::invalid_argument);
}

TEST(Synth, BalancedAndByteIdenticalForASeed) {
  SynthConfig cfg{.train_per_class = 3, .validation_per_class = 1, .test_per_class = 2, .seed = 17};
  const auto a = fresh_dir("synth_a"), b = fresh_dir("synth_b");
  const auto ca = synth_generate(cfg, a);
  synth_generate(cfg, b);
  EXPECT_EQ(ca.train.entries.size(), 12u);
  EXPECT_EQ(ca.validation.entries.size(), 4u);
  EXPECT_EQ(ca.test.entries.size(), 8u);
  std::map<std::string, int> hist;
  for (const auto& e : ca.train.entries) ++hist[e.label()];
  for (const auto& [label, count] : hist) EXPECT_EQ(count, 3) << label;
  EXPECT_EQ(ca.labels.size(), 4u);
  for (const auto& entry : fs::directory_iterator(a / "wav"))
    EXPECT_EQ(slurp(entry.path()), slurp(b / "wav" / entry.path().filename()));
  EXPECT_EQ(slurp(a / "train.tsv"), slurp(b / "train.tsv"));
  const auto reloaded = load_corpus(a);
  EXPECT_EQ(reloaded.train.entries.size(), 12u);
  EXPECT_THROW(synth_generate({.train_per_class = 0}, a), std::invalid_argument);
}

TEST(Synth, DurationsAndLevelsInRange) {
  for (auto cls : kSynthClasses)
    for (std::size_t i = 0; i < 5; ++i) {
      auto rng = synth_rng(3, 0, cls, i);
      const auto w = synth_waveform(cls, rng);
      const double seconds = static_cast<double>(w.samples.size()) / 8000;
      EXPECT_GE(seconds, 0.8);
      EXPECT_LE(seconds, 1.5);
      for (double s : w.samples) ASSERT_LE(std::abs(s), 0.95 + 1e-12);
    }
}

TEST(Synth, PitchContoursFollowTheirClass) {
  int rising_ok = 0, falling_ok = 0;
  const int n = 20;
  for (int i = 0; i < n; ++i) {
    for (auto cls : {SynthClass::rising, SynthClass::falling}) {
      auto rng = synth_rng(5, 0, cls, static_cast<std::size_t>(i));
      const auto track = pdac::features::track_pitch(synth_waveform(cls, rng));
      std::vector<double> lp;
      for (double f : track.pitch_hz) lp.push_back(std::log(f));
      const double slope = fitted_slope(lp);
      (cls == SynthClass::rising ? rising_ok : falling_ok) += cls == SynthClass::rising ? slope > 0 : slope < 0;
    }
  }
  EXPECT_GE(rising_ok, 19);
  EXPECT_GE(falling_ok, 19);
}

TEST(Synth, BurstPositionShowsInEnergyFeature) {
  for (auto cls : {SynthClass::late_burst, SynthClass::early_burst})
    for (std::size_t i = 0; i < 15; ++i) {
      auto rng = synth_rng(6, 2, cls, i);
      const auto seq = pdac::features::extract_features(synth_waveform(cls, rng));
      std::size_t arg = 0;
      for (std::size_t k = 0; k < seq.size(); ++k)
        if (seq.frames[k].energy[0] > seq.frames[arg].energy[0]) arg = k;
      if (cls == SynthClass::late_burst) EXPECT_GE(3 * arg, 2 * seq.size()) << i;
      else EXPECT_LT(3 * arg, seq.size()) << i;
    }
}

TEST(Batching, PaddedSyntheticUtterancesMatchSingleForward) {
  using namespace pdac::model;
  std::vector<Example> ex;
  for (auto cls : kSynthClasses) {
    auto rng = synth_rng(8, 1, cls, 0);
    ex.push_back({to_string(cls), pdac::features::extract_features(synth_waveform(cls, rng)), 0});
  }
  const auto norm = Normalizer::fit(ex);
  ModelConfig cfg;
  cfg.prosody_embed_dim = 4;
  cfg.lstm_layers = 2;
  cfg.lstm_hidden = 8;
  cfg.cnn_filters = 3;
  cfg.affinity_dim = 4;
  cfg.n_classes = 4;
  Model<double> m(cfg);
  m.init(2);
  std::vector<const Example*> ptrs;
  for (const auto& e : ex) ptrs.push_back(&e);
  pdac::numerics::Tape<double> tape;
  const auto all = m.forward(tape, make_batch<double>(std::span<const Example* const>(ptrs), norm)).logits.value();
  for (std::size_t b = 0; b < ex.size(); ++b) {
    pdac::numerics::Tape<double> t1;
    const auto one = m.forward(t1, make_batch<double>(ex[b], norm)).logits.value();
    for (std::size_t c = 0; c < 4; ++c) EXPECT_NEAR(one(0, c), all(b, c), 1e-5);
  }
}

}  // namespace
