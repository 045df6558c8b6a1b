// Copyright 2026 The TokenForge Authors.
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

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "doctest.h"
#include "signals.h"
#include "tokenforge/error.h"
#include "tokenforge/pipeline.h"
#include "tokenforge/pipeline_run.h"
#include "tokenforge/random.h"
#include "tokenforge/text.h"

namespace audio = tokenforge::audio;
namespace fs = std::filesystem;
namespace pl = tokenforge::pipeline;
using tokenforge::Error;
using tokenforge::ErrorKind;
using tokenforge::testing::AppendTone;
using tokenforge::testing::ToneBetweenSilence;

namespace {

ErrorKind KindOf(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::kInvalidInput;
}

// Two-row Levenshtein, written independently of the library.
std::size_t Lev(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  std::iota(prev.begin(), prev.end(), std::size_t{0});
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] != b[j - 1])});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

std::vector<std::string> Words(const std::string& s) {
  return tokenforge::text::SplitWhitespace(s);
}

std::string NumberedWords(int n, int substitute_first) {
  std::string s;
  for (int i = 0; i < n; ++i) {
    if (i) s += ' ';
    s += (i < substitute_first ? "x" : "w") + std::to_string(i);
  }
  return s;
}

pl::UtteranceRecord RecordWithRatio(const std::string& id, double ratio) {
  pl::UtteranceRecord r;
  r.id = id;
  r.speech_token_count = 100;
  r.text_token_count = 10;
  r.length_ratio = ratio;
  return r;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name)
      : path(fs::temp_directory_path() / ("tokenforge_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("config validation and json") {
  pl::PipelineConfig cfg;
  CHECK_NOTHROW(cfg.Validate());
  CHECK(cfg.comma_gap_ms == 300);
  CHECK(cfg.remove_punct_gap_ms == 50);
  CHECK(cfg.pairwise_wer_gate == 0.15);
  CHECK(cfg.peak_target == 0.6);
  CHECK(cfg.low_trim_frac == 0.01);
  CHECK(cfg.high_trim_frac == 0.05);
  const auto round = pl::PipelineConfigFromJson(pl::PipelineConfigToJson(cfg));
  CHECK(pl::PipelineConfigToJson(round) == pl::PipelineConfigToJson(cfg));

  CHECK(KindOf([] { pl::PipelineConfigFromJson({{"low_trim_frac", 0.5}, {"high_trim_frac", 0.5}}); }) ==
        ErrorKind::kConfig);
  CHECK(KindOf([] { pl::PipelineConfigFromJson({{"pairwise_wer_gate", 1.5}}); }) == ErrorKind::kConfig);
  CHECK(KindOf([] { pl::PipelineConfigFromJson({{"frame_msec", 10}}); }) == ErrorKind::kConfig);
  CHECK(pl::PipelineConfigFromJson({{"frame_ms", 20}}).frame_ms == 20);
}

TEST_CASE("segment detection") {
  pl::PipelineConfig cfg;
  SUBCASE("silence") {
    const auto a = ToneBetweenSilence(1.0, 0.0, 1.0);
    CHECK(pl::DetectSegments(a, cfg).empty());
  }
  SUBCASE("one tone") {
    const auto a = ToneBetweenSilence(1.0, 2.0, 1.3);
    const auto segs = pl::DetectSegments(a, cfg);
    REQUIRE(segs.size() == 1);
    CHECK(std::abs(segs[0].start_s - 1.0) <= 0.025);
    CHECK(std::abs(segs[0].end_s - 3.0) <= 0.025);
  }
  SUBCASE("off-grid tone") {
    const auto a = ToneBetweenSilence(0.512, 1.337, 0.8, 0.2, 22050);
    const auto segs = pl::DetectSegments(a, cfg);
    REQUIRE(segs.size() == 1);
    CHECK(std::abs(segs[0].start_s - 0.512) <= 0.025);
    CHECK(std::abs(segs[0].end_s - 1.849) <= 0.025);
  }
  SUBCASE("70 s tone is capped") {
    const auto a = ToneBetweenSilence(0.5, 70.0, 0.5, 0.5, 8000);
    const auto segs = pl::DetectSegments(a, cfg);
    CHECK(segs.size() >= 3);
    double covered = 0.0;
    for (std::size_t i = 0; i < segs.size(); ++i) {
      CHECK(segs[i].end_s - segs[i].start_s <= 30.0);
      CHECK(segs[i].start_s < segs[i].end_s);
      if (i > 0) CHECK(segs[i].start_s >= segs[i - 1].end_s);
      covered += segs[i].end_s - segs[i].start_s;
    }
    CHECK(covered == doctest::Approx(70.0).epsilon(1e-3));
  }
  SUBCASE("short gaps merge, long gaps split") {
    audio::AudioBuffer a;
    AppendTone(&a, 0.5, 0.0);
    AppendTone(&a, 1.0, 0.5);
    AppendTone(&a, 0.15, 0.0);
    AppendTone(&a, 1.0, 0.5);
    AppendTone(&a, 0.3, 0.0);
    AppendTone(&a, 1.0, 0.5);
    AppendTone(&a, 0.5, 0.0);
    const auto segs = pl::DetectSegments(a, cfg);
    REQUIRE(segs.size() == 2);
    CHECK(segs[0].start_s == doctest::Approx(0.5).epsilon(0.05));
    CHECK(segs[0].end_s == doctest::Approx(2.65).epsilon(0.02));
    CHECK(segs[1].start_s == doctest::Approx(2.95).epsilon(0.02));
  }
  SUBCASE("long runs split at the quietest frame") {
    audio::AudioBuffer a;
    a.sample_rate_hz = 8000;
    AppendTone(&a, 20.0, 0.5);
    AppendTone(&a, 0.1, 0.0);  // merged dip
    AppendTone(&a, 20.0, 0.5);
    const auto segs = pl::DetectSegments(a, cfg);
    REQUIRE(segs.size() == 2);
    CHECK(segs[0].end_s > 20.0);
    CHECK(segs[0].end_s < 20.1);
  }
  SUBCASE("quiet signal below threshold") {
    const auto a = ToneBetweenSilence(0.5, 1.0, 0.5, 0.005);  // about -49 dBFS
    CHECK(pl::DetectSegments(a, cfg).empty());
  }
  SUBCASE("empty audio") {
    audio::AudioBuffer a;
    CHECK(KindOf([&] { pl::DetectSegments(a, cfg); }) == ErrorKind::kInvalidInput);
  }
}

TEST_CASE("random bursts never yield segments over the cap") {
  pl::PipelineConfig cfg;
  cfg.max_segment_s = 3.0;
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> dur(0.01, 4.0), amp(0.0, 0.8);
  for (int trial = 0; trial < 25; ++trial) {
    audio::AudioBuffer a;
    a.sample_rate_hz = 4000;
    for (int k = 0; k < 8; ++k) AppendTone(&a, dur(gen), k % 2 ? amp(gen) : 0.0, 300.0);
    const auto segs = pl::DetectSegments(a, cfg);
    const auto padded = pl::PadSegments(segs, a.duration_s(), cfg);
    for (std::size_t i = 0; i < segs.size(); ++i) {
      CHECK(segs[i].end_s - segs[i].start_s <= 3.0 + 1e-9);
      CHECK(padded[i].end_s - padded[i].start_s <= 3.0 + 1e-9);
      CHECK(padded[i].start_s <= segs[i].start_s);
      CHECK(padded[i].end_s >= segs[i].end_s);
      CHECK(padded[i].start_s >= 0.0);
      CHECK(padded[i].end_s <= a.duration_s() + 1e-12);
      if (i > 0) CHECK(padded[i].start_s >= padded[i - 1].end_s - 1e-12);
    }
  }
}

TEST_CASE("truncation screen") {
  pl::PipelineConfig cfg;
  SUBCASE("loud start") {
    const auto a = ToneBetweenSilence(0.0, 1.0, 0.5);
    CHECK_FALSE(pl::ScreenTruncation(a, cfg).keep);
  }
  SUBCASE("loud end") {
    const auto a = ToneBetweenSilence(0.5, 1.0, 0.0);
    CHECK_FALSE(pl::ScreenTruncation(a, cfg).keep);
  }
  SUBCASE("padded tone is trimmed") {
    const auto a = ToneBetweenSilence(0.5, 1.2, 0.5);
    const auto r = pl::ScreenTruncation(a, cfg);
    CHECK(r.keep);
    CHECK(std::abs(r.trimmed.duration_s() - 1.2) <= 0.025);
  }
  SUBCASE("off-grid padded tone") {
    // Each edge lands within one frame of the tone, outside it.
    const auto a = ToneBetweenSilence(0.4321, 1.0, 0.3, 0.4, 11025);
    const auto r = pl::ScreenTruncation(a, cfg);
    CHECK(r.keep);
    CHECK(r.trimmed.duration_s() >= 1.0 - 1e-9);
    CHECK(r.trimmed.duration_s() < 1.0 + 2 * 0.025);
  }
  SUBCASE("silence") {
    const auto a = ToneBetweenSilence(1.0, 0.0, 0.0);
    const auto r = pl::ScreenTruncation(a, cfg);
    CHECK(r.keep);
    CHECK(r.trimmed.samples.empty());
  }
}

TEST_CASE("transcript selection examples") {
  using H = pl::TranscriptHypothesis;
  const std::vector<H> same = {{"a", "the cat sat"}, {"b", "the cat sat"}, {"c", "The cat, sat."}};
  auto d = pl::SelectTranscript(same, 0.15, "en");
  CHECK(d.accepted);
  CHECK(d.average_wer == 0.0);
  CHECK(d.medoid == 0);

  const std::vector<H> disjoint = {{"a", "one two"}, {"b", "three four"}, {"c", "five six"}};
  d = pl::SelectTranscript(disjoint, 0.15, "en");
  CHECK_FALSE(d.accepted);
  CHECK(d.average_wer == 1.0);

  // Fifty words with 7 or 8 substitutions sit either side of the gate.
  const std::vector<H> at14 = {{"a", NumberedWords(50, 0)}, {"b", NumberedWords(50, 7)}};
  d = pl::SelectTranscript(at14, 0.15, "en");
  CHECK(d.average_wer == doctest::Approx(0.14).epsilon(1e-12));
  CHECK(d.accepted);
  const std::vector<H> at16 = {{"a", NumberedWords(50, 0)}, {"b", NumberedWords(50, 8)}};
  d = pl::SelectTranscript(at16, 0.15, "en");
  CHECK(d.average_wer == doctest::Approx(0.16).epsilon(1e-12));
  CHECK_FALSE(d.accepted);

  // Character tokenization for Chinese: one of six characters differs.
  const std::vector<H> zh = {{"a", "今天天气很好"}, {"b", "今天天气真好"}};
  d = pl::SelectTranscript(zh, 0.2, "zh");
  CHECK(d.average_wer == doctest::Approx(1.0 / 6));
  CHECK(d.accepted);

  // Ties go to the lowest system id regardless of position.
  const std::vector<H> tie = {{"z", "a b"}, {"m", "a c"}};
  CHECK(pl::SelectTranscript(tie, 0.9, "en").medoid == 1);

  CHECK(KindOf([] {
          const std::vector<H> one = {{"a", "x"}};
          pl::SelectTranscript(one, 0.15, "en");
        }) == ErrorKind::kNotEnoughEvidence);
}

TEST_CASE("transcript selection matches a brute-force medoid oracle") {
  std::mt19937_64 gen(99);
  const std::vector<std::string> vocab = {"a", "b", "c"};
  std::uniform_int_distribution<int> count(2, 5), len(1, 5), sym(0, 2);
  int mismatches = 0;
  for (int trial = 0; trial < 400; ++trial) {
    const int n = count(gen);
    std::vector<std::string> ids = {"s0", "s1", "s2", "s3", "s4"};
    std::shuffle(ids.begin(), ids.end(), gen);
    std::vector<pl::TranscriptHypothesis> hyps;
    for (int i = 0; i < n; ++i) {
      std::string s;
      for (int k = len(gen); k > 0; --k) s += vocab[sym(gen)] + " ";
      hyps.push_back({ids[i], s});
    }
    std::vector<long double> mean(n, 0.0L);
    long double total = 0.0L;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        if (i == j) continue;
        const auto a = Words(hyps[i].text), b = Words(hyps[j].text);
        const long double w = static_cast<long double>(Lev(a, b)) / std::max(a.size(), b.size());
        mean[i] += w / (n - 1);
        if (i < j) total += w;
      }
    }
    int best = 0;
    for (int i = 1; i < n; ++i) {
      if (mean[i] < mean[best] - 1e-12L ||
          (std::abs(mean[i] - mean[best]) <= 1e-12L && hyps[i].system_id < hyps[best].system_id)) {
        best = i;
      }
    }
    const long double average = total / (n * (n - 1) / 2);
    const auto d = pl::SelectTranscript(hyps, 0.5, "en");
    if (d.medoid != static_cast<std::size_t>(best)) ++mismatches;
    if (std::abs(d.average_wer - static_cast<double>(average)) > 1e-12) ++mismatches;

    // Order invariance of the decision and of the chosen system.
    auto shuffled = hyps;
    std::shuffle(shuffled.begin(), shuffled.end(), gen);
    const auto e = pl::SelectTranscript(shuffled, 0.5, "en");
    if (e.accepted != d.accepted) ++mismatches;
    if (shuffled[e.medoid].system_id != hyps[d.medoid].system_id) ++mismatches;
  }
  CHECK(mismatches == 0);
}

TEST_CASE("tokenize and render") {
  using V = std::vector<std::string>;
  CHECK(pl::TokenizeText("Hello, world!", "en") == V{"Hello", ",", "world", "!"});
  CHECK(pl::TokenizeText("don't (stop)", "en") == V{"don't", "(", "stop", ")"});
  CHECK(pl::TokenizeText("你好，世界", "zh") == V{"你", "好", "，", "世", "界"});
  CHECK(pl::RenderText(V{"Hello", ",", "world", "!"}, "en") == "Hello, world!");
  CHECK(pl::RenderText(V{"don't", "(", "stop", ")"}, "en") == "don't (stop)");
  CHECK(pl::RenderText(V{"你", "好", "，", "世", "界"}, "zh") == "你好，世界");
  for (const std::string s : {"a, b; c.", "well... ok?!", "“quoted” words", "x (y) z"}) {
    CHECK(pl::RenderText(pl::TokenizeText(s, "en"), "en") == s);
  }
  CHECK(pl::IsPausePunctuation("..."));
  CHECK(pl::IsPausePunctuation("？"));
  CHECK_FALSE(pl::IsPausePunctuation("\""));
  CHECK(pl::TextTokenCount("Hello, world!", "en") == 2);
  CHECK(pl::TextTokenCount("你好，世界", "zh") == 4);
}

TEST_CASE("punctuation timing fixture") {
  std::ifstream in(std::string(TOKENFORGE_FIXTURES) + "/punctuation_cases.json");
  REQUIRE(in);
  const auto cases = nlohmann::json::parse(in);
  REQUIRE(cases.size() == 20);
  pl::PipelineConfig cfg;
  int deviations = 0;
  for (const auto& c : cases) {
    const std::string lang = c["language"];
    std::vector<pl::WordTiming> timings;
    for (const auto& t : c["timings"]) timings.push_back({t[0], t[1], t[2]});
    const auto tokens = pl::TokenizeText(c["text"].get<std::string>(), lang);
    const auto once = pl::AdjustPunctuation(tokens, timings, cfg, lang);
    const auto twice = pl::AdjustPunctuation(once, timings, cfg, lang);
    const std::string got = pl::RenderText(once, lang);
    if (got != c["expected"].get<std::string>()) {
      ++deviations;
      MESSAGE("case '" << c["text"].get<std::string>() << "' gave '" << got << "'");
    }
    if (twice != once) ++deviations;
  }
  CHECK(deviations == 0);
}

TEST_CASE("punctuation edge cases") {
  pl::PipelineConfig cfg;
  using V = std::vector<std::string>;
  const std::vector<pl::WordTiming> t = {{"left", 0, 100}, {"then", 110, 200}};
  CHECK(pl::AdjustPunctuation(V{"left", ".”", "then"}, t, cfg) == V{"left", "”", "then"});
  CHECK(pl::AdjustPunctuation(V{"left", "then", "."}, t, cfg) == V{"left", "then", "."});
  CHECK(KindOf([&] { pl::AdjustPunctuation(V{"left", "now"}, t, cfg); }) == ErrorKind::kInvalidInput);
  CHECK(KindOf([&] { pl::AdjustPunctuation(V{"left"}, t, cfg); }) == ErrorKind::kInvalidInput);
  const std::vector<pl::WordTiming> overlap = {{"left", 0, 100}, {"then", 50, 200}};
  CHECK(KindOf([&] { pl::AdjustPunctuation(V{"left", "then"}, overlap, cfg); }) ==
        ErrorKind::kInvalidInput);
  CHECK(pl::AdjustPunctuation(V{}, std::vector<pl::WordTiming>{}, cfg).empty());
}

TEST_CASE("volume normalization") {
  audio::AudioBuffer a;
  a.samples = {0.3, -0.15};
  auto out = pl::NormalizeVolume(a);
  CHECK(out.samples[0] == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(out.samples[1] == doctest::Approx(-0.3).epsilon(1e-15));

  a.samples = {0.6, -0.2, 0.1};
  out = pl::NormalizeVolume(a);
  for (std::size_t i = 0; i < a.samples.size(); ++i) CHECK(std::abs(out.samples[i] - a.samples[i]) < 1e-9);

  // Negative-dominant input keeps its sign.
  a.samples = {-0.9, 0.1};
  out = pl::NormalizeVolume(a);
  CHECK(out.samples[0] == doctest::Approx(-0.6));

  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0), scale(1e-4, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    audio::AudioBuffer r;
    const double s = scale(gen);
    for (int i = 0; i < 257; ++i) r.samples.push_back(s * u(gen));
    const auto n = pl::NormalizeVolume(r);
    double peak = 0.0;
    for (std::size_t i = 0; i < n.samples.size(); ++i) {
      peak = std::max(peak, std::abs(n.samples[i]));
      CHECK(std::signbit(n.samples[i]) == std::signbit(r.samples[i]));
    }
    CHECK(std::abs(peak - 0.6) <= 1e-6);
  }

  audio::AudioBuffer zero;
  zero.samples.assign(100, 0.0);
  CHECK(KindOf([&] { pl::NormalizeVolume(zero); }) == ErrorKind::kDegenerateInput);
}

TEST_CASE("length ratio filter") {
  SUBCASE("100 records drop 1 + 5") {
    std::vector<pl::UtteranceRecord> recs;
    std::mt19937_64 gen(8);
    std::uniform_real_distribution<double> u(1.0, 20.0);
    for (int i = 0; i < 100; ++i) recs.push_back(RecordWithRatio("r" + std::to_string(i), u(gen)));
    const auto res = pl::FilterLengthRatio(recs, 0.01, 0.05);
    CHECK(res.kept.size() == 94);
    CHECK(res.dropped.size() == 6);
    const auto split = pl::SplitByRatio(
        [&] {
          std::vector<double> r;
          for (const auto& x : recs) r.push_back(x.length_ratio);
          return r;
        }(),
        0.01, 0.05);
    CHECK(split.dropped_low.size() == 1);
    CHECK(split.dropped_high.size() == 5);
    for (std::size_t i = 1; i < res.kept.size(); ++i) {
      CHECK(std::stoi(res.kept[i - 1].id.substr(1)) < std::stoi(res.kept[i].id.substr(1)));
    }
  }
  SUBCASE("empty") {
    const auto res = pl::FilterLengthRatio(std::vector<pl::UtteranceRecord>{}, 0.01, 0.05);
    CHECK(res.kept.empty());
    CHECK(res.dropped.empty());
  }
  SUBCASE("ten records drop nothing at the defaults") {
    std::vector<pl::UtteranceRecord> recs;
    for (int i = 0; i < 10; ++i) recs.push_back(RecordWithRatio(std::to_string(i), 10.0 - i));
    CHECK(pl::FilterLengthRatio(recs, 0.01, 0.05).kept.size() == 10);
  }
  SUBCASE("errors") {
    std::vector<pl::UtteranceRecord> recs = {RecordWithRatio("a", 1.0)};
    CHECK(KindOf([&] { pl::FilterLengthRatio(recs, 0.5, 0.5); }) == ErrorKind::kInvalidInput);
    recs[0].text_token_count = 0;
    CHECK(KindOf([&] { pl::FilterLengthRatio(recs, 0.01, 0.05); }) == ErrorKind::kInvalidInput);
    CHECK(KindOf([] { pl::LengthRatio(10, 0); }) == ErrorKind::kInvalidInput);
  }
}

TEST_CASE("ratio split matches a sort-and-slice oracle") {
  std::mt19937_64 gen(21);
  std::uniform_int_distribution<int> size(0, 300), permille(0, 400), level(0, 9);
  int mismatches = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const int n = size(gen);
    const int lo = permille(gen);
    const int hi = std::min(999 - lo, permille(gen));
    std::vector<double> ratios(n);
    for (auto& r : ratios) r = level(gen) * 0.5;  // many ties
    const auto split = pl::SplitByRatio(ratios, lo / 1000.0, hi / 1000.0);

    std::vector<std::pair<double, int>> order;
    for (int i = 0; i < n; ++i) order.push_back({ratios[i], i});
    std::sort(order.begin(), order.end());  // ties by index = stable
    const int n_lo = lo * n / 1000, n_hi = hi * n / 1000;
    std::vector<std::size_t> want_lo, want_hi, want_kept;
    for (int k = 0; k < n; ++k) {
      const auto idx = static_cast<std::size_t>(order[k].second);
      (k < n_lo ? want_lo : k >= n - n_hi ? want_hi : want_kept).push_back(idx);
    }
    std::sort(want_lo.begin(), want_lo.end());
    std::sort(want_hi.begin(), want_hi.end());
    std::sort(want_kept.begin(), want_kept.end());
    if (split.dropped_low != want_lo || split.dropped_high != want_hi || split.kept != want_kept) {
      ++mismatches;
    }
    if (split.kept.size() + split.dropped_low.size() + split.dropped_high.size() !=
        static_cast<std::size_t>(n)) {
      ++mismatches;
    }
  }
  CHECK(mismatches == 0);
}

TEST_CASE("record json keeps unknown fields") {
  const auto j = nlohmann::json::parse(
      R"({"id": "u1", "audio_path": "a.wav", "language": "en", "text": "hi", "custom": [1, 2]})");
  auto r = pl::RecordFromJson(j);
  r.speech_token_count = 50;
  const auto out = pl::RecordToJson(r);
  CHECK(out["custom"] == nlohmann::json::array({1, 2}));
  CHECK(out["speech_token_count"] == 50);
  CHECK(out["id"] == "u1");
}

TEST_CASE("wav round trip") {
  TempDir dir("wav");
  auto a = ToneBetweenSilence(0.1, 0.2, 0.1, 0.7, 22050);
  const auto path = (dir.path / "x.wav").string();
  audio::WriteWav(path, a);
  const auto b = audio::ReadWav(path);
  CHECK(b.sample_rate_hz == 22050);
  REQUIRE(b.samples.size() == a.samples.size());
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    CHECK(b.samples[i] == static_cast<double>(static_cast<float>(a.samples[i])));
  }

  // 16-bit PCM input.
  std::string bytes = "RIFF";
  auto u32 = [&](std::uint32_t v) {
    for (int k = 0; k < 4; ++k) bytes.push_back(static_cast<char>((v >> (8 * k)) & 0xFF));
  };
  auto u16 = [&](std::uint16_t v) {
    bytes.push_back(static_cast<char>(v & 0xFF));
    bytes.push_back(static_cast<char>(v >> 8));
  };
  u32(36 + 4);
  bytes += "WAVEfmt ";
  u32(16);
  u16(1);
  u16(1);
  u32(8000);
  u32(16000);
  u16(2);
  u16(16);
  bytes += "data";
  u32(4);
  u16(16384);
  u16(static_cast<std::uint16_t>(-32768));
  const auto pcm = (dir.path / "pcm.wav").string();
  std::ofstream(pcm, std::ios::binary) << bytes;
  const auto c = audio::ReadWav(pcm);
  CHECK(c.sample_rate_hz == 8000);
  CHECK(c.samples == std::vector<double>{0.5, -1.0});

  CHECK(KindOf([&] { audio::ReadWav((dir.path / "missing.wav").string()); }) == ErrorKind::kIo);
  std::ofstream(dir.path / "junk.wav") << "not a wav";
  CHECK(KindOf([&] { audio::ReadWav((dir.path / "junk.wav").string()); }) ==
        ErrorKind::kInvalidInput);
}

TEST_CASE("alignment tsv") {
  TempDir dir("tsv");
  std::ofstream(dir.path / "a.tsv") << "word\tstart_ms\tend_ms\nhello\t0\t400\nworld\t750\t1100\n";
  const auto t = pl::ReadAlignmentTsv((dir.path / "a.tsv").string());
  REQUIRE(t.size() == 2);
  CHECK(t[1].word == "world");
  CHECK(t[1].start_ms == 750);
  std::ofstream(dir.path / "b.tsv") << "hello\t0\t400\nworld\tx\t1100\n";
  CHECK(KindOf([&] { pl::ReadAlignmentTsv((dir.path / "b.tsv").string()); }) ==
        ErrorKind::kInvalidInput);
}

namespace {

struct Corpus {
  TempDir dir;
  std::vector<nlohmann::json> rows;

  Corpus() : dir("corpus") {
    auto write = [&](const std::string& name, const audio::AudioBuffer& a) {
      audio::WriteWav((dir.path / name).string(), a);
    };
    write("clean.wav", ToneBetweenSilence(0.5, 2.0, 0.5, 0.3));
    write("silent.wav", ToneBetweenSilence(1.0, 0.0, 0.0));
    write("cut.wav", ToneBetweenSilence(0.0, 1.0, 0.5, 0.3));
    write("noisy.wav", ToneBetweenSilence(0.5, 1.0, 0.5, 0.3));
    const nlohmann::json timings = {{{"word", "hello"}, {"start_ms", 0}, {"end_ms", 400}},
                                    {{"word", "world"}, {"start_ms", 750}, {"end_ms", 1100}}};
    rows.push_back({{"id", "clean"},
                    {"audio_path", "clean.wav"},
                    {"language", "en"},
                    {"speaker", "A"},
                    {"hypotheses", {"hello world", "hello world", "Hello world."}},
                    {"word_timings", timings},
                    {"extra", "kept"}});
    rows.push_back({{"id", "silent"},
                    {"audio_path", "silent.wav"},
                    {"language", "en"},
                    {"hypotheses", {"a", "a"}},
                    {"word_timings", nlohmann::json::array()}});
    rows.push_back({{"id", "cut"},
                    {"audio_path", "cut.wav"},
                    {"language", "en"},
                    {"hypotheses", {"a", "a"}},
                    {"word_timings", nlohmann::json::array()}});
    rows.push_back({{"id", "disagree"},
                    {"audio_path", "noisy.wav"},
                    {"language", "en"},
                    {"hypotheses", {"one two", "three four"}},
                    {"word_timings", nlohmann::json::array()}});
  }
};

}  // namespace

TEST_CASE("run pipeline end to end") {
  Corpus corpus;
  pl::RunOptions opt;
  opt.base_dir = corpus.dir.path.string();
  opt.output_dir = (corpus.dir.path / "out").string();
  const auto res = pl::RunPipeline(corpus.rows, opt);

  REQUIRE(res.records.size() == 1);
  const auto& r = res.records[0];
  CHECK(r["id"] == "clean");
  CHECK(r["text"] == "hello, world");
  CHECK(r["extra"] == "kept");
  CHECK(r["speech_token_count"] == 50);
  CHECK(r["text_token_count"] == 2);
  CHECK(r["length_ratio"] == 25.0);
  CHECK(r["processed"] == true);
  const auto out_audio = audio::ReadWav((corpus.dir.path / "out" / r["audio_path"].get<std::string>()).string());
  double peak = 0.0;
  for (double s : out_audio.samples) peak = std::max(peak, std::abs(s));
  CHECK(std::abs(peak - 0.6) <= 1e-6);

  const auto& stats = res.stats;
  CHECK(stats["input_records"] == 4);
  CHECK(stats["output_records"] == 1);
  CHECK(stats["dropped_by_stage"]["segment"] == 1);
  CHECK(stats["dropped_by_stage"]["screen"] == 1);
  CHECK(stats["dropped_by_stage"]["transcript"] == 1);
  CHECK(stats["dropped_by_reason"]["no-speech"] == 1);
  CHECK(stats["dropped_by_reason"]["truncated"] == 1);
  CHECK(stats["dropped_by_reason"]["transcript-rejected"] == 1);
  CHECK(!fs::exists(corpus.dir.path / "out" / ".tokenforge-scratch"));

  SUBCASE("rerun on output drops nothing") {
    pl::RunOptions again = opt;
    again.base_dir = opt.output_dir;
    again.output_dir = (corpus.dir.path / "out2").string();
    const auto res2 = pl::RunPipeline(res.records, again);
    CHECK(res2.stats["dropped_total"] == 0);
    REQUIRE(res2.records.size() == 1);
    CHECK(res2.records[0] == res.records[0]);
  }
  SUBCASE("parallel run gives the same output") {
    pl::RunOptions par = opt;
    par.jobs = 3;
    par.output_dir = (corpus.dir.path / "out3").string();
    const auto res3 = pl::RunPipeline(corpus.rows, par);
    CHECK(res3.records == res.records);
    CHECK(res3.stats == res.stats);
  }
}

TEST_CASE("pipeline adapters") {
  Corpus corpus;
  const auto& dir = corpus.dir.path;
  std::ofstream(dir / "asr.sh") << "#!/bin/sh\n"
                                   "echo '{\"hypotheses\": [\"hello world\", \"hello world\"]}'\n";
  std::ofstream(dir / "align.sh")
      << "#!/bin/sh\n"
         "echo '{\"word_timings\": [{\"word\": \"hello\", \"start_ms\": 0, \"end_ms\": 400},"
         " {\"word\": \"world\", \"start_ms\": 420, \"end_ms\": 900}]}'\n";
  std::ofstream(dir / "fail.sh") << "#!/bin/sh\nexit 3\n";
  std::ofstream(dir / "seed.sh")
      << R"(#!/bin/sh
echo "$TOKENFORGE_SEED" > "$(dirname "$1")/../seed.txt"
echo '{"hypotheses": ["hello world", "hello world"]}'
)";
  for (const char* f : {"asr.sh", "align.sh", "fail.sh", "seed.sh"}) {
    fs::permissions(dir / f, fs::perms::owner_all);
  }
  std::vector<nlohmann::json> rows = {corpus.rows[0]};
  rows[0].erase("hypotheses");
  rows[0].erase("word_timings");

  pl::RunOptions opt;
  opt.base_dir = dir.string();
  opt.output_dir = (dir / "out").string();
  CHECK(KindOf([&] { pl::RunPipeline(rows, opt); }) == ErrorKind::kMissingAdapter);

  opt.adapters.asr = (dir / "asr.sh").string();
  CHECK(KindOf([&] { pl::RunPipeline(rows, opt); }) == ErrorKind::kMissingAdapter);

  opt.adapters.align = (dir / "align.sh").string();
  auto res = pl::RunPipeline(rows, opt);
  REQUIRE(res.records.size() == 1);
  CHECK(res.records[0]["text"] == "hello world");
  CHECK(res.records[0]["word_timings"].size() == 2);

  opt.adapters.asr = (dir / "seed.sh").string();
  opt.adapters.align = (dir / "fail.sh").string();
  opt.seed = 7;
  res = pl::RunPipeline(rows, opt);
  CHECK(res.records.empty());
  CHECK(res.stats["dropped_by_reason"]["align-failed"] == 1);
  std::ifstream seed_file(dir / "out" / "seed.txt");
  std::uint64_t seen = 0;
  seed_file >> seen;
  CHECK(seen == tokenforge::DeriveSeed(7, 0));

  opt.adapters.asr = (dir / "fail.sh").string();
  res = pl::RunPipeline(rows, opt);
  CHECK(res.stats["dropped_by_reason"]["asr-failed"] == 1);

  opt.adapters.denoise = (dir / "fail.sh").string();
  res = pl::RunPipeline(rows, opt);
  CHECK(res.stats["dropped_by_reason"]["denoise-failed"] == 1);
}

TEST_CASE("multi-segment rows with precomputed transcripts are dropped") {
  TempDir dir("multiseg");
  audio::AudioBuffer a;
  AppendTone(&a, 0.5, 0.0);
  AppendTone(&a, 1.0, 0.4);
  AppendTone(&a, 1.0, 0.0);
  AppendTone(&a, 1.0, 0.4);
  AppendTone(&a, 0.5, 0.0);
  audio::WriteWav((dir.path / "two.wav").string(), a);
  const std::vector<nlohmann::json> rows = {
      {{"id", "two"}, {"audio_path", "two.wav"}, {"hypotheses", {"a", "a"}}, {"word_timings", nlohmann::json::array()}}};
  pl::RunOptions opt;
  opt.base_dir = dir.path.string();
  opt.output_dir = (dir.path / "out").string();
  const auto res = pl::RunPipeline(rows, opt);
  CHECK(res.stats["segments"] == 2);
  CHECK(res.stats["dropped_by_reason"]["multi-segment-precomputed"] == 1);
}

TEST_CASE("duplicate ids are rejected") {
  const std::vector<nlohmann::json> rows = {{{"id", "x"}, {"hypotheses", {}}, {"word_timings", {}}},
                                            {{"id", "x"}, {"hypotheses", {}}, {"word_timings", {}}}};
  pl::RunOptions opt;
  opt.output_dir = (fs::temp_directory_path() / "tokenforge_dup").string();
  CHECK(KindOf([&] { pl::RunPipeline(rows, opt); }) == ErrorKind::kInvalidInput);
}
