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

#include <cmath>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "tokenforge/error.h"
#include "tokenforge/random.h"
#include "tokenforge/text.h"
#include "tokenforge/textproc.h"

namespace tp = tokenforge::textproc;
using tokenforge::Error;
using tokenforge::Rng;

namespace {

tp::PronDict FixtureDict() {
  auto parsed = tp::LoadPronDict(std::string(TOKENFORGE_FIXTURES) + "/mini.dict");
  REQUIRE(parsed.warnings.empty());
  return parsed.dict;
}

}  // namespace

TEST_CASE("dictionary parsing") {
  std::istringstream one("HELLO HH AH0 L OW1\n");
  auto d = tp::ParsePronDict(one);
  REQUIRE(d.dict.size() == 1);
  CHECK(d.dict.entries.at("HELLO") == std::vector<tp::Pronunciation>{{"HH", "AH0", "L", "OW1"}});

  const auto fixture = FixtureDict();
  CHECK(fixture.size() == 2);
  CHECK(fixture.Find("read")->size() == 2);
  CHECK(fixture.Find("Read")->at(1) == tp::Pronunciation{"R", "IY1", "D"});
  CHECK(fixture.Find("missing") == nullptr);

  std::istringstream comments(";;; a\n;;; b\n\n");
  CHECK(tp::ParsePronDict(comments).dict.size() == 0);

  std::istringstream messy(
      "hello  HH AH0 L OW1\n"
      "LONELY\n"
      "BAD(x) B AE1 D\n"
      "HELLO HH AH0 L OW1\n"
      "TOMATO T AH0 M EY1 T OW2 # american\n"
      "TOMATO(2) T AH0 M AA1 T OW2\n"
      "好 hao3\n"
      "好(2) hao4\n");
  d = tp::ParsePronDict(messy);
  CHECK(d.warnings.size() == 3);
  CHECK(d.dict.Find("HELLO")->size() == 1);
  CHECK(d.dict.Find("tomato")->size() == 2);
  CHECK(d.dict.Find("tomato")->front().back() == "OW2");
  CHECK(d.dict.Find("好")->size() == 2);
  CHECK(d.dict.Find("LONELY") == nullptr);
}

TEST_CASE("monophones") {
  CHECK(tp::Monophones(FixtureDict()) == std::set<std::string>{"HELLO"});
  CHECK(tp::Monophones(tp::PronDict{}).empty());

  std::mt19937_64 gen(4);
  std::uniform_int_distribution<int> n_prons(1, 3);
  tp::PronDict dict;
  for (int i = 0; i < 100; ++i) {
    auto& prons = dict.entries["W" + std::to_string(i)];
    for (int k = n_prons(gen); k > 0; --k) prons.push_back({"P" + std::to_string(k)});
  }
  std::set<std::string> brute;
  for (const auto& [w, p] : dict.entries) {
    if (p.size() == 1) brute.insert(w);
  }
  CHECK(tp::Monophones(dict) == brute);
}

TEST_CASE("fixture augmentation outputs") {
  const auto dict = FixtureDict();
  Rng rng(42);
  tp::Augmenter mono_mix(dict, {tp::Scope::kRepMono, tp::Mode::kMixPhn, 1.0});
  CHECK(mono_mix.AugmentText("HELLO READ", rng) == "{HH AH0 L OW1} READ");

  tp::Augmenter all_mix(dict, {tp::Scope::kRepAll, tp::Mode::kMixPhn, 1.0});
  CHECK(all_mix.AugmentText("HELLO READ", rng) == "{HH AH0 L OW1} {R EH1 D}");

  tp::Augmenter mono_cat(dict, {tp::Scope::kRepMono, tp::Mode::kCatPhn, 1.0});
  CHECK(mono_cat.AugmentText("Hello, read it.", rng) == "Hello⟦HH AH0 L OW1⟧, read it.");

  const std::vector<std::string> words = {"HELLO", "READ", "world"};
  CHECK(mono_mix.AugmentWords(words, rng) ==
        std::vector<std::string>{"{HH AH0 L OW1}", "READ", "world"});

  tp::Augmenter zero(dict, {tp::Scope::kRepAll, tp::Mode::kCatPhn, 0.0});
  const std::string messy = "  hello,\tREAD!!  don't  读书 \n";
  CHECK(zero.AugmentText(messy, rng) == messy);
}

TEST_CASE("pinyin dictionaries work per character") {
  std::istringstream in("你 ni3\n好 hao3\n好(2) hao4\n");
  const auto dict = tp::ParsePronDict(in).dict;
  Rng rng(1);
  tp::Augmenter mono(dict, {tp::Scope::kRepMono, tp::Mode::kMixPhn, 1.0});
  CHECK(mono.AugmentText("你好，世界", rng) == "{ni3}好，世界");
  tp::Augmenter cat(dict, {tp::Scope::kRepAll, tp::Mode::kCatPhn, 1.0});
  CHECK(cat.AugmentText("你好", rng) == "你⟦ni3⟧好⟦hao3⟧");
}

TEST_CASE("RepMono never replaces polyphonic words") {
  std::mt19937_64 gen(10);
  std::uniform_int_distribution<int> n_prons(1, 3), vocab(0, 59), length(1, 12);
  tp::PronDict dict;
  for (int i = 0; i < 50; ++i) {  // W50..W59 stay out of the dictionary
    auto& prons = dict.entries["W" + std::to_string(i)];
    for (int k = n_prons(gen); k > 0; --k) prons.push_back({"P" + std::to_string(i), std::to_string(k)});
  }
  Rng rng(42);
  std::size_t violations = 0, replaced = 0, misses = 0;
  for (int mode = 0; mode < 2; ++mode) {
    const tp::Augmenter aug(dict, {tp::Scope::kRepMono, mode ? tp::Mode::kCatPhn : tp::Mode::kMixPhn,
                                   0.7, mode ? 0.3 : 0.0});
    for (int s = 0; s < 5000; ++s) {
      std::vector<std::string> words;
      for (int k = length(gen); k > 0; --k) words.push_back("W" + std::to_string(vocab(gen)));
      const auto out = aug.AugmentWords(words, rng);
      for (std::size_t i = 0; i < words.size(); ++i) {
        if (out[i] == words[i]) continue;
        ++replaced;
        const auto* prons = dict.Find(words[i]);
        if (prons == nullptr || prons->size() != 1) ++violations;
        // MixPhn drops the word; CatPhn keeps a word and the right phonemes.
        const std::string group = tokenforge::text::Join(prons ? prons->front() : tp::Pronunciation{}, " ");
        if (mode == 0 && out[i] != "{" + group + "}") ++misses;
        if (mode == 1 && out[i].find("⟦" + group + "⟧") == std::string::npos) ++misses;
      }
    }
  }
  CHECK(replaced > 1000);
  CHECK(violations == 0);
  CHECK(misses == 0);
}

TEST_CASE("replacement fraction converges to the probability") {
  std::istringstream in("A EY1\nB B IY1\nC S IY1\n");
  const auto dict = tp::ParsePronDict(in).dict;
  for (double p : {0.1, 0.5, 0.9}) {
    const tp::Augmenter aug(dict, {tp::Scope::kRepAll, tp::Mode::kMixPhn, p});
    Rng rng(tokenforge::DeriveSeed(42, static_cast<std::uint64_t>(p * 10)));
    tp::AugmentStats stats;
    const std::vector<std::string> words = {"a", "b", "c", "d"};
    for (int i = 0; i < 20000; ++i) aug.AugmentWords(words, rng, &stats);
    CHECK(stats.eligible == 60000);
    const double n = static_cast<double>(stats.eligible);
    const double frac = static_cast<double>(stats.replaced) / n;
    CHECK(std::abs(frac - p) <= 3.0 * std::sqrt(p * (1 - p) / n));
  }
}

TEST_CASE("augmentation is deterministic per seed") {
  const auto dict = FixtureDict();
  const tp::Augmenter aug(dict, {tp::Scope::kRepAll, tp::Mode::kCatPhn, 0.5});
  Rng a(9), b(9);
  for (int i = 0; i < 50; ++i) {
    CHECK(aug.AugmentText("hello read hello read", a) == aug.AugmentText("hello read hello read", b));
  }
}

TEST_CASE("CatPhn corruption keeps the phonemes") {
  std::istringstream in("CAT K AE1 T\nDOG D AO1 G\nCOT K AA1 T\n");
  const auto dict = tp::ParsePronDict(in).dict;
  const tp::Augmenter aug(dict, {tp::Scope::kRepMono, tp::Mode::kCatPhn, 1.0, 1.0});
  Rng rng(5);
  tp::AugmentStats stats;
  for (int i = 0; i < 100; ++i) {
    const auto out = aug.AugmentWords(std::vector<std::string>{"cat"}, rng, &stats);
    CHECK(out[0].find("⟦K AE1 T⟧") != std::string::npos);
    CHECK(out[0].rfind("cat⟦", 0) == std::string::npos);
  }
  CHECK(stats.corrupted == 100);
  CHECK_THROWS_AS(tp::Augmenter(dict, {tp::Scope::kRepMono, tp::Mode::kCatPhn, 1.5}), Error);
}

TEST_CASE("instructed text") {
  CHECK(tp::BuildInstructedText("Please speak happily.", "Hi") ==
        "Please speak happily.<|endofprompt|>Hi");
  CHECK_NOTHROW(tp::BuildInstructedText("Speak slowly.", "good <strong>morning</strong>"));
  CHECK_NOTHROW(tp::BuildInstructedText("x", "[laughter] so [breath] funny"));
  CHECK_THROWS_AS(tp::BuildInstructedText("x", "good <strong>morning"), Error);
  CHECK_THROWS_AS(tp::BuildInstructedText("x", "good morning</strong>"), Error);
  CHECK_THROWS_AS(tp::BuildInstructedText("x", "<strong><strong>a</strong></strong>"), Error);
  CHECK_THROWS_AS(tp::BuildInstructedText("", "hi"), Error);
  CHECK_THROWS_AS(tp::BuildInstructedText("a<|endofprompt|>", "hi"), Error);
  CHECK_THROWS_AS(tp::BuildInstructedText("a", "b<|endofprompt|>c"), Error);

  for (const auto& [ins, body] : std::vector<std::pair<std::string, std::string>>{
           {"Please speak happily.", "Hi"}, {"你是说话人A。", "<strong>好</strong>的"}, {"x", ""}}) {
    const auto parsed = tp::ParseInstructedText(tp::BuildInstructedText(ins, body));
    CHECK(parsed.instruction == ins);
    CHECK(parsed.body == body);
  }
  CHECK_FALSE(tp::ParseInstructedText("plain").instruction.has_value());
}

TEST_CASE("polyglot prompts") {
  CHECK(tp::BuildPolyglotPrompt("B", "German") == "You are Speaker B. Please speak German.");
  CHECK(tp::BuildPolyglotPrompt("A", "French") == "You are Speaker A. Please speak French.");
  CHECK(tp::BuildPolyglotPrompt("A", "fr") == "You are Speaker A. Please speak French.");
  CHECK(tp::BuildPolyglotPrompt("小明", "fr", "zh") == "你是说话人小明。请讲法语。");
  CHECK(tp::CanonicalLanguage("GERMAN") == "de");
  CHECK_THROWS_AS(tp::BuildPolyglotPrompt("A", "xx"), Error);
  CHECK_THROWS_AS(tp::BuildPolyglotPrompt("", "de"), Error);
  CHECK_THROWS_AS(tp::BuildPolyglotPrompt("A", "de", "fr"), Error);
}
