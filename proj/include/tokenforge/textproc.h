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

#ifndef TOKENFORGE_TEXTPROC_H_
#define TOKENFORGE_TEXTPROC_H_

#include <cstddef>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tokenforge/random.h"

// Auxiliary text corpora: pronunciation inpainting over a CMU-style
// dictionary, instruction serialization and polyglot speaker prompts.
namespace tokenforge::textproc {

using Pronunciation = std::vector<std::string>;

struct PronDict {
  // Upper-cased word -> pronunciations in file order.
  std::map<std::string, std::vector<Pronunciation>> entries;

  std::size_t size() const { return entries.size(); }
  // Case-insensitive lookup; nullptr when absent.
  const std::vector<Pronunciation>* Find(std::string_view word) const;
};

struct ParsedDict {
  PronDict dict;
  std::vector<std::string> warnings;  // "line N: ..." for skipped lines
};

// CMU format: "WORD PH1 PH2 ...", variants as "WORD(2) ...", comments start
// with ";;;", and a trailing "# ..." on an entry is ignored. Malformed lines
// and repeated pronunciations are skipped with a warning.
ParsedDict ParsePronDict(std::istream& in);
ParsedDict LoadPronDict(const std::string& path);

// Words with exactly one pronunciation.
std::set<std::string> Monophones(const PronDict& dict);

enum class Scope { kRepMono, kRepAll };
enum class Mode { kMixPhn, kCatPhn };

struct AugmentPolicy {
  Scope scope = Scope::kRepMono;
  Mode mode = Mode::kMixPhn;
  double replace_prob = 0.0;
  // CatPhn only: chance that a replaced word is swapped for a dictionary word
  // with a different pronunciation while the original phonemes are kept.
  double corruption_prob = 0.0;

  // Throws kConfig on probabilities outside [0, 1].
  void Validate() const;
};

// "{HH AH0 L OW1}"
std::string MixPhnGroup(const Pronunciation& p);
// "HELLO⟦HH AH0 L OW1⟧"
std::string CatPhnGroup(std::string_view word, const Pronunciation& p);

struct AugmentStats {
  std::size_t words = 0;
  std::size_t eligible = 0;
  std::size_t replaced = 0;
  std::size_t corrupted = 0;
};

class Augmenter {
 public:
  Augmenter(const PronDict& dict, AugmentPolicy policy);

  // Element-wise over a word sequence. Each eligible word consumes one
  // uniform draw (and one more when replaced with corruption enabled).
  std::vector<std::string> AugmentWords(std::span<const std::string> words, Rng& rng,
                                        AugmentStats* stats = nullptr) const;

  // Free text: words are maximal runs of letters, digits and inner
  // apostrophes or hyphens; CJK characters are single words. Everything else
  // is copied through, so replace_prob 0 returns the input unchanged.
  std::string AugmentText(std::string_view text, Rng& rng, AugmentStats* stats = nullptr) const;

  bool Eligible(std::string_view word) const;

 private:
  std::string Replace(const std::string& word, Rng& rng, AugmentStats* stats) const;

  const PronDict& dict_;
  AugmentPolicy policy_;
  std::vector<const std::string*> keys_;  // for corruption draws
};

inline constexpr std::string_view kEndOfPrompt = "<|endofprompt|>";

// Vocal-burst markers recognized in bodies.
inline constexpr std::string_view kVocalBursts[] = {"[laughter]", "[breath]"};

// Throws kInvalidInput on unbalanced or nested <strong> tags, or an embedded
// end-of-prompt token.
void ValidateInstructedBody(std::string_view body);

// instruction + "<|endofprompt|>" + body. The instruction must be non-empty
// and free of the end-of-prompt token.
std::string BuildInstructedText(std::string_view instruction, std::string_view body);

struct InstructedText {
  std::optional<std::string> instruction;
  std::string body;
};

// Splits on the first end-of-prompt token.
InstructedText ParseInstructedText(std::string_view text);

// Accepts language tags (de) or English names (German), case-insensitively,
// for zh, en, ja, ko, de, es, fr, it, ru. Returns the tag; throws
// kInvalidInput for anything else.
std::string CanonicalLanguage(std::string_view language);

// "You are Speaker {speaker}. Please speak {language}." for prompt language
// en, "你是说话人{speaker}。请讲{language}。" for zh.
std::string BuildPolyglotPrompt(std::string_view speaker, std::string_view language,
                                std::string_view prompt_language = "en");

}  // namespace tokenforge::textproc

#endif  // TOKENFORGE_TEXTPROC_H_
