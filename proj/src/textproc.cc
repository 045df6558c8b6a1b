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

#include "tokenforge/textproc.h"

#include <algorithm>
#include <cctype>
#include <fstream>

#include "tokenforge/error.h"
#include "tokenforge/text.h"

namespace tokenforge::textproc {
namespace {

bool IsSpace(char32_t cp) {
  return cp == ' ' || cp == '\t' || cp == '\n' || cp == '\r' || cp == '\v' || cp == '\f' ||
         cp == 0x00A0 || cp == 0x3000;
}

bool IsWordChar(char32_t cp) {
  return !IsSpace(cp) && !text::IsPunctuation(cp) && !text::IsCjk(cp) && cp >= 0x20;
}

bool IsJoiner(char32_t cp) { return cp == '\'' || cp == '-' || cp == 0x2019; }

// "READ(2)" -> "READ"; returns false for a malformed variant suffix.
bool StripVariant(std::string* word) {
  const auto open = word->find('(');
  if (open == std::string::npos) return true;
  if (open == 0 || word->back() != ')' || open + 2 >= word->size()) return false;
  for (std::size_t i = open + 1; i + 1 < word->size(); ++i) {
    if (!std::isdigit(static_cast<unsigned char>((*word)[i]))) return false;
  }
  word->resize(open);
  return true;
}

bool IsLowerAscii(std::string_view s) {
  return std::any_of(s.begin(), s.end(), [](char c) { return c >= 'a' && c <= 'z'; }) &&
         std::none_of(s.begin(), s.end(), [](char c) { return c >= 'A' && c <= 'Z'; });
}

struct LanguageName {
  const char* tag;
  const char* english;
  const char* chinese;
};

constexpr LanguageName kLanguages[] = {
    {"zh", "Chinese", "中文"}, {"en", "English", "英语"},
    {"ja", "Japanese", "日语"}, {"ko", "Korean", "韩语"},
    {"de", "German", "德语"},   {"es", "Spanish", "西班牙语"},
    {"fr", "French", "法语"},   {"it", "Italian", "意大利语"},
    {"ru", "Russian", "俄语"}};

const LanguageName& LookupLanguage(std::string_view language) {
  const std::string key = text::ToLowerAscii(text::Trim(language));
  for (const auto& l : kLanguages) {
    if (key == l.tag || key == text::ToLowerAscii(l.english) || key == l.chinese) return l;
  }
  Fail(ErrorKind::kInvalidInput, "unknown language: " + std::string(language));
}

}  // namespace

const std::vector<Pronunciation>* PronDict::Find(std::string_view word) const {
  const auto it = entries.find(text::ToUpperAscii(word));
  return it == entries.end() ? nullptr : &it->second;
}

ParsedDict ParsePronDict(std::istream& in) {
  ParsedDict out;
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    if (line.rfind(";;;", 0) == 0) continue;
    if (const auto hash = line.find(" #"); hash != std::string::npos) line.resize(hash);
    auto fields = text::SplitWhitespace(line);
    if (fields.empty()) continue;
    auto warn = [&](const std::string& what) {
      out.warnings.push_back("line " + std::to_string(lineno) + ": " + what);
    };
    if (fields.size() < 2) {
      warn("no pronunciation for '" + fields[0] + "'");
      continue;
    }
    std::string word = fields[0];
    if (!StripVariant(&word)) {
      warn("malformed variant '" + fields[0] + "'");
      continue;
    }
    Pronunciation pron(fields.begin() + 1, fields.end());
    auto& prons = out.dict.entries[text::ToUpperAscii(word)];
    if (std::find(prons.begin(), prons.end(), pron) != prons.end()) {
      warn("repeated pronunciation for '" + word + "'");
      continue;
    }
    prons.push_back(std::move(pron));
  }
  return out;
}

ParsedDict LoadPronDict(const std::string& path) {
  std::ifstream in(path);
  if (!in) Fail(ErrorKind::kIo, "cannot open dictionary " + path);
  return ParsePronDict(in);
}

std::set<std::string> Monophones(const PronDict& dict) {
  std::set<std::string> out;
  for (const auto& [word, prons] : dict.entries) {
    if (prons.size() == 1) out.insert(word);
  }
  return out;
}

void AugmentPolicy::Validate() const {
  if (!(replace_prob >= 0.0 && replace_prob <= 1.0)) {
    Fail(ErrorKind::kConfig, "replace_prob must be in [0, 1]");
  }
  if (!(corruption_prob >= 0.0 && corruption_prob <= 1.0)) {
    Fail(ErrorKind::kConfig, "corruption_prob must be in [0, 1]");
  }
}

std::string MixPhnGroup(const Pronunciation& p) { return "{" + text::Join(p, " ") + "}"; }

std::string CatPhnGroup(std::string_view word, const Pronunciation& p) {
  return std::string(word) + "⟦" + text::Join(p, " ") + "⟧";
}

Augmenter::Augmenter(const PronDict& dict, AugmentPolicy policy) : dict_(dict), policy_(policy) {
  policy_.Validate();
  for (const auto& [word, prons] : dict_.entries) keys_.push_back(&word);
}

bool Augmenter::Eligible(std::string_view word) const {
  const auto* prons = dict_.Find(word);
  if (prons == nullptr || prons->empty()) return false;
  return policy_.scope == Scope::kRepAll || prons->size() == 1;
}

std::string Augmenter::Replace(const std::string& word, Rng& rng, AugmentStats* stats) const {
  const Pronunciation& pron = dict_.Find(word)->front();
  ++stats->replaced;
  if (policy_.mode == Mode::kMixPhn) return MixPhnGroup(pron);

  std::string shown = word;
  if (policy_.corruption_prob > 0.0 && rng.Uniform() < policy_.corruption_prob) {
    const std::string upper = text::ToUpperAscii(word);
    // A bounded number of tries keeps tiny dictionaries from looping.
    for (int attempt = 0; attempt < 32 && !keys_.empty(); ++attempt) {
      const std::string& candidate = *keys_[rng.Below(keys_.size())];
      const auto& prons = dict_.entries.at(candidate);
      if (candidate == upper || std::find(prons.begin(), prons.end(), pron) != prons.end()) continue;
      shown = IsLowerAscii(word) ? text::ToLowerAscii(candidate) : candidate;
      ++stats->corrupted;
      break;
    }
  }
  return CatPhnGroup(shown, pron);
}

std::vector<std::string> Augmenter::AugmentWords(std::span<const std::string> words, Rng& rng,
                                                 AugmentStats* stats) const {
  AugmentStats local;
  if (stats == nullptr) stats = &local;
  std::vector<std::string> out;
  out.reserve(words.size());
  for (const auto& w : words) {
    ++stats->words;
    if (!Eligible(w)) {
      out.push_back(w);
      continue;
    }
    ++stats->eligible;
    out.push_back(rng.Uniform() < policy_.replace_prob ? Replace(w, rng, stats) : w);
  }
  return out;
}

std::string Augmenter::AugmentText(std::string_view input, Rng& rng, AugmentStats* stats) const {
  std::string out;
  std::size_t pos = 0;
  auto next = [&](std::size_t at, std::size_t* len) { return text::DecodeAt(input, at, len); };
  while (pos < input.size()) {
    std::size_t len;
    const char32_t cp = next(pos, &len);
    std::size_t end = pos + len;
    if (text::IsCjk(cp) && !text::IsPunctuation(cp) && !IsSpace(cp)) {
      // single-character word
    } else if (IsWordChar(cp)) {
      while (end < input.size()) {
        std::size_t l1;
        const char32_t c1 = next(end, &l1);
        if (IsWordChar(c1)) {
          end += l1;
          continue;
        }
        if (IsJoiner(c1) && end + l1 < input.size()) {
          std::size_t l2;
          if (IsWordChar(next(end + l1, &l2))) {
            end += l1 + l2;
            continue;
          }
        }
        break;
      }
    } else {
      out.append(input.substr(pos, len));
      pos = end;
      continue;
    }
    const std::string word(input.substr(pos, end - pos));
    out += AugmentWords(std::span<const std::string>(&word, 1), rng, stats).front();
    pos = end;
  }
  return out;
}

void ValidateInstructedBody(std::string_view body) {
  static constexpr std::string_view kOpen = "<strong>";
  static constexpr std::string_view kClose = "</strong>";
  if (body.find(kEndOfPrompt) != std::string_view::npos) {
    Fail(ErrorKind::kInvalidInput, "body contains the end-of-prompt token");
  }
  bool open = false;
  for (std::size_t pos = 0; pos < body.size(); ++pos) {
    if (body.compare(pos, kOpen.size(), kOpen) == 0) {
      if (open) Fail(ErrorKind::kInvalidInput, "nested <strong> tag");
      open = true;
    } else if (body.compare(pos, kClose.size(), kClose) == 0) {
      if (!open) Fail(ErrorKind::kInvalidInput, "</strong> without a matching <strong>");
      open = false;
    }
  }
  if (open) Fail(ErrorKind::kInvalidInput, "unclosed <strong> tag");
}

std::string BuildInstructedText(std::string_view instruction, std::string_view body) {
  if (text::Trim(instruction).empty()) Fail(ErrorKind::kInvalidInput, "instruction is empty");
  if (instruction.find(kEndOfPrompt) != std::string_view::npos) {
    Fail(ErrorKind::kInvalidInput, "instruction contains the end-of-prompt token");
  }
  ValidateInstructedBody(body);
  std::string out(instruction);
  out += kEndOfPrompt;
  out += body;
  return out;
}

InstructedText ParseInstructedText(std::string_view s) {
  const auto at = s.find(kEndOfPrompt);
  if (at == std::string_view::npos) return {std::nullopt, std::string(s)};
  return {std::string(s.substr(0, at)), std::string(s.substr(at + kEndOfPrompt.size()))};
}

std::string CanonicalLanguage(std::string_view language) { return LookupLanguage(language).tag; }

std::string BuildPolyglotPrompt(std::string_view speaker, std::string_view language,
                                std::string_view prompt_language) {
  if (text::Trim(speaker).empty()) Fail(ErrorKind::kInvalidInput, "speaker is empty");
  const auto& lang = LookupLanguage(language);
  const std::string who(speaker);
  const std::string prompt = CanonicalLanguage(prompt_language);
  if (prompt == "en") return "You are Speaker " + who + ". Please speak " + lang.english + ".";
  if (prompt == "zh") return "你是说话人" + who + "。请讲" + lang.chinese + "。";
  Fail(ErrorKind::kInvalidInput, "no prompt template for " + std::string(prompt_language));
}

}  // namespace tokenforge::textproc
