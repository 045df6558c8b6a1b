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

#ifndef TOKENFORGE_TEXT_H_
#define TOKENFORGE_TEXT_H_

#include <string>
#include <string_view>
#include <vector>

// UTF-8 and tokenization helpers shared by the pipeline, textproc and eval.
namespace tokenforge::text {

// Splits into UTF-8 code point substrings. Invalid bytes become single-byte
// pieces rather than failing.
std::vector<std::string> SplitCodePoints(std::string_view s);

// Decodes the code point starting at s[pos]; sets *len to its byte length.
char32_t DecodeAt(std::string_view s, std::size_t pos, std::size_t* len);

std::vector<std::string> SplitWhitespace(std::string_view s);

std::string ToUpperAscii(std::string_view s);
std::string ToLowerAscii(std::string_view s);
std::string Trim(std::string_view s);

// Han, kana, hangul and CJK symbol ranges.
bool IsCjk(char32_t cp);

// ASCII punctuation or a common CJK / typographic punctuation mark.
bool IsPunctuation(char32_t cp);

// True when every code point of `token` is punctuation.
bool IsPunctuationToken(std::string_view token);

// Languages scored and segmented per character rather than per word.
bool IsCharacterLanguage(std::string_view language);

enum class Granularity { kWord, kChar };

Granularity GranularityFor(std::string_view language);

// Scoring normalization: ASCII lowercase, punctuation replaced by spaces
// (apostrophes inside words are kept), whitespace collapsed.
std::string NormalizeForScoring(std::string_view s);

// Scoring units: whitespace words, or non-space code points for kChar.
std::vector<std::string> ScoringTokens(std::string_view s, Granularity g,
                                       bool normalize);

std::string Join(const std::vector<std::string>& parts, std::string_view sep);

}  // namespace tokenforge::text

#endif  // TOKENFORGE_TEXT_H_
