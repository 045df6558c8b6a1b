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

#include "tokenforge/text.h"

#include <algorithm>
#include <cctype>

namespace tokenforge::text {

char32_t DecodeAt(std::string_view s, std::size_t pos, std::size_t* len) {
  const auto b0 = static_cast<unsigned char>(s[pos]);
  std::size_t n = 1;
  char32_t cp = b0;
  if (b0 >= 0xF0 && b0 < 0xF8) {
    n = 4;
    cp = b0 & 0x07;
  } else if (b0 >= 0xE0) {
    n = 3;
    cp = b0 & 0x0F;
  } else if (b0 >= 0xC0) {
    n = 2;
    cp = b0 & 0x1F;
  }
  if (n > 1) {
    if (pos + n > s.size()) {
      *len = 1;
      return b0;
    }
    for (std::size_t i = 1; i < n; ++i) {
      const auto b = static_cast<unsigned char>(s[pos + i]);
      if ((b & 0xC0) != 0x80) {
        *len = 1;
        return b0;
      }
      cp = (cp << 6) | (b & 0x3F);
    }
  }
  *len = n;
  return cp;
}

std::vector<std::string> SplitCodePoints(std::string_view s) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos < s.size()) {
    std::size_t len = 1;
    DecodeAt(s, pos, &len);
    out.emplace_back(s.substr(pos, len));
    pos += len;
  }
  return out;
}

std::vector<std::string> SplitWhitespace(std::string_view s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    const std::size_t start = i;
    while (i < s.size() && !std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    if (i > start) out.emplace_back(s.substr(start, i - start));
  }
  return out;
}

std::string ToUpperAscii(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c >= 'a' && c <= 'z') c = static_cast<char>(c - 'a' + 'A');
  }
  return out;
}

std::string ToLowerAscii(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

std::string Trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

bool IsCjk(char32_t cp) {
  return (cp >= 0x3040 && cp <= 0x30FF) ||  // kana
         (cp >= 0x3400 && cp <= 0x4DBF) ||  // ext A
         (cp >= 0x4E00 && cp <= 0x9FFF) ||  // unified ideographs
         (cp >= 0xAC00 && cp <= 0xD7AF) ||  // hangul syllables
         (cp >= 0x1100 && cp <= 0x11FF) ||  // hangul jamo
         (cp >= 0xF900 && cp <= 0xFAFF) ||  // compatibility ideographs
         (cp >= 0x20000 && cp <= 0x2FA1F);
}

bool IsPunctuation(char32_t cp) {
  if (cp < 0x80) return std::ispunct(static_cast<int>(cp)) != 0;
  switch (cp) {
    case U'。':  // 。
    case U'，':  // ，
    case U'、':  // 、
    case U'？':  // ？
    case U'！':  // ！
    case U'：':  // ：
    case U'；':  // ；
    case U'“':
    case U'”':
    case U'‘':
    case U'’':
    case U'（':
    case U'）':
    case U'《':
    case U'》':
    case U'「':
    case U'」':
    case U'\u2026':  // ellipsis
    case U'\u2014':  // dash
    case U'¿':
    case U'¡':
    case U'«':
    case U'»':
      return true;
    default:
      return false;
  }
}

bool IsPunctuationToken(std::string_view token) {
  if (token.empty()) return false;
  std::size_t pos = 0;
  while (pos < token.size()) {
    std::size_t len = 1;
    if (!IsPunctuation(DecodeAt(token, pos, &len))) return false;
    pos += len;
  }
  return true;
}

bool IsCharacterLanguage(std::string_view language) {
  const std::string lang = ToLowerAscii(language);
  const std::string base = lang.substr(0, lang.find_first_of("-_"));
  return base == "zh" || base == "ja" || base == "ko" || base == "yue" ||
         base == "cmn" || base == "wuu";
}

Granularity GranularityFor(std::string_view language) {
  return IsCharacterLanguage(language) ? Granularity::kChar : Granularity::kWord;
}

std::string NormalizeForScoring(std::string_view s) {
  std::string spaced;
  spaced.reserve(s.size());
  std::size_t pos = 0;
  while (pos < s.size()) {
    std::size_t len = 1;
    const char32_t cp = DecodeAt(s, pos, &len);
    if (cp == U'\'' && pos > 0 && pos + 1 < s.size() &&
        std::isalnum(static_cast<unsigned char>(s[pos - 1])) &&
        std::isalnum(static_cast<unsigned char>(s[pos + 1]))) {
      spaced += '\'';
    } else if (IsPunctuation(cp)) {
      spaced += ' ';
    } else {
      spaced.append(s.substr(pos, len));
    }
    pos += len;
  }
  return Join(SplitWhitespace(ToLowerAscii(spaced)), " ");
}

std::vector<std::string> ScoringTokens(std::string_view s, Granularity g,
                                       bool normalize) {
  const std::string prepared = normalize ? NormalizeForScoring(s) : std::string(s);
  if (g == Granularity::kWord) return SplitWhitespace(prepared);
  std::vector<std::string> out;
  for (auto& cp : SplitCodePoints(prepared)) {
    if (cp.size() == 1 && std::isspace(static_cast<unsigned char>(cp[0]))) continue;
    out.push_back(std::move(cp));
  }
  return out;
}

std::string Join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i > 0) out.append(sep);
    out.append(parts[i]);
  }
  return out;
}

}  // namespace tokenforge::text
