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

#ifndef TOKENFORGE_FSQ_IO_H_
#define TOKENFORGE_FSQ_IO_H_

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "tokenforge/fsq_codec.h"

namespace tokenforge::fsq {

// {"input_dim", "low_rank_dim", "bound", "proj_down", "proj_up"} with the
// matrices as flat row-major arrays. Throws kConfig on schema violations.
FsqConfig FsqConfigFromJson(const nlohmann::json& j);
nlohmann::json FsqConfigToJson(const FsqConfig& cfg);
FsqConfig LoadFsqConfig(const std::string& path);

enum class TokenFormat { kText, kBinary };

// Binary token stream layout (little endian): "FSQT", u32 version, u32 D,
// u32 K, then one u32 per token.
inline constexpr char kTokenMagic[4] = {'F', 'S', 'Q', 'T'};
inline constexpr std::uint32_t kTokenStreamVersion = 1;

struct TokenStream {
  std::vector<TokenId> tokens;
  // Only known for binary streams; zero otherwise.
  std::uint32_t low_rank_dim = 0;
  std::uint32_t bound = 0;
};

void WriteTokensText(std::ostream& out, std::span<const TokenId> tokens);
// Throws kOutOfRange if a code does not fit in u32.
void WriteTokensBinary(std::ostream& out, std::span<const TokenId> tokens,
                       std::uint32_t low_rank_dim, std::uint32_t bound);

// Detects the format from the leading magic. Throws kIo on malformed input.
TokenStream ReadTokens(std::istream& in);

// One whitespace-separated real vector per non-empty line. Throws kIo on
// unparsable numbers and kDimensionMismatch on rows of the wrong width.
std::vector<std::vector<double>> ReadFeatureRows(std::istream& in, std::size_t dim);

// One quantized vector per line, components separated by single spaces.
void WriteQuantizedRows(std::ostream& out, std::span<const QuantizedVector> rows);

}  // namespace tokenforge::fsq

#endif  // TOKENFORGE_FSQ_IO_H_
