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

#include "tokenforge/fsq_io.h"

#include <array>
#include <charconv>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "tokenforge/error.h"
#include "tokenforge/text.h"

namespace tokenforge::fsq {
namespace {

Matrix MatrixField(const nlohmann::json& j, const char* key, std::size_t rows,
                   std::size_t cols) {
  if (!j.contains(key) || !j[key].is_array()) {
    Fail(ErrorKind::kConfig, std::string("missing array field \"") + key + "\"");
  }
  std::vector<double> data;
  for (const auto& v : j[key]) {
    if (!v.is_number()) Fail(ErrorKind::kConfig, std::string(key) + " holds a non-number");
    data.push_back(v.get<double>());
  }
  if (data.size() != rows * cols) {
    Fail(ErrorKind::kConfig, std::string(key) + " has " + std::to_string(data.size()) +
                                 " entries, expected " + std::to_string(rows * cols));
  }
  return Matrix(rows, cols, std::move(data));
}

std::size_t PositiveField(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_number_integer() || j[key].get<std::int64_t>() < 1) {
    Fail(ErrorKind::kConfig, std::string("\"") + key + "\" must be a positive integer");
  }
  return j[key].get<std::size_t>();
}

void PutU32(std::ostream& out, std::uint32_t v) {
  const std::array<char, 4> b = {static_cast<char>(v & 0xFF),
                                 static_cast<char>((v >> 8) & 0xFF),
                                 static_cast<char>((v >> 16) & 0xFF),
                                 static_cast<char>((v >> 24) & 0xFF)};
  out.write(b.data(), 4);
}

bool GetU32(std::istream& in, std::uint32_t* v) {
  std::array<unsigned char, 4> b{};
  if (!in.read(reinterpret_cast<char*>(b.data()), 4)) return false;
  *v = b[0] | (b[1] << 8) | (b[2] << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
  return true;
}

}  // namespace

FsqConfig FsqConfigFromJson(const nlohmann::json& j) {
  if (!j.is_object()) Fail(ErrorKind::kConfig, "FSQ config must be a JSON object");
  FsqConfig cfg;
  cfg.input_dim = PositiveField(j, "input_dim");
  cfg.low_rank_dim = PositiveField(j, "low_rank_dim");
  const std::size_t bound = PositiveField(j, "bound");
  if (bound > static_cast<std::size_t>(std::numeric_limits<std::int32_t>::max() / 2)) {
    Fail(ErrorKind::kConfig, "bound is too large");
  }
  cfg.bound = static_cast<int>(bound);
  cfg.proj_down = MatrixField(j, "proj_down", cfg.low_rank_dim, cfg.input_dim);
  cfg.proj_up = MatrixField(j, "proj_up", cfg.input_dim, cfg.low_rank_dim);
  cfg.Validate();
  return cfg;
}

nlohmann::json FsqConfigToJson(const FsqConfig& cfg) {
  return {{"input_dim", cfg.input_dim},
          {"low_rank_dim", cfg.low_rank_dim},
          {"bound", cfg.bound},
          {"proj_down", cfg.proj_down.data()},
          {"proj_up", cfg.proj_up.data()}};
}

FsqConfig LoadFsqConfig(const std::string& path) {
  std::ifstream in(path);
  if (!in) Fail(ErrorKind::kIo, "cannot open FSQ config " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorKind::kConfig, "invalid JSON in " + path + ": " + e.what());
  }
  return FsqConfigFromJson(j);
}

void WriteTokensText(std::ostream& out, std::span<const TokenId> tokens) {
  for (const auto& t : tokens) out << t.code << '\n';
}

void WriteTokensBinary(std::ostream& out, std::span<const TokenId> tokens,
                       std::uint32_t low_rank_dim, std::uint32_t bound) {
  out.write(kTokenMagic, 4);
  PutU32(out, kTokenStreamVersion);
  PutU32(out, low_rank_dim);
  PutU32(out, bound);
  for (const auto& t : tokens) {
    if (t.code > std::numeric_limits<std::uint32_t>::max()) {
      Fail(ErrorKind::kOutOfRange, "token " + std::to_string(t.code) +
                                       " does not fit the u32 binary stream");
    }
    PutU32(out, static_cast<std::uint32_t>(t.code));
  }
}

TokenStream ReadTokens(std::istream& in) {
  TokenStream stream;
  char magic[4] = {};
  in.read(magic, 4);
  const auto got = in.gcount();
  if (got == 4 && std::memcmp(magic, kTokenMagic, 4) == 0) {
    std::uint32_t version = 0;
    if (!GetU32(in, &version) || !GetU32(in, &stream.low_rank_dim) ||
        !GetU32(in, &stream.bound)) {
      Fail(ErrorKind::kIo, "truncated token stream header");
    }
    if (version != kTokenStreamVersion) {
      Fail(ErrorKind::kIo, "unsupported token stream version " + std::to_string(version));
    }
    std::uint32_t code = 0;
    while (GetU32(in, &code)) stream.tokens.push_back(TokenId{code});
    if (in.gcount() != 0) Fail(ErrorKind::kIo, "token stream ends mid-record");
    return stream;
  }

  std::string text(magic, static_cast<std::size_t>(got));
  text.append(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  for (const auto& field : text::SplitWhitespace(text)) {
    std::uint64_t code = 0;
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), code);
    if (ec != std::errc() || ptr != field.data() + field.size()) {
      Fail(ErrorKind::kIo, "bad token \"" + field + "\"");
    }
    stream.tokens.push_back(TokenId{code});
  }
  return stream;
}

std::vector<std::vector<double>> ReadFeatureRows(std::istream& in, std::size_t dim) {
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto fields = text::SplitWhitespace(line);
    if (fields.empty()) continue;
    std::vector<double> row;
    row.reserve(fields.size());
    for (const auto& f : fields) {
      std::istringstream parse(f);
      double v = 0.0;
      if (!(parse >> v) || !parse.eof()) {
        Fail(ErrorKind::kIo, "line " + std::to_string(line_no) + ": bad number \"" + f + "\"");
      }
      row.push_back(v);
    }
    if (row.size() != dim) {
      Fail(ErrorKind::kDimensionMismatch, "line " + std::to_string(line_no) + " has " +
                                              std::to_string(row.size()) +
                                              " values, expected " + std::to_string(dim));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

void WriteQuantizedRows(std::ostream& out, std::span<const QuantizedVector> rows) {
  for (const auto& q : rows) {
    for (std::size_t j = 0; j < q.values.size(); ++j) {
      if (j > 0) out << ' ';
      out << q.values[j];
    }
    out << '\n';
  }
}

}  // namespace tokenforge::fsq
