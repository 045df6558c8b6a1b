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

#ifndef TOKENFORGE_EVAL_H_
#define TOKENFORGE_EVAL_H_

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "tokenforge/text.h"

namespace tokenforge::eval {

struct EditOps {
  std::size_t distance = 0;
  std::size_t substitutions = 0;
  std::size_t insertions = 0;
  std::size_t deletions = 0;

  friend bool operator==(const EditOps&, const EditOps&) = default;
};

// Unit-cost Levenshtein distance. The backtrace prefers deletions, then
// substitutions/matches, then insertions, so the S/I/D split is canonical.
EditOps EditDistance(std::span<const std::string> ref, std::span<const std::string> hyp);

struct ScoringOptions {
  bool normalize = true;
};

// Edit distance divided by the reference length, over words or characters.
// Throws kInvalidInput when the reference has no tokens.
double ErrorRate(std::string_view ref, std::string_view hyp, text::Granularity granularity,
                 const ScoringOptions& options = {});

// a.b / (|a| |b|), clamped to [-1, 1]. Throws on unequal dimensions or a zero
// vector.
double CosineSimilarity(std::span<const double> a, std::span<const double> b);

// 100 * (old - new) / old. Throws kInvalidInput when old <= 0.
double RelativeImprovement(double old_value, double new_value);

struct EvalItem {
  std::string id;
  std::string language;
  std::string reference;
  std::string hypothesis;
  std::optional<std::vector<double>> reference_embedding;
  std::optional<std::vector<double>> hypothesis_embedding;
  std::optional<std::string> target_emotion;
  std::optional<std::string> predicted_emotion;
};

struct EmotionStats {
  std::size_t n = 0;
  std::size_t correct = 0;
  double accuracy() const { return n == 0 ? 0.0 : static_cast<double>(correct) / n; }
};

struct LanguageStats {
  std::string language;
  text::Granularity granularity = text::Granularity::kWord;
  std::size_t n = 0;
  // Items with an empty reference count towards n but carry no error rate.
  std::size_t n_unscored = 0;
  // Mean of per-utterance error rates.
  double error_rate = 0.0;
  // Total edits over total reference tokens.
  double corpus_error_rate = 0.0;
  std::size_t total_edits = 0;
  std::size_t total_ref_tokens = 0;
  std::size_t n_similarity = 0;
  std::optional<double> mean_similarity;
  std::size_t n_emotion = 0;
  std::optional<double> emotion_accuracy;
  std::map<std::string, EmotionStats> per_emotion;
};

struct EvalReport {
  std::vector<LanguageStats> languages;  // see LanguageOrder
  LanguageStats overall;
};

// zh, en, ja, ko, de, es, fr, it, ru first, then any other tag alphabetically.
bool LanguageOrder(const std::string& a, const std::string& b);

// Groups by language and aggregates. Emotion accuracy covers items carrying
// both labels; similarity covers items carrying both embeddings.
EvalReport Aggregate(std::span<const EvalItem> items, const ScoringOptions& options = {});

// JSONL item I/O. Embeddings come inline ("ref_embedding", "hyp_embedding"
// arrays) or from side files ("ref_embedding_path", "hyp_embedding_path")
// holding a u32 little-endian dimension followed by that many f32 values.
// Relative side-file paths resolve against base_dir.
EvalItem EvalItemFromJson(const nlohmann::json& j, const std::string& base_dir = "");
std::vector<double> ReadEmbeddingFile(const std::string& path);
void WriteEmbeddingFile(const std::string& path, std::span<const double> values);

nlohmann::json ReportToJson(const EvalReport& report);
// Plain-text table: Language | N | WER/CER (%) | SS | EmoAcc.
std::string ReportToTable(const EvalReport& report);

}  // namespace tokenforge::eval

#endif  // TOKENFORGE_EVAL_H_
