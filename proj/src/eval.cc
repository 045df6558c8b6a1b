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

#include "tokenforge/eval.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "tokenforge/error.h"

namespace tokenforge::eval {

EditOps EditDistance(std::span<const std::string> ref, std::span<const std::string> hyp) {
  const std::size_t n = ref.size();
  const std::size_t m = hyp.size();
  std::vector<std::size_t> dp((n + 1) * (m + 1));
  auto at = [&](std::size_t i, std::size_t j) -> std::size_t& { return dp[i * (m + 1) + j]; };
  for (std::size_t i = 0; i <= n; ++i) at(i, 0) = i;
  for (std::size_t j = 0; j <= m; ++j) at(0, j) = j;
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      const std::size_t sub = at(i - 1, j - 1) + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      at(i, j) = std::min({sub, at(i - 1, j) + 1, at(i, j - 1) + 1});
    }
  }

  EditOps ops;
  ops.distance = at(n, m);
  std::size_t i = n, j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && at(i, j) == at(i - 1, j) + 1) {
      ++ops.deletions;
      --i;
    } else if (i > 0 && j > 0 &&
               at(i, j) == at(i - 1, j - 1) + (ref[i - 1] == hyp[j - 1] ? 0 : 1)) {
      if (ref[i - 1] != hyp[j - 1]) ++ops.substitutions;
      --i;
      --j;
    } else {
      ++ops.insertions;
      --j;
    }
  }
  return ops;
}

double ErrorRate(std::string_view ref, std::string_view hyp, text::Granularity granularity,
                 const ScoringOptions& options) {
  const auto r = text::ScoringTokens(ref, granularity, options.normalize);
  if (r.empty()) Fail(ErrorKind::kInvalidInput, "reference is empty after tokenization");
  const auto h = text::ScoringTokens(hyp, granularity, options.normalize);
  return static_cast<double>(EditDistance(r, h).distance) / static_cast<double>(r.size());
}

double CosineSimilarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    Fail(ErrorKind::kDimensionMismatch, "embeddings have different dimensions");
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (!(na > 0.0) || !(nb > 0.0)) Fail(ErrorKind::kInvalidInput, "zero-norm embedding");
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

double RelativeImprovement(double old_value, double new_value) {
  if (!(old_value > 0.0)) {
    Fail(ErrorKind::kInvalidInput, "relative improvement needs a positive baseline");
  }
  return 100.0 * (old_value - new_value) / old_value;
}

bool LanguageOrder(const std::string& a, const std::string& b) {
  static constexpr std::array<const char*, 9> kPreferred = {"zh", "en", "ja", "ko", "de",
                                                            "es", "fr", "it", "ru"};
  auto rank = [](const std::string& s) {
    for (std::size_t i = 0; i < kPreferred.size(); ++i) {
      if (s == kPreferred[i]) return i;
    }
    return kPreferred.size();
  };
  const auto ra = rank(a), rb = rank(b);
  if (ra != rb) return ra < rb;
  return a < b;
}

namespace {

double SortedSum(std::vector<double>& values) {
  std::sort(values.begin(), values.end());
  double total = 0.0;
  for (double v : values) total += v;
  return total;
}

struct Accumulator {
  LanguageStats stats;
  // Per-item values are summed in sorted order, so the result does not depend
  // on input order.
  std::vector<double> rates;
  std::vector<double> similarities;
  std::size_t emotion_correct = 0;

  void Add(const EvalItem& item, const ScoringOptions& options) {
    ++stats.n;
    const auto g = text::GranularityFor(item.language);
    const auto ref = text::ScoringTokens(item.reference, g, options.normalize);
    if (ref.empty()) {
      ++stats.n_unscored;
    } else {
      const auto hyp = text::ScoringTokens(item.hypothesis, g, options.normalize);
      const std::size_t d = EditDistance(ref, hyp).distance;
      rates.push_back(static_cast<double>(d) / static_cast<double>(ref.size()));
      stats.total_edits += d;
      stats.total_ref_tokens += ref.size();
    }
    if (item.reference_embedding && item.hypothesis_embedding) {
      similarities.push_back(
          CosineSimilarity(*item.reference_embedding, *item.hypothesis_embedding));
      ++stats.n_similarity;
    }
    if (item.target_emotion && item.predicted_emotion) {
      const bool hit = *item.target_emotion == *item.predicted_emotion;
      ++stats.n_emotion;
      emotion_correct += hit ? 1 : 0;
      auto& per = stats.per_emotion[*item.target_emotion];
      ++per.n;
      per.correct += hit ? 1 : 0;
    }
  }

  LanguageStats Finish() {
    const std::size_t scored = stats.n - stats.n_unscored;
    if (scored > 0) {
      stats.error_rate = SortedSum(rates) / static_cast<double>(scored);
      stats.corpus_error_rate =
          static_cast<double>(stats.total_edits) / static_cast<double>(stats.total_ref_tokens);
    }
    if (stats.n_similarity > 0) {
      stats.mean_similarity = SortedSum(similarities) / static_cast<double>(stats.n_similarity);
    }
    if (stats.n_emotion > 0) {
      stats.emotion_accuracy =
          static_cast<double>(emotion_correct) / static_cast<double>(stats.n_emotion);
    }
    return stats;
  }
};

}  // namespace

EvalReport Aggregate(std::span<const EvalItem> items, const ScoringOptions& options) {
  std::map<std::string, Accumulator> groups;
  Accumulator overall;
  overall.stats.language = "all";
  for (const auto& item : items) {
    auto& acc = groups[item.language];
    acc.stats.language = item.language;
    acc.stats.granularity = text::GranularityFor(item.language);
    acc.Add(item, options);
    overall.Add(item, options);
  }
  EvalReport report;
  for (auto& [lang, acc] : groups) report.languages.push_back(acc.Finish());
  std::sort(report.languages.begin(), report.languages.end(),
            [](const LanguageStats& a, const LanguageStats& b) {
              return LanguageOrder(a.language, b.language);
            });
  report.overall = overall.Finish();
  return report;
}

std::vector<double> ReadEmbeddingFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(ErrorKind::kIo, "cannot open embedding file " + path);
  std::array<unsigned char, 4> b{};
  if (!in.read(reinterpret_cast<char*>(b.data()), 4)) {
    Fail(ErrorKind::kIo, "embedding file " + path + " has no header");
  }
  const std::uint32_t dim =
      b[0] | (b[1] << 8) | (b[2] << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
  std::vector<double> values;
  values.reserve(dim);
  for (std::uint32_t i = 0; i < dim; ++i) {
    if (!in.read(reinterpret_cast<char*>(b.data()), 4)) {
      Fail(ErrorKind::kIo, "embedding file " + path + " is truncated");
    }
    const std::uint32_t bits =
        b[0] | (b[1] << 8) | (b[2] << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
    float f;
    std::memcpy(&f, &bits, 4);
    values.push_back(f);
  }
  return values;
}

void WriteEmbeddingFile(const std::string& path, std::span<const double> values) {
  std::ofstream out(path, std::ios::binary);
  if (!out) Fail(ErrorKind::kIo, "cannot write embedding file " + path);
  auto put = [&](std::uint32_t v) {
    const std::array<char, 4> b = {static_cast<char>(v & 0xFF), static_cast<char>((v >> 8) & 0xFF),
                                   static_cast<char>((v >> 16) & 0xFF),
                                   static_cast<char>((v >> 24) & 0xFF)};
    out.write(b.data(), 4);
  };
  put(static_cast<std::uint32_t>(values.size()));
  for (double v : values) {
    const auto f = static_cast<float>(v);
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    put(bits);
  }
}

namespace {

std::optional<std::vector<double>> Embedding(const nlohmann::json& j, const char* inline_key,
                                             const char* path_key, const std::string& base_dir) {
  if (j.contains(inline_key) && !j[inline_key].is_null()) {
    if (!j[inline_key].is_array()) {
      Fail(ErrorKind::kInvalidInput, std::string(inline_key) + " must be an array");
    }
    std::vector<double> v;
    for (const auto& x : j[inline_key]) v.push_back(x.get<double>());
    return v;
  }
  if (j.contains(path_key) && j[path_key].is_string()) {
    std::filesystem::path p = j[path_key].get<std::string>();
    if (p.is_relative() && !base_dir.empty()) p = std::filesystem::path(base_dir) / p;
    return ReadEmbeddingFile(p.string());
  }
  return std::nullopt;
}

std::optional<std::string> OptionalString(const nlohmann::json& j, const char* key) {
  if (j.contains(key) && j[key].is_string()) return j[key].get<std::string>();
  return std::nullopt;
}

nlohmann::json StatsToJson(const LanguageStats& s) {
  nlohmann::json j = {
      {"language", s.language},
      {"metric", s.granularity == text::Granularity::kChar ? "cer" : "wer"},
      {"n", s.n},
      {"n_unscored", s.n_unscored},
      {"error_rate", s.error_rate},
      {"corpus_error_rate", s.corpus_error_rate},
      {"total_edits", s.total_edits},
      {"total_ref_tokens", s.total_ref_tokens},
      {"n_similarity", s.n_similarity},
      {"mean_similarity", nullptr},
      {"n_emotion", s.n_emotion},
      {"emotion_accuracy", nullptr},
  };
  if (s.mean_similarity) j["mean_similarity"] = *s.mean_similarity;
  if (s.emotion_accuracy) j["emotion_accuracy"] = *s.emotion_accuracy;
  nlohmann::json per = nlohmann::json::object();
  for (const auto& [emotion, e] : s.per_emotion) {
    per[emotion] = {{"n", e.n}, {"correct", e.correct}, {"accuracy", e.accuracy()}};
  }
  j["per_emotion"] = per;
  return j;
}

}  // namespace

EvalItem EvalItemFromJson(const nlohmann::json& j, const std::string& base_dir) {
  if (!j.is_object()) Fail(ErrorKind::kInvalidInput, "eval item must be a JSON object");
  EvalItem item;
  item.id = j.value("id", std::string());
  item.language = j.value("language", std::string("en"));
  if (!j.contains("reference") || !j["reference"].is_string() || !j.contains("hypothesis") ||
      !j["hypothesis"].is_string()) {
    Fail(ErrorKind::kInvalidInput, "eval item " + item.id + " needs reference and hypothesis text");
  }
  item.reference = j["reference"].get<std::string>();
  item.hypothesis = j["hypothesis"].get<std::string>();
  item.reference_embedding = Embedding(j, "ref_embedding", "ref_embedding_path", base_dir);
  item.hypothesis_embedding = Embedding(j, "hyp_embedding", "hyp_embedding_path", base_dir);
  item.target_emotion = OptionalString(j, "target_emotion");
  item.predicted_emotion = OptionalString(j, "predicted_emotion");
  return item;
}

nlohmann::json ReportToJson(const EvalReport& report) {
  nlohmann::json langs = nlohmann::json::array();
  for (const auto& s : report.languages) langs.push_back(StatsToJson(s));
  return {{"languages", langs}, {"overall", StatsToJson(report.overall)}};
}

std::string ReportToTable(const EvalReport& report) {
  std::vector<std::array<std::string, 5>> rows;
  rows.push_back({"Language", "N", "WER/CER (%)", "SS", "EmoAcc"});
  auto fmt = [](double v, int digits) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(digits) << v;
    return s.str();
  };
  auto add = [&](const LanguageStats& s, const std::string& label) {
    const bool scored = s.n > s.n_unscored;
    std::string rate = scored ? fmt(100.0 * s.error_rate, 2) : "-";
    if (scored && s.language != "all") {
      rate += s.granularity == text::Granularity::kChar ? " (CER)" : " (WER)";
    }
    rows.push_back({label, std::to_string(s.n), rate,
                    s.mean_similarity ? fmt(*s.mean_similarity, 3) : "-",
                    s.emotion_accuracy ? fmt(*s.emotion_accuracy, 2) : "-"});
  };
  for (const auto& s : report.languages) add(s, s.language);
  add(report.overall, "all");

  std::array<std::size_t, 5> width{};
  for (const auto& r : rows) {
    for (std::size_t c = 0; c < 5; ++c) width[c] = std::max(width[c], r[c].size());
  }
  std::ostringstream out;
  auto line = [&](const std::array<std::string, 5>& r) {
    for (std::size_t c = 0; c < 5; ++c) {
      if (c > 0) out << " | ";
      if (c == 0) {
        out << std::left << std::setw(static_cast<int>(width[c])) << r[c];
      } else {
        out << std::right << std::setw(static_cast<int>(width[c])) << r[c];
      }
    }
    out << '\n';
  };
  line(rows[0]);
  std::size_t total = 3 * 4;
  for (auto w : width) total += w;
  out << std::string(total, '-') << '\n';
  for (std::size_t i = 1; i + 1 < rows.size(); ++i) line(rows[i]);
  out << std::string(total, '-') << '\n';
  line(rows.back());
  return out.str();
}

}  // namespace tokenforge::eval
