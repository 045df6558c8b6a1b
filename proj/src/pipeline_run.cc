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

#include "tokenforge/pipeline_run.h"

#include <sys/wait.h>

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <thread>

#include "tokenforge/error.h"
#include "tokenforge/fsq_codec.h"
#include "tokenforge/text.h"

namespace tokenforge::pipeline {
namespace fs = std::filesystem;
namespace {

// Stage names, in execution order.
constexpr const char* kStages[] = {"load",        "segment", "screen", "denoise", "transcript",
                                   "punctuation", "volume",  "count",  "ratio"};

struct Drop {
  std::string id;
  std::string stage;
  std::string reason;
  std::string detail;
};

struct Candidate {
  std::string id;
  AudioBuffer audio;
};

struct RowOutcome {
  std::size_t segments = 0;
  std::vector<nlohmann::json> records;
  std::vector<Drop> drops;
};

// Thrown inside a row to drop the current utterance.
struct StageFailure {
  std::string stage;
  std::string reason;
  std::string detail;
};

std::string ShellQuote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') {
      out += "'\\''";
    } else {
      out += c;
    }
  }
  return out + "'";
}

std::string SafeName(const std::string& id) {
  std::string out;
  for (char c : id) {
    const bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
    out += ok ? c : '_';
  }
  return out.empty() || out[0] == '.' ? "_" + out : out;
}

std::string Resolve(const std::string& base_dir, const std::string& path) {
  fs::path p(path);
  if (p.is_relative() && !base_dir.empty()) p = fs::path(base_dir) / p;
  return p.string();
}

bool Flag(const nlohmann::json& row, const char* key) {
  return row.contains(key) && row[key].is_boolean() && row[key].get<bool>();
}

bool HasPrecomputedTimings(const nlohmann::json& row) {
  return row.contains("word_timings") || row.contains("alignment_path");
}

class RowProcessor {
 public:
  RowProcessor(const RunOptions& options, const fs::path& scratch)
      : opt_(options), scratch_(scratch) {}

  RowOutcome Process(const nlohmann::json& row, const std::string& id, std::uint64_t seed) const {
    RowOutcome outcome;
    const std::string language = row.value("language", std::string("en"));
    std::vector<Candidate> candidates;
    try {
      candidates = Segments(row, id, seed, &outcome);
    } catch (const StageFailure& f) {
      outcome.drops.push_back({id, f.stage, f.reason, f.detail});
      return outcome;
    }
    for (auto& c : candidates) {
      try {
        outcome.records.push_back(Finish(row, c, language, seed));
      } catch (const StageFailure& f) {
        outcome.drops.push_back({c.id, f.stage, f.reason, f.detail});
      }
    }
    return outcome;
  }

 private:
  std::vector<Candidate> Segments(const nlohmann::json& row, const std::string& id,
                                  std::uint64_t seed, RowOutcome* outcome) const {
    AudioBuffer audio;
    try {
      audio = audio::ReadWav(Resolve(opt_.base_dir, row.value("audio_path", std::string())));
    } catch (const Error& e) {
      throw StageFailure{"load", "audio-unreadable", e.what()};
    }
    if (Flag(row, "processed")) {
      outcome->segments = 1;
      return {{id, std::move(audio)}};
    }
    if (audio.samples.empty()) throw StageFailure{"segment", "no-speech", "empty audio"};
    const auto tight = DetectSegments(audio, opt_.config);
    if (tight.empty()) throw StageFailure{"segment", "no-speech", ""};
    const auto padded = PadSegments(tight, audio.duration_s(), opt_.config);
    outcome->segments = padded.size();
    const bool precomputed = row.contains("hypotheses") || HasPrecomputedTimings(row);
    if (padded.size() > 1 && precomputed) {
      throw StageFailure{"segment", "multi-segment-precomputed",
                         std::to_string(padded.size()) + " segments"};
    }

    std::vector<Candidate> out;
    const double rate = audio.sample_rate_hz;
    for (std::size_t k = 0; k < padded.size(); ++k) {
      char suffix[16];
      std::snprintf(suffix, sizeof suffix, "_%03zu", k);
      Candidate c{padded.size() == 1 ? id : id + suffix, {}};
      const auto begin = static_cast<std::size_t>(std::llround(padded[k].start_s * rate));
      const auto end = static_cast<std::size_t>(std::llround(padded[k].end_s * rate));
      const auto screened = ScreenTruncation(audio::Slice(audio, begin, end), opt_.config);
      if (!screened.keep) {
        outcome->drops.push_back({c.id, "screen", "truncated", ""});
        continue;
      }
      if (screened.trimmed.samples.empty()) {
        outcome->drops.push_back({c.id, "screen", "empty-after-trim", ""});
        continue;
      }
      c.audio = screened.trimmed;
      if (!opt_.adapters.denoise.empty()) {
        try {
          c.audio = Denoise(c, row.value("language", std::string("en")), seed);
        } catch (const Error& e) {
          outcome->drops.push_back({c.id, "denoise", "denoise-failed", e.what()});
          continue;
        }
      }
      out.push_back(std::move(c));
    }
    return out;
  }

  std::string WriteScratchAudio(const Candidate& c) const {
    const auto path = scratch_ / (SafeName(c.id) + ".wav");
    audio::WriteWav(path.string(), c.audio);
    return path.string();
  }

  nlohmann::json Request(const Candidate& c, const char* stage, const std::string& language,
                         std::uint64_t seed) const {
    return {{"stage", stage},
            {"id", c.id},
            {"audio_path", WriteScratchAudio(c)},
            {"language", language},
            {"seed", seed}};
  }

  std::string RequestPath(const Candidate& c, const char* stage) const {
    return (scratch_ / (SafeName(c.id) + "." + stage + ".json")).string();
  }

  AudioBuffer Denoise(const Candidate& c, const std::string& language, std::uint64_t seed) const {
    const auto reply = RunAdapter(opt_.adapters.denoise, Request(c, "denoise", language, seed),
                                  RequestPath(c, "denoise"), seed);
    if (!reply.contains("audio_path") || !reply["audio_path"].is_string()) {
      Fail(ErrorKind::kIo, "denoise adapter reply lacks audio_path");
    }
    AudioBuffer out = audio::ReadWav(reply["audio_path"].get<std::string>());
    if (out.sample_rate_hz != c.audio.sample_rate_hz) {
      Fail(ErrorKind::kIo, "denoise adapter changed the sample rate");
    }
    return out;
  }

  std::vector<TranscriptHypothesis> Hypotheses(const nlohmann::json& row, const Candidate& c,
                                               const std::string& language,
                                               std::uint64_t seed) const {
    try {
      if (row.contains("hypotheses")) return HypothesesFromJson(row["hypotheses"]);
      const auto reply = RunAdapter(opt_.adapters.asr, Request(c, "asr", language, seed),
                                    RequestPath(c, "asr"), seed);
      if (!reply.contains("hypotheses")) Fail(ErrorKind::kIo, "asr adapter reply lacks hypotheses");
      return HypothesesFromJson(reply["hypotheses"]);
    } catch (const Error& e) {
      throw StageFailure{"transcript", "asr-failed", e.what()};
    }
  }

  std::vector<WordTiming> Timings(const nlohmann::json& row, const Candidate& c,
                                  const std::string& text, const std::string& language,
                                  std::uint64_t seed) const {
    try {
      if (row.contains("word_timings")) return WordTimingsFromJson(row["word_timings"]);
      if (row.contains("alignment_path")) {
        return ReadAlignmentTsv(Resolve(opt_.base_dir, row["alignment_path"].get<std::string>()));
      }
      auto request = Request(c, "align", language, seed);
      request["text"] = text;
      const auto reply = RunAdapter(opt_.adapters.align, request, RequestPath(c, "align"), seed);
      if (!reply.contains("word_timings")) {
        Fail(ErrorKind::kIo, "align adapter reply lacks word_timings");
      }
      return WordTimingsFromJson(reply["word_timings"]);
    } catch (const Error& e) {
      throw StageFailure{"punctuation", "align-failed", e.what()};
    } catch (const nlohmann::json::exception& e) {
      throw StageFailure{"punctuation", "align-failed", e.what()};
    }
  }

  nlohmann::json Finish(const nlohmann::json& row, const Candidate& c, const std::string& language,
                        std::uint64_t seed) const {
    const auto hyps = Hypotheses(row, c, language, seed);
    TranscriptDecision decision;
    try {
      decision = SelectTranscript(hyps, opt_.config.pairwise_wer_gate, language);
    } catch (const Error& e) {
      throw StageFailure{"transcript", "not-enough-hypotheses", e.what()};
    }
    if (!decision.accepted) {
      throw StageFailure{"transcript", "transcript-rejected",
                         "average pairwise WER " + std::to_string(decision.average_wer)};
    }
    const std::string& chosen = hyps[decision.medoid].text;

    const auto timings = Timings(row, c, chosen, language, seed);
    std::vector<std::string> tokens;
    try {
      tokens = AdjustPunctuation(TokenizeText(chosen, language), timings, opt_.config, language);
    } catch (const Error& e) {
      throw StageFailure{"punctuation", "alignment-mismatch", e.what()};
    }

    AudioBuffer normalized;
    try {
      normalized = NormalizeVolume(c.audio, opt_.config.peak_target);
    } catch (const Error& e) {
      throw StageFailure{"volume", "silent", e.what()};
    }

    UtteranceRecord record = RecordFromJson(row);
    record.id = c.id;
    record.language = language;
    record.text = RenderText(tokens, language);
    record.sample_rate = normalized.sample_rate_hz;
    record.speech_token_count = fsq::TokenCountForDuration(normalized.duration_s());
    record.text_token_count = TextTokenCount(record.text, language);
    if (record.text_token_count == 0) throw StageFailure{"count", "empty-text", ""};
    if (record.speech_token_count == 0) throw StageFailure{"count", "too-short", ""};
    record.length_ratio = LengthRatio(record.speech_token_count, record.text_token_count);

    const std::string rel = (fs::path(opt_.audio_subdir) / (SafeName(c.id) + ".wav")).string();
    audio::WriteWav((fs::path(opt_.output_dir) / rel).string(), normalized);
    record.audio_path = rel;

    auto& f = record.fields;
    nlohmann::json stored = nlohmann::json::array();
    for (const auto& h : hyps) stored.push_back({{"system_id", h.system_id}, {"text", h.text}});
    f["hypotheses"] = stored;
    f["word_timings"] = WordTimingsToJson(timings);
    f.erase("alignment_path");
    f["transcript_average_wer"] = decision.average_wer;
    f["processed"] = true;
    return RecordToJson(record);
  }

  const RunOptions& opt_;
  fs::path scratch_;
};

}  // namespace

std::vector<TranscriptHypothesis> HypothesesFromJson(const nlohmann::json& j) {
  if (!j.is_array()) Fail(ErrorKind::kInvalidInput, "hypotheses must be an array");
  std::vector<TranscriptHypothesis> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const auto& h = j[i];
    if (h.is_string()) {
      out.push_back({"h" + std::to_string(i), h.get<std::string>()});
    } else if (h.is_object() && h.contains("text") && h["text"].is_string()) {
      out.push_back({h.value("system_id", "h" + std::to_string(i)), h["text"].get<std::string>()});
    } else {
      Fail(ErrorKind::kInvalidInput, "hypothesis must be a string or {system_id, text}");
    }
  }
  return out;
}

std::vector<WordTiming> WordTimingsFromJson(const nlohmann::json& j) {
  if (!j.is_array()) Fail(ErrorKind::kInvalidInput, "word_timings must be an array");
  std::vector<WordTiming> out;
  for (const auto& t : j) {
    if (!t.is_object() || !t.contains("word") || !t.contains("start_ms") || !t.contains("end_ms")) {
      Fail(ErrorKind::kInvalidInput, "word timing needs word, start_ms and end_ms");
    }
    out.push_back({t["word"].get<std::string>(), t["start_ms"].get<std::int64_t>(),
                   t["end_ms"].get<std::int64_t>()});
  }
  return out;
}

nlohmann::json WordTimingsToJson(const std::vector<WordTiming>& timings) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& t : timings) {
    out.push_back({{"word", t.word}, {"start_ms", t.start_ms}, {"end_ms", t.end_ms}});
  }
  return out;
}

std::vector<WordTiming> ReadAlignmentTsv(const std::string& path) {
  std::ifstream in(path);
  if (!in) Fail(ErrorKind::kIo, "cannot open alignment file " + path);
  std::vector<WordTiming> out;
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (text::Trim(line).empty()) continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    for (std::string col; std::getline(ss, col, '\t');) cols.push_back(col);
    if (cols.size() != 3) {
      Fail(ErrorKind::kInvalidInput, path + ":" + std::to_string(lineno) + ": expected 3 columns");
    }
    WordTiming t{cols[0], 0, 0};
    try {
      std::size_t used1 = 0, used2 = 0;
      t.start_ms = std::stoll(cols[1], &used1);
      t.end_ms = std::stoll(cols[2], &used2);
      if (used1 != cols[1].size() || used2 != cols[2].size()) throw std::invalid_argument("junk");
    } catch (const std::exception&) {
      if (out.empty() && lineno == 1) continue;  // header
      Fail(ErrorKind::kInvalidInput, path + ":" + std::to_string(lineno) + ": bad timing");
    }
    out.push_back(std::move(t));
  }
  return out;
}

nlohmann::json RunAdapter(const std::string& command, const nlohmann::json& request,
                          const std::string& request_path, std::uint64_t seed) {
  {
    std::ofstream req(request_path);
    if (!req) Fail(ErrorKind::kIo, "cannot write adapter request " + request_path);
    req << request.dump() << '\n';
  }
  const std::string cmd =
      "TOKENFORGE_SEED=" + std::to_string(seed) + " " + command + " " + ShellQuote(request_path);
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (pipe == nullptr) Fail(ErrorKind::kIo, "cannot start adapter: " + command);
  std::string output;
  char buf[4096];
  for (std::size_t n; (n = std::fread(buf, 1, sizeof buf, pipe)) > 0;) output.append(buf, n);
  const int status = ::pclose(pipe);
  if (status == -1 || !WIFEXITED(status) || WEXITSTATUS(status) != 0) {
    Fail(ErrorKind::kIo, "adapter failed: " + command);
  }
  try {
    auto reply = nlohmann::json::parse(output);
    if (!reply.is_object()) Fail(ErrorKind::kIo, "adapter output is not a JSON object");
    return reply;
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorKind::kIo, std::string("adapter output is not JSON: ") + e.what());
  }
}

std::vector<nlohmann::json> ReadManifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) Fail(ErrorKind::kIo, "cannot open manifest " + path);
  std::vector<nlohmann::json> rows;
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    if (text::Trim(line).empty()) continue;
    try {
      rows.push_back(nlohmann::json::parse(line));
    } catch (const nlohmann::json::exception& e) {
      Fail(ErrorKind::kInvalidInput, path + ":" + std::to_string(lineno) + ": " + e.what());
    }
    if (!rows.back().is_object()) {
      Fail(ErrorKind::kInvalidInput, path + ":" + std::to_string(lineno) + ": not an object");
    }
  }
  return rows;
}

void WriteManifest(const std::string& path, const std::vector<nlohmann::json>& rows) {
  std::ofstream out(path);
  if (!out) Fail(ErrorKind::kIo, "cannot write manifest " + path);
  for (const auto& row : rows) out << row.dump() << '\n';
  if (!out) Fail(ErrorKind::kIo, "short write to " + path);
}

RunResult RunPipeline(const std::vector<nlohmann::json>& rows, const RunOptions& options) {
  options.config.Validate();
  std::vector<std::string> ids;
  std::set<std::string> seen;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& row = rows[i];
    char fallback[32];
    std::snprintf(fallback, sizeof fallback, "utt%06zu", i);
    ids.push_back(row.contains("id") && row["id"].is_string() ? row["id"].get<std::string>()
                                                              : std::string(fallback));
    if (!seen.insert(ids.back()).second) Fail(ErrorKind::kInvalidInput, "duplicate id " + ids.back());
    if (!Flag(row, "processed")) {
      if (!row.contains("hypotheses") && options.adapters.asr.empty()) {
        Fail(ErrorKind::kMissingAdapter, "row " + ids.back() + " has no hypotheses and no asr adapter");
      }
      if (!HasPrecomputedTimings(row) && options.adapters.align.empty()) {
        Fail(ErrorKind::kMissingAdapter,
             "row " + ids.back() + " has no word timings and no align adapter");
      }
    }
  }

  const fs::path out_dir = options.output_dir.empty() ? fs::path(".") : fs::path(options.output_dir);
  const fs::path scratch = out_dir / ".tokenforge-scratch";
  std::error_code ec;
  fs::create_directories(out_dir / options.audio_subdir, ec);
  fs::create_directories(scratch, ec);
  if (ec) Fail(ErrorKind::kIo, "cannot create output directories under " + out_dir.string());

  RunOptions resolved = options;
  resolved.output_dir = out_dir.string();
  const RowProcessor processor(resolved, scratch);
  std::vector<RowOutcome> outcomes(rows.size());
  std::vector<std::exception_ptr> errors(rows.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < rows.size();) {
      try {
        outcomes[i] = processor.Process(rows[i], ids[i], DeriveSeed(options.seed, i));
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const int jobs = std::max(1, std::min<int>(options.jobs, static_cast<int>(rows.size())));
  std::vector<std::thread> threads;
  for (int t = 1; t < jobs; ++t) threads.emplace_back(worker);
  worker();
  for (auto& t : threads) t.join();
  fs::remove_all(scratch, ec);
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  std::vector<nlohmann::json> survivors;
  std::vector<Drop> drops;
  std::size_t segments = 0;
  for (auto& o : outcomes) {
    segments += o.segments;
    for (auto& r : o.records) survivors.push_back(std::move(r));
    for (auto& d : o.drops) drops.push_back(std::move(d));
  }

  std::vector<std::size_t> ranked;
  std::vector<double> ratios;
  for (std::size_t i = 0; i < survivors.size(); ++i) {
    if (!Flag(survivors[i], "ratio_filtered")) {
      ranked.push_back(i);
      ratios.push_back(survivors[i]["length_ratio"].get<double>());
    }
  }
  const auto split =
      SplitByRatio(ratios, options.config.low_trim_frac, options.config.high_trim_frac);
  std::vector<bool> dropped(survivors.size(), false);
  for (auto k : split.dropped_low) {
    dropped[ranked[k]] = true;
    drops.push_back({survivors[ranked[k]]["id"], "ratio", "length-ratio-low", ""});
  }
  for (auto k : split.dropped_high) {
    dropped[ranked[k]] = true;
    drops.push_back({survivors[ranked[k]]["id"], "ratio", "length-ratio-high", ""});
  }

  RunResult result;
  for (std::size_t i = 0; i < survivors.size(); ++i) {
    if (dropped[i]) {
      fs::remove(out_dir / survivors[i]["audio_path"].get<std::string>(), ec);
      continue;
    }
    survivors[i]["ratio_filtered"] = true;
    result.records.push_back(std::move(survivors[i]));
  }

  nlohmann::json by_stage = nlohmann::json::object();
  for (const char* stage : kStages) by_stage[stage] = 0;
  std::map<std::string, int> by_reason;
  nlohmann::json drop_list = nlohmann::json::array();
  for (const auto& d : drops) {
    by_stage[d.stage] = by_stage[d.stage].get<int>() + 1;
    ++by_reason[d.reason];
    nlohmann::json entry = {{"id", d.id}, {"stage", d.stage}, {"reason", d.reason}};
    if (!d.detail.empty()) entry["detail"] = d.detail;
    drop_list.push_back(entry);
  }
  result.stats = {{"input_records", rows.size()},
                  {"segments", segments},
                  {"output_records", result.records.size()},
                  {"dropped_total", drops.size()},
                  {"dropped_by_stage", by_stage},
                  {"dropped_by_reason", by_reason},
                  {"drops", drop_list},
                  {"config", PipelineConfigToJson(options.config)}};
  return result;
}

}  // namespace tokenforge::pipeline
