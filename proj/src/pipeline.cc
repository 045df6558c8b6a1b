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

#include "tokenforge/pipeline.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "tokenforge/error.h"
#include "tokenforge/eval.h"
#include "tokenforge/numeric.h"
#include "tokenforge/text.h"

namespace tokenforge::pipeline {
namespace {

double RmsDb(std::span<const double> x) {
  if (x.empty()) return -std::numeric_limits<double>::infinity();
  double power = 0.0;
  for (double s : x) power += s * s;
  power /= static_cast<double>(x.size());
  if (power <= 0.0) return -std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(power);
}

struct Run {
  std::size_t begin;  // frames
  std::size_t end;
};

// Splits [begin, end) into pieces of at most max_frames, cutting before the
// quietest frame in the allowed window.
void SplitRun(Run run, std::size_t max_frames, const std::vector<double>& levels,
              std::vector<Run>* out) {
  while (run.end - run.begin > max_frames) {
    const std::size_t len = run.end - run.begin;
    std::size_t lo, hi;
    if (len <= 2 * max_frames) {
      lo = run.end - max_frames;  // both halves fit
      hi = run.begin + max_frames;
    } else {
      lo = run.begin + 1;
      hi = run.begin + max_frames;
    }
    std::size_t cut = lo;
    for (std::size_t f = lo; f <= hi; ++f) {
      if (levels[f] <= levels[cut]) cut = f;
    }
    out->push_back({run.begin, cut});
    run.begin = cut;
  }
  out->push_back(run);
}

bool IsOpeningPunctuation(std::string_view token) {
  static const std::set<std::string_view> kOpening = {"(", "[", "{", "“", "‘",
                                                      "«", "¿", "¡", "（",
                                                      "「", "『", "【", "《"};
  for (const auto& cp : text::SplitCodePoints(token)) {
    if (!kOpening.contains(cp)) return false;
  }
  return !token.empty();
}

bool IsPauseMark(std::string_view cp) {
  static const std::set<std::string_view> kPause = {
      ",", ";", ":", ".", "?", "!", "，", "；", "：", "。", "？", "！",
      "、"};
  return kPause.contains(cp);
}

bool HasPauseMark(std::string_view token) {
  const auto cps = text::SplitCodePoints(token);
  return std::any_of(cps.begin(), cps.end(), [](const std::string& cp) { return IsPauseMark(cp); });
}

std::string WithoutPauseMarks(std::string_view token) {
  std::string out;
  for (const auto& cp : text::SplitCodePoints(token)) {
    if (!IsPauseMark(cp)) out += cp;
  }
  return out;
}

}  // namespace

void PipelineConfig::Validate() const {
  auto bad = [](const std::string& what) { Fail(ErrorKind::kConfig, "pipeline config: " + what); };
  if (!std::isfinite(vad_energy_threshold_db)) bad("vad_energy_threshold_db must be finite");
  if (frame_ms <= 0) bad("frame_ms must be positive");
  if (merge_gap_ms < 0) bad("merge_gap_ms must be non-negative");
  if (!(max_segment_s > 0.0) || !std::isfinite(max_segment_s)) bad("max_segment_s must be positive");
  if (segment_padding_ms < 0) bad("segment_padding_ms must be non-negative");
  if (comma_gap_ms <= remove_punct_gap_ms) bad("comma_gap_ms must exceed remove_punct_gap_ms");
  if (!(pairwise_wer_gate > 0.0 && pairwise_wer_gate < 1.0)) bad("pairwise_wer_gate must be in (0, 1)");
  if (!(peak_target > 0.0 && peak_target <= 1.0)) bad("peak_target must be in (0, 1]");
  if (!(low_trim_frac >= 0.0) || !(high_trim_frac >= 0.0) || !(low_trim_frac + high_trim_frac < 1.0)) {
    bad("trim fractions must be non-negative and sum below 1");
  }
}

PipelineConfig PipelineConfigFromJson(const nlohmann::json& j) {
  if (!j.is_object()) Fail(ErrorKind::kConfig, "pipeline config must be a JSON object");
  PipelineConfig cfg;
  static const std::set<std::string> kKnown = {
      "vad_energy_threshold_db", "frame_ms",     "merge_gap_ms",       "max_segment_s",
      "segment_padding_ms",      "comma_gap_ms", "remove_punct_gap_ms", "pairwise_wer_gate",
      "peak_target",             "low_trim_frac", "high_trim_frac"};
  for (const auto& [key, value] : j.items()) {
    if (!kKnown.contains(key)) Fail(ErrorKind::kConfig, "unknown pipeline config key: " + key);
    if (!value.is_number()) Fail(ErrorKind::kConfig, "pipeline config key " + key + " must be a number");
  }
  try {
    cfg.vad_energy_threshold_db = j.value("vad_energy_threshold_db", cfg.vad_energy_threshold_db);
    cfg.frame_ms = j.value("frame_ms", cfg.frame_ms);
    cfg.merge_gap_ms = j.value("merge_gap_ms", cfg.merge_gap_ms);
    cfg.max_segment_s = j.value("max_segment_s", cfg.max_segment_s);
    cfg.segment_padding_ms = j.value("segment_padding_ms", cfg.segment_padding_ms);
    cfg.comma_gap_ms = j.value("comma_gap_ms", cfg.comma_gap_ms);
    cfg.remove_punct_gap_ms = j.value("remove_punct_gap_ms", cfg.remove_punct_gap_ms);
    cfg.pairwise_wer_gate = j.value("pairwise_wer_gate", cfg.pairwise_wer_gate);
    cfg.peak_target = j.value("peak_target", cfg.peak_target);
    cfg.low_trim_frac = j.value("low_trim_frac", cfg.low_trim_frac);
    cfg.high_trim_frac = j.value("high_trim_frac", cfg.high_trim_frac);
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorKind::kConfig, std::string("pipeline config: ") + e.what());
  }
  cfg.Validate();
  return cfg;
}

nlohmann::json PipelineConfigToJson(const PipelineConfig& cfg) {
  return {{"vad_energy_threshold_db", cfg.vad_energy_threshold_db},
          {"frame_ms", cfg.frame_ms},
          {"merge_gap_ms", cfg.merge_gap_ms},
          {"max_segment_s", cfg.max_segment_s},
          {"segment_padding_ms", cfg.segment_padding_ms},
          {"comma_gap_ms", cfg.comma_gap_ms},
          {"remove_punct_gap_ms", cfg.remove_punct_gap_ms},
          {"pairwise_wer_gate", cfg.pairwise_wer_gate},
          {"peak_target", cfg.peak_target},
          {"low_trim_frac", cfg.low_trim_frac},
          {"high_trim_frac", cfg.high_trim_frac}};
}

std::size_t FrameLength(const AudioBuffer& audio, const PipelineConfig& cfg) {
  const double len = std::round(audio.sample_rate_hz * static_cast<double>(cfg.frame_ms) / 1000.0);
  return std::max<std::size_t>(1, static_cast<std::size_t>(len));
}

std::vector<double> FrameLevelsDb(const AudioBuffer& audio, std::size_t frame_len) {
  std::vector<double> levels;
  const std::span<const double> x(audio.samples);
  for (std::size_t begin = 0; begin < x.size(); begin += frame_len) {
    levels.push_back(RmsDb(x.subspan(begin, std::min(frame_len, x.size() - begin))));
  }
  return levels;
}

std::vector<Segment> DetectSegments(const AudioBuffer& audio, const PipelineConfig& cfg) {
  if (audio.samples.empty()) Fail(ErrorKind::kInvalidInput, "cannot segment empty audio");
  cfg.Validate();
  const std::size_t frame_len = FrameLength(audio, cfg);
  const auto levels = FrameLevelsDb(audio, frame_len);
  const double rate = audio.sample_rate_hz;

  std::vector<Run> runs;
  for (std::size_t f = 0; f < levels.size();) {
    if (levels[f] <= cfg.vad_energy_threshold_db) {
      ++f;
      continue;
    }
    std::size_t g = f;
    while (g < levels.size() && levels[g] > cfg.vad_energy_threshold_db) ++g;
    const bool merge = !runs.empty() && static_cast<double>((f - runs.back().end) * frame_len) *
                                                1000.0 / rate <
                                            cfg.merge_gap_ms;
    if (merge) {
      runs.back().end = g;
    } else {
      runs.push_back({f, g});
    }
    f = g;
  }

  const auto max_frames = std::max<std::size_t>(
      1, static_cast<std::size_t>(SnappedFloor(cfg.max_segment_s * rate / frame_len)));
  std::vector<Run> pieces;
  for (const auto& run : runs) SplitRun(run, max_frames, levels, &pieces);

  std::vector<Segment> segments;
  for (const auto& p : pieces) {
    const std::size_t end = std::min(p.end * frame_len, audio.samples.size());
    segments.push_back({static_cast<double>(p.begin * frame_len) / rate,
                        static_cast<double>(end) / rate, std::nullopt});
  }
  return segments;
}

std::vector<Segment> PadSegments(const std::vector<Segment>& segments, double duration_s,
                                 const PipelineConfig& cfg) {
  const double pad = cfg.segment_padding_ms / 1000.0;
  std::vector<Segment> out = segments;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const auto& s = segments[i];
    const double left_limit = i == 0 ? 0.0 : 0.5 * (segments[i - 1].end_s + s.start_s);
    const double right_limit =
        i + 1 == segments.size() ? duration_s : 0.5 * (s.end_s + segments[i + 1].start_s);
    double left = std::max(0.0, std::min(pad, s.start_s - left_limit));
    double right = std::max(0.0, std::min(pad, right_limit - s.end_s));
    const double room = std::max(0.0, cfg.max_segment_s - (s.end_s - s.start_s));
    if (left + right > room) {
      // Share the room evenly; a side that needs less gives the rest away.
      const double want_left = left;
      left = std::min(want_left, 0.5 * room);
      right = std::min(right, room - left);
      left = std::min(want_left, room - right);
    }
    out[i].start_s = s.start_s - left;
    out[i].end_s = s.end_s + right;
  }
  return out;
}

ScreenResult ScreenTruncation(const AudioBuffer& segment, const PipelineConfig& cfg) {
  ScreenResult result;
  result.trimmed.sample_rate_hz = segment.sample_rate_hz;
  const auto& x = segment.samples;
  if (x.empty()) return result;
  const std::size_t frame_len = FrameLength(segment, cfg);
  const std::size_t edge = std::min(frame_len, x.size());
  const std::span<const double> all(x);
  if (RmsDb(all.first(edge)) > cfg.vad_energy_threshold_db ||
      RmsDb(all.last(edge)) > cfg.vad_energy_threshold_db) {
    result.keep = false;
    result.trimmed = segment;
    return result;
  }
  const auto levels = FrameLevelsDb(segment, frame_len);
  std::size_t first = levels.size(), last = 0;
  for (std::size_t f = 0; f < levels.size(); ++f) {
    if (levels[f] > cfg.vad_energy_threshold_db) {
      first = std::min(first, f);
      last = f;
    }
  }
  if (first == levels.size()) return result;  // nothing above threshold
  result.trimmed = audio::Slice(segment, first * frame_len, (last + 1) * frame_len);
  return result;
}

double SymmetricWer(std::span<const std::string> a, std::span<const std::string> b) {
  const std::size_t denom = std::max(a.size(), b.size());
  if (denom == 0) return 0.0;
  return static_cast<double>(eval::EditDistance(a, b).distance) / static_cast<double>(denom);
}

TranscriptDecision SelectTranscript(std::span<const TranscriptHypothesis> hyps, double gate,
                                    std::string_view language) {
  if (hyps.size() < 2) {
    Fail(ErrorKind::kNotEnoughEvidence, "transcript selection needs at least two hypotheses");
  }
  const auto g = text::GranularityFor(language);
  std::vector<std::vector<std::string>> tokens;
  for (const auto& h : hyps) tokens.push_back(text::ScoringTokens(h.text, g, true));

  const std::size_t n = hyps.size();
  std::vector<double> pair(n * n, 0.0);
  std::vector<double> unordered;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      pair[i * n + j] = pair[j * n + i] = SymmetricWer(tokens[i], tokens[j]);
      unordered.push_back(pair[i * n + j]);
    }
  }
  // Sums run over sorted values so the decision does not depend on the order
  // of the hypotheses.
  std::sort(unordered.begin(), unordered.end());

  TranscriptDecision d;
  d.average_wer = std::accumulate(unordered.begin(), unordered.end(), 0.0) /
                  static_cast<double>(unordered.size());
  d.accepted = d.average_wer < gate;
  d.mean_wer.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> row;
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) row.push_back(pair[i * n + j]);
    }
    std::sort(row.begin(), row.end());
    d.mean_wer[i] = std::accumulate(row.begin(), row.end(), 0.0) / static_cast<double>(n - 1);
  }
  // Means that differ only by rounding count as ties.
  constexpr double kTie = 1e-12;
  for (std::size_t i = 1; i < n; ++i) {
    const double a = d.mean_wer[i], b = d.mean_wer[d.medoid];
    const bool tie = std::abs(a - b) <= kTie;
    if ((!tie && a < b) || (tie && hyps[i].system_id < hyps[d.medoid].system_id)) d.medoid = i;
  }
  return d;
}

bool IsPausePunctuation(std::string_view token) {
  const auto cps = text::SplitCodePoints(token);
  if (cps.empty()) return false;
  return std::all_of(cps.begin(), cps.end(), [](const std::string& cp) { return IsPauseMark(cp); });
}

std::vector<std::string> TokenizeText(std::string_view input, std::string_view language) {
  std::vector<std::string> tokens;
  if (text::IsCharacterLanguage(language)) {
    for (auto& cp : text::SplitCodePoints(input)) {
      if (!text::Trim(cp).empty()) tokens.push_back(std::move(cp));
    }
    return tokens;
  }
  for (const auto& word : text::SplitWhitespace(input)) {
    const auto cps = text::SplitCodePoints(word);
    auto punct = [&](std::size_t i) {
      std::size_t len;
      return text::IsPunctuation(text::DecodeAt(cps[i], 0, &len));
    };
    std::size_t lead = 0;
    while (lead < cps.size() && punct(lead)) ++lead;
    if (lead == cps.size()) {
      tokens.push_back(word);
      continue;
    }
    std::size_t tail = cps.size();
    while (tail > lead && punct(tail - 1)) --tail;
    auto join = [&](std::size_t a, std::size_t b) {
      std::string s;
      for (std::size_t i = a; i < b; ++i) s += cps[i];
      return s;
    };
    if (lead > 0) tokens.push_back(join(0, lead));
    tokens.push_back(join(lead, tail));
    if (tail < cps.size()) tokens.push_back(join(tail, cps.size()));
  }
  return tokens;
}

std::string RenderText(std::span<const std::string> tokens, std::string_view language) {
  const bool compact = text::IsCharacterLanguage(language);
  std::string out;
  bool glue_next = true;
  for (const auto& token : tokens) {
    const bool punct = text::IsPunctuationToken(token);
    const bool opening = punct && IsOpeningPunctuation(token);
    if (!compact && !glue_next && (!punct || opening)) out += ' ';
    out += token;
    glue_next = opening;
  }
  return out;
}

std::vector<std::string> AdjustPunctuation(std::span<const std::string> tokens,
                                           std::span<const WordTiming> timings,
                                           const PipelineConfig& cfg, std::string_view language) {
  std::vector<std::size_t> words;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (!text::IsPunctuationToken(tokens[i])) words.push_back(i);
  }
  if (words.size() != timings.size()) {
    Fail(ErrorKind::kInvalidInput, "text has " + std::to_string(words.size()) + " words but " +
                                       std::to_string(timings.size()) + " timings");
  }
  for (std::size_t w = 0; w < words.size(); ++w) {
    const auto& t = timings[w];
    if (text::ToLowerAscii(tokens[words[w]]) != text::ToLowerAscii(t.word)) {
      Fail(ErrorKind::kInvalidInput,
           "timing word '" + t.word + "' does not match text word '" + tokens[words[w]] + "'");
    }
    if (t.end_ms < t.start_ms || (w > 0 && t.start_ms < timings[w - 1].end_ms)) {
      Fail(ErrorKind::kInvalidInput, "word timings overlap or run backwards at '" + t.word + "'");
    }
  }
  const std::string comma = text::IsCharacterLanguage(language) ? "，" : ",";

  std::vector<std::string> out;
  const std::size_t head = words.empty() ? tokens.size() : words[0];
  out.insert(out.end(), tokens.begin(), tokens.begin() + static_cast<std::ptrdiff_t>(head));
  for (std::size_t w = 0; w < words.size(); ++w) {
    out.push_back(tokens[words[w]]);
    const std::size_t next = w + 1 < words.size() ? words[w + 1] : tokens.size();
    const auto between = tokens.subspan(words[w] + 1, next - words[w] - 1);
    if (w + 1 == words.size()) {
      out.insert(out.end(), between.begin(), between.end());
      break;
    }
    const std::int64_t gap = timings[w + 1].start_ms - timings[w].end_ms;
    const bool has_pause = std::any_of(between.begin(), between.end(),
                                       [](const std::string& t) { return HasPauseMark(t); });
    if (gap >= cfg.comma_gap_ms && !has_pause) {
      out.push_back(comma);
      out.insert(out.end(), between.begin(), between.end());
    } else if (gap <= cfg.remove_punct_gap_ms && has_pause) {
      for (const auto& t : between) {
        std::string rest = WithoutPauseMarks(t);
        if (!rest.empty()) out.push_back(std::move(rest));
      }
    } else {
      out.insert(out.end(), between.begin(), between.end());
    }
  }
  return out;
}

AudioBuffer NormalizeVolume(const AudioBuffer& audio, double peak) {
  if (!(peak > 0.0 && peak <= 1.0)) Fail(ErrorKind::kInvalidInput, "peak must be in (0, 1]");
  double max_abs = 0.0;
  for (double s : audio.samples) max_abs = std::max(max_abs, std::abs(s));
  if (!(max_abs > 0.0)) Fail(ErrorKind::kDegenerateInput, "cannot normalize silent audio");
  const double scale = peak / max_abs;
  AudioBuffer out = audio;
  for (auto& s : out.samples) s *= scale;
  return out;
}

UtteranceRecord RecordFromJson(const nlohmann::json& j) {
  if (!j.is_object()) Fail(ErrorKind::kInvalidInput, "manifest row must be a JSON object");
  UtteranceRecord r;
  try {
    r.id = j.value("id", std::string());
    r.audio_path = j.value("audio_path", std::string());
    r.sample_rate = j.value("sample_rate", 0);
    r.language = j.value("language", std::string());
    r.speaker = j.value("speaker", std::string());
    r.text = j.value("text", std::string());
    if (j.contains("raw_text") && j["raw_text"].is_string()) r.raw_text = j["raw_text"].get<std::string>();
    r.speech_token_count = j.value("speech_token_count", std::int64_t{0});
    r.text_token_count = j.value("text_token_count", std::int64_t{0});
    r.length_ratio = j.value("length_ratio", 0.0);
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorKind::kInvalidInput, std::string("manifest row: ") + e.what());
  }
  r.fields = j;
  return r;
}

nlohmann::json RecordToJson(const UtteranceRecord& r) {
  nlohmann::json j = r.fields.is_object() ? r.fields : nlohmann::json::object();
  j["id"] = r.id;
  j["audio_path"] = r.audio_path;
  j["sample_rate"] = r.sample_rate;
  j["language"] = r.language;
  j["speaker"] = r.speaker;
  j["text"] = r.text;
  if (r.raw_text) j["raw_text"] = *r.raw_text;
  j["speech_token_count"] = r.speech_token_count;
  j["text_token_count"] = r.text_token_count;
  j["length_ratio"] = r.length_ratio;
  return j;
}

RatioSplit SplitByRatio(std::span<const double> ratios, double low_frac, double high_frac) {
  if (!(low_frac >= 0.0) || !(high_frac >= 0.0) || !(low_frac + high_frac < 1.0)) {
    Fail(ErrorKind::kInvalidInput, "trim fractions must be non-negative and sum below 1");
  }
  for (double r : ratios) {
    if (!std::isfinite(r)) Fail(ErrorKind::kInvalidInput, "length ratio must be finite");
  }
  const std::size_t n = ratios.size();
  const auto n_low = static_cast<std::size_t>(SnappedFloor(low_frac * static_cast<double>(n)));
  const auto n_high = std::min(
      n - n_low, static_cast<std::size_t>(SnappedFloor(high_frac * static_cast<double>(n))));

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return ratios[a] < ratios[b]; });

  RatioSplit split;
  std::vector<int> tag(n, 0);  // -1 low, 1 high
  for (std::size_t i = 0; i < n_low; ++i) tag[order[i]] = -1;
  for (std::size_t i = n - n_high; i < n; ++i) tag[order[i]] = 1;
  for (std::size_t i = 0; i < n; ++i) {
    if (tag[i] < 0) {
      split.dropped_low.push_back(i);
    } else if (tag[i] > 0) {
      split.dropped_high.push_back(i);
    } else {
      split.kept.push_back(i);
    }
  }
  return split;
}

FilterResult FilterLengthRatio(std::span<const UtteranceRecord> records, double low_frac,
                               double high_frac) {
  std::vector<double> ratios;
  for (const auto& r : records) {
    if (r.speech_token_count <= 0 || r.text_token_count <= 0) {
      Fail(ErrorKind::kInvalidInput, "record " + r.id + " needs positive token counts");
    }
    ratios.push_back(r.length_ratio);
  }
  const auto split = SplitByRatio(ratios, low_frac, high_frac);
  FilterResult result;
  std::vector<bool> drop(records.size(), false);
  for (auto i : split.dropped_low) drop[i] = true;
  for (auto i : split.dropped_high) drop[i] = true;
  for (std::size_t i = 0; i < records.size(); ++i) {
    (drop[i] ? result.dropped : result.kept).push_back(records[i]);
  }
  return result;
}

double LengthRatio(std::int64_t speech_tokens, std::int64_t text_tokens) {
  if (text_tokens <= 0) Fail(ErrorKind::kInvalidInput, "text token count must be positive");
  return static_cast<double>(speech_tokens) / static_cast<double>(text_tokens);
}

std::int64_t TextTokenCount(std::string_view input, std::string_view language) {
  std::int64_t n = 0;
  for (const auto& t : TokenizeText(input, language)) n += text::IsPunctuationToken(t) ? 0 : 1;
  return n;
}

}  // namespace tokenforge::pipeline
