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

#ifndef TOKENFORGE_PIPELINE_H_
#define TOKENFORGE_PIPELINE_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "tokenforge/audio.h"

// Corpus-production stages: energy VAD segmentation, truncation screening,
// cross-validated transcript selection, timing-based punctuation repair,
// peak normalization and length-ratio filtering.
namespace tokenforge::pipeline {

using audio::AudioBuffer;

struct PipelineConfig {
  double vad_energy_threshold_db = -40.0;
  int frame_ms = 25;
  int merge_gap_ms = 200;
  double max_segment_s = 30.0;
  // Silence kept around each detected segment before the truncation screen.
  int segment_padding_ms = 200;
  int comma_gap_ms = 300;
  int remove_punct_gap_ms = 50;
  double pairwise_wer_gate = 0.15;
  double peak_target = 0.6;
  double low_trim_frac = 0.01;
  double high_trim_frac = 0.05;

  // Throws kConfig.
  void Validate() const;
};

PipelineConfig PipelineConfigFromJson(const nlohmann::json& j);
nlohmann::json PipelineConfigToJson(const PipelineConfig& cfg);

struct Segment {
  double start_s = 0.0;
  double end_s = 0.0;
  std::optional<std::string> speaker_id;
};

// Frame length in samples for cfg.frame_ms at the audio's rate (at least 1).
std::size_t FrameLength(const AudioBuffer& audio, const PipelineConfig& cfg);

// RMS level in dBFS of consecutive frames; a trailing partial frame is
// measured over its own samples. Digital silence is -infinity.
std::vector<double> FrameLevelsDb(const AudioBuffer& audio, std::size_t frame_len);

// Frames louder than the threshold form runs; runs separated by less than
// merge_gap_ms merge; runs longer than max_segment_s split at their quietest
// frame (latest on ties). Throws kInvalidInput on empty audio.
std::vector<Segment> DetectSegments(const AudioBuffer& audio, const PipelineConfig& cfg);

// Widens segments by segment_padding_ms on each side without crossing the
// audio bounds, the midpoint to a neighbour, or max_segment_s.
std::vector<Segment> PadSegments(const std::vector<Segment>& segments, double duration_s,
                                 const PipelineConfig& cfg);

struct ScreenResult {
  bool keep = true;
  AudioBuffer trimmed;
};

// keep=false when the first or last frame is above the threshold. Otherwise
// quiet leading and trailing frames are cut; all-quiet audio trims to empty.
ScreenResult ScreenTruncation(const AudioBuffer& segment, const PipelineConfig& cfg);

struct TranscriptHypothesis {
  std::string system_id;
  std::string text;
};

// d(a, b) / max(|a|, |b|); 0 when both are empty.
double SymmetricWer(std::span<const std::string> a, std::span<const std::string> b);

struct TranscriptDecision {
  bool accepted = false;
  double average_wer = 0.0;
  std::size_t medoid = 0;             // index into the input list
  std::vector<double> mean_wer;       // per hypothesis, against the others
};

// Averages SymmetricWer over unordered pairs of hypotheses, tokenized per
// word or per character by language, and accepts when the average is below
// the gate. The medoid has the lowest mean WER, ties going to the lowest
// system_id. Throws kNotEnoughEvidence for fewer than two hypotheses.
TranscriptDecision SelectTranscript(std::span<const TranscriptHypothesis> hyps, double gate,
                                    std::string_view language);

struct WordTiming {
  std::string word;
  std::int64_t start_ms = 0;
  std::int64_t end_ms = 0;
};

// Comma, semicolon, colon, full stop, question and exclamation marks, in
// ASCII and full-width forms.
bool IsPausePunctuation(std::string_view token);

// Splits text into words and separate punctuation tokens. Character languages
// yield one token per code point.
std::vector<std::string> TokenizeText(std::string_view text, std::string_view language);

// Inverse of TokenizeText up to whitespace: punctuation attaches to the
// preceding word (opening brackets and quotes to the following one).
std::string RenderText(std::span<const std::string> tokens, std::string_view language);

// Inserts a comma where the gap between consecutive words is at least
// comma_gap_ms and no pause mark sits between them; removes pause marks where
// the gap is at most remove_punct_gap_ms (other marks in the same token, such
// as a closing quote, stay). Every non-punctuation token needs a
// timing, matched in order and case-insensitively; a mismatch throws
// kInvalidInput.
std::vector<std::string> AdjustPunctuation(std::span<const std::string> tokens,
                                           std::span<const WordTiming> timings,
                                           const PipelineConfig& cfg,
                                           std::string_view language = "en");

// Scales samples by peak / max|x|. Throws kDegenerateInput on all-zero audio.
AudioBuffer NormalizeVolume(const AudioBuffer& audio, double peak = 0.6);

struct UtteranceRecord {
  std::string id;
  std::string audio_path;
  int sample_rate = 0;
  std::string language;
  std::string speaker;
  std::string text;
  std::optional<std::string> raw_text;
  std::int64_t speech_token_count = 0;
  std::int64_t text_token_count = 0;
  double length_ratio = 0.0;
  // Every field of the manifest row, including ones not modelled above.
  nlohmann::json fields = nlohmann::json::object();
};

UtteranceRecord RecordFromJson(const nlohmann::json& j);
// Typed fields overwrite their entries in record.fields.
nlohmann::json RecordToJson(const UtteranceRecord& record);

struct RatioSplit {
  std::vector<std::size_t> kept;          // ascending input indices
  std::vector<std::size_t> dropped_low;   // ascending input indices
  std::vector<std::size_t> dropped_high;  // ascending input indices
};

// Stable ascending sort by ratio, then drops the floor(low_frac * n) smallest
// and floor(high_frac * n) largest. Throws kInvalidInput when
// low_frac + high_frac >= 1 or a fraction is negative.
RatioSplit SplitByRatio(std::span<const double> ratios, double low_frac, double high_frac);

struct FilterResult {
  std::vector<UtteranceRecord> kept;
  std::vector<UtteranceRecord> dropped;
};

// SplitByRatio over length_ratio. Records need positive token counts
// (kInvalidInput otherwise). Both outputs keep manifest order.
FilterResult FilterLengthRatio(std::span<const UtteranceRecord> records, double low_frac,
                               double high_frac);

// speech tokens / text tokens.
double LengthRatio(std::int64_t speech_tokens, std::int64_t text_tokens);

// Non-punctuation tokens of TokenizeText.
std::int64_t TextTokenCount(std::string_view text, std::string_view language);

}  // namespace tokenforge::pipeline

#endif  // TOKENFORGE_PIPELINE_H_
