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

#ifndef TOKENFORGE_PIPELINE_RUN_H_
#define TOKENFORGE_PIPELINE_RUN_H_

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "tokenforge/pipeline.h"
#include "tokenforge/random.h"

// Manifest-level driver. Runs every stage over a JSONL manifest, delegating
// denoising, ASR and alignment to external commands or precomputed fields.
namespace tokenforge::pipeline {

// Shell commands. Each is invoked as `<command> <request.json>` with
// TOKENFORGE_SEED set, and must print one JSON object on stdout:
//   denoise: {"audio_path": "..."}      request: stage, audio_path, language, seed
//   asr:     {"hypotheses": [{"system_id": "...", "text": "..."}, ...]}
//   align:   {"word_timings": [{"word": "...", "start_ms": 0, "end_ms": 0}, ...]}
//            request additionally carries "text"
// A nonzero exit status or unparsable output fails that utterance. An empty
// command means the adapter is absent; denoising is then skipped.
struct AdapterCommands {
  std::string denoise;
  std::string asr;
  std::string align;
};

struct RunOptions {
  PipelineConfig config;
  AdapterCommands adapters;
  std::string base_dir;    // resolves relative paths in the input manifest
  std::string output_dir;  // receives <audio_subdir>/ and a scratch directory
  std::string audio_subdir = "audio";
  std::uint64_t seed = kDefaultSeed;
  int jobs = 1;
};

struct RunResult {
  std::vector<nlohmann::json> records;  // input order, segments in time order
  nlohmann::json stats;
};

// Rows marked "processed" (the driver's own output) skip segmentation,
// screening and denoising; rows marked "ratio_filtered" are not ranked again.
// This makes a rerun over an output manifest drop nothing.
//
// Throws kMissingAdapter when some row lacks precomputed hypotheses or
// timings and the matching adapter is absent, and kInvalidInput on duplicate
// ids. Per-utterance failures are reported in stats, not thrown.
RunResult RunPipeline(const std::vector<nlohmann::json>& rows, const RunOptions& options);

std::vector<nlohmann::json> ReadManifest(const std::string& path);
void WriteManifest(const std::string& path, const std::vector<nlohmann::json>& rows);

// Three tab-separated columns: word, start_ms, end_ms. A non-numeric first
// row is taken as a header.
std::vector<WordTiming> ReadAlignmentTsv(const std::string& path);

std::vector<WordTiming> WordTimingsFromJson(const nlohmann::json& j);
nlohmann::json WordTimingsToJson(const std::vector<WordTiming>& timings);
std::vector<TranscriptHypothesis> HypothesesFromJson(const nlohmann::json& j);

// Runs one adapter command and parses its stdout. Throws kIo on failure.
nlohmann::json RunAdapter(const std::string& command, const nlohmann::json& request,
                          const std::string& request_path, std::uint64_t seed);

}  // namespace tokenforge::pipeline

#endif  // TOKENFORGE_PIPELINE_RUN_H_
