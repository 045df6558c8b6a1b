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

#ifndef TOKENFORGE_AUDIO_H_
#define TOKENFORGE_AUDIO_H_

#include <string>
#include <vector>

namespace tokenforge::audio {

struct AudioBuffer {
  std::vector<double> samples;  // mono, each in [-1, 1]
  int sample_rate_hz = 16000;

  double duration_s() const {
    return static_cast<double>(samples.size()) / static_cast<double>(sample_rate_hz);
  }
  // Throws kInvalidInput on a non-positive rate or an out-of-range sample.
  void Validate() const;
};

// Mono RIFF/WAVE, 16-bit PCM or 32-bit IEEE float (plain or extensible
// header). Throws kIo on unreadable files, kInvalidInput on other formats.
AudioBuffer ReadWav(const std::string& path);

// Always writes 32-bit float.
void WriteWav(const std::string& path, const AudioBuffer& audio);

// Samples [begin, end) clamped to the buffer.
AudioBuffer Slice(const AudioBuffer& audio, std::size_t begin, std::size_t end);

}  // namespace tokenforge::audio

#endif  // TOKENFORGE_AUDIO_H_
