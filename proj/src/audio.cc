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

#include "tokenforge/audio.h"

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>

#include "tokenforge/error.h"

namespace tokenforge::audio {
namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint16_t U16(const unsigned char* p) { return static_cast<std::uint16_t>(p[0] | (p[1] << 8)); }

std::uint32_t U32(const unsigned char* p) {
  return p[0] | (p[1] << 8) | (p[2] << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void PutU16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>(v >> 8));
}

void PutU32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

}  // namespace

void AudioBuffer::Validate() const {
  if (sample_rate_hz <= 0) Fail(ErrorKind::kInvalidInput, "sample rate must be positive");
  for (double s : samples) {
    if (!(s >= -1.0 && s <= 1.0)) Fail(ErrorKind::kInvalidInput, "sample outside [-1, 1]");
  }
}

AudioBuffer ReadWav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(ErrorKind::kIo, "cannot open " + path);
  const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                         std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    Fail(ErrorKind::kInvalidInput, path + " is not a RIFF/WAVE file");
  }

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const unsigned char* data = nullptr;
  std::size_t data_size = 0;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const std::size_t size = U32(chunk + 4);
    const std::size_t body = pos + 8;
    const std::size_t avail = std::min(size, bytes.size() - body);
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (avail < 16) Fail(ErrorKind::kInvalidInput, path + ": short fmt chunk");
      format = U16(chunk + 8);
      channels = U16(chunk + 10);
      rate = U32(chunk + 12);
      bits = U16(chunk + 22);
      if (format == kFormatExtensible) {
        if (avail < 26) Fail(ErrorKind::kInvalidInput, path + ": short extensible fmt chunk");
        format = U16(chunk + 32);  // first two bytes of the subformat GUID
      }
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = chunk + 8;
      data_size = avail;
    }
    pos = body + size + (size & 1);
  }
  if (format == 0 || data == nullptr) Fail(ErrorKind::kInvalidInput, path + ": missing fmt or data");
  if (channels != 1) Fail(ErrorKind::kInvalidInput, path + ": only mono audio is supported");
  if (rate == 0 || rate > 1000000) Fail(ErrorKind::kInvalidInput, path + ": bad sample rate");

  AudioBuffer audio;
  audio.sample_rate_hz = static_cast<int>(rate);
  if (format == kFormatPcm && bits == 16) {
    audio.samples.resize(data_size / 2);
    for (std::size_t i = 0; i < audio.samples.size(); ++i) {
      audio.samples[i] = static_cast<std::int16_t>(U16(data + 2 * i)) / 32768.0;
    }
  } else if (format == kFormatFloat && bits == 32) {
    audio.samples.resize(data_size / 4);
    for (std::size_t i = 0; i < audio.samples.size(); ++i) {
      const std::uint32_t u = U32(data + 4 * i);
      float f;
      std::memcpy(&f, &u, 4);
      audio.samples[i] = f;
    }
    audio.Validate();
  } else {
    Fail(ErrorKind::kInvalidInput,
         path + ": unsupported sample format (need 16-bit PCM or 32-bit float)");
  }
  return audio;
}

void WriteWav(const std::string& path, const AudioBuffer& audio) {
  audio.Validate();
  const std::uint32_t data_size = static_cast<std::uint32_t>(audio.samples.size() * 4);
  std::string out;
  out.reserve(44 + data_size);
  out += "RIFF";
  PutU32(out, 36 + data_size);
  out += "WAVEfmt ";
  PutU32(out, 16);
  PutU16(out, kFormatFloat);
  PutU16(out, 1);
  PutU32(out, static_cast<std::uint32_t>(audio.sample_rate_hz));
  PutU32(out, static_cast<std::uint32_t>(audio.sample_rate_hz) * 4);
  PutU16(out, 4);
  PutU16(out, 32);
  out += "data";
  PutU32(out, data_size);
  for (double s : audio.samples) {
    const float f = static_cast<float>(s);
    std::uint32_t u;
    std::memcpy(&u, &f, 4);
    PutU32(out, u);
  }
  std::ofstream file(path, std::ios::binary);
  if (!file) Fail(ErrorKind::kIo, "cannot write " + path);
  file.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!file) Fail(ErrorKind::kIo, "short write to " + path);
}

AudioBuffer Slice(const AudioBuffer& audio, std::size_t begin, std::size_t end) {
  end = std::min(end, audio.samples.size());
  begin = std::min(begin, end);
  AudioBuffer out;
  out.sample_rate_hz = audio.sample_rate_hz;
  out.samples.assign(audio.samples.begin() + static_cast<std::ptrdiff_t>(begin),
                     audio.samples.begin() + static_cast<std::ptrdiff_t>(end));
  return out;
}

}  // namespace tokenforge::audio
