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

#include "tokenforge/fsq_codec.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "tokenforge/error.h"
#include "tokenforge/numeric.h"

namespace tokenforge::fsq {
namespace {

bool NearInteger(double x, double* rounded) {
  *rounded = std::round(x);
  return std::abs(x - *rounded) <= kIntegerSnap * std::max(1.0, std::abs(x));
}

}  // namespace

std::uint64_t CodebookSize(std::size_t low_rank_dim, int bound) {
  if (low_rank_dim < 1 || bound < 1) {
    Fail(ErrorKind::kConfig, "FSQ needs D >= 1 and K >= 1");
  }
  const std::uint64_t base = 2 * static_cast<std::uint64_t>(bound) + 1;
  std::uint64_t size = 1;
  for (std::size_t j = 0; j < low_rank_dim; ++j) {
    if (size > std::numeric_limits<std::uint64_t>::max() / base) {
      Fail(ErrorKind::kConfig, "codebook (2K+1)^D=" + std::to_string(base) + "^" +
                                   std::to_string(low_rank_dim) +
                                   " does not fit in 64 bits");
    }
    size *= base;
  }
  return size;
}

std::uint64_t FsqConfig::codebook_size() const {
  return CodebookSize(low_rank_dim, bound);
}

void FsqConfig::Validate() const {
  if (input_dim < 1) Fail(ErrorKind::kConfig, "input_dim must be positive");
  CodebookSize(low_rank_dim, bound);
  if (proj_down.rows() != low_rank_dim || proj_down.cols() != input_dim) {
    Fail(ErrorKind::kConfig, "proj_down must be low_rank_dim x input_dim");
  }
  if (proj_up.rows() != input_dim || proj_up.cols() != low_rank_dim) {
    Fail(ErrorKind::kConfig, "proj_up must be input_dim x low_rank_dim");
  }
  if (!proj_down.AllFinite() || !proj_up.AllFinite()) {
    Fail(ErrorKind::kConfig, "projection matrices must be finite");
  }
}

FsqConfig MakeIdentityConfig(std::size_t input_dim, std::size_t low_rank_dim,
                             int bound) {
  FsqConfig cfg{input_dim, low_rank_dim, bound, Matrix(low_rank_dim, input_dim),
                Matrix(input_dim, low_rank_dim)};
  for (std::size_t i = 0; i < std::min(input_dim, low_rank_dim); ++i) {
    cfg.proj_down(i, i) = 1.0;
    cfg.proj_up(i, i) = 1.0;
  }
  cfg.Validate();
  return cfg;
}

QuantizedVector BoundedRound(std::span<const double> x, int bound) {
  if (bound < 1) Fail(ErrorKind::kInvalidInput, "bound K must be >= 1");
  QuantizedVector q;
  q.values.reserve(x.size());
  for (double v : x) {
    if (!std::isfinite(v)) {
      Fail(ErrorKind::kInvalidInput, "non-finite value passed to bounded round");
    }
    // std::round rounds halfway cases away from zero.
    const double r = std::clamp(std::round(v), -static_cast<double>(bound),
                                static_cast<double>(bound));
    q.values.push_back(static_cast<std::int32_t>(r));
  }
  return q;
}

std::vector<double> ProjectDown(std::span<const double> h, const FsqConfig& cfg) {
  return MatVec(cfg.proj_down, h);
}

std::vector<double> ProjectUp(std::span<const double> q, const FsqConfig& cfg) {
  return MatVec(cfg.proj_up, q);
}

QuantizedVector Quantize(std::span<const double> h, const FsqConfig& cfg) {
  return BoundedRound(ProjectDown(h, cfg), cfg.bound);
}

std::vector<double> Reconstruct(const QuantizedVector& q, const FsqConfig& cfg) {
  const std::vector<double> as_real(q.values.begin(), q.values.end());
  return ProjectUp(as_real, cfg);
}

TokenId EncodeIndex(const QuantizedVector& q, int bound) {
  CodebookSize(q.values.size(), bound);  // rejects K < 1, D = 0 and overflow
  const std::uint64_t base = 2 * static_cast<std::uint64_t>(bound) + 1;
  std::uint64_t code = 0;
  std::uint64_t place = 1;
  for (std::size_t j = 0; j < q.values.size(); ++j) {
    const std::int32_t v = q.values[j];
    if (v < -bound || v > bound) {
      Fail(ErrorKind::kOutOfRange, "component " + std::to_string(v) +
                                       " outside [-K, K] with K=" +
                                       std::to_string(bound));
    }
    code += static_cast<std::uint64_t>(v + bound) * place;
    if (j + 1 < q.values.size()) place *= base;
  }
  return TokenId{code};
}

QuantizedVector DecodeIndex(TokenId token, std::size_t low_rank_dim, int bound) {
  const std::uint64_t size = CodebookSize(low_rank_dim, bound);
  if (token.code >= size) {
    Fail(ErrorKind::kOutOfRange, "token " + std::to_string(token.code) +
                                     " outside codebook of size " +
                                     std::to_string(size));
  }
  const std::uint64_t base = 2 * static_cast<std::uint64_t>(bound) + 1;
  QuantizedVector q;
  q.values.resize(low_rank_dim);
  std::uint64_t rest = token.code;
  for (std::size_t j = 0; j < low_rank_dim; ++j) {
    q.values[j] = static_cast<std::int32_t>(rest % base) - bound;
    rest /= base;
  }
  return q;
}

Matrix SteJacobian(std::span<const double> h, const FsqConfig& cfg) {
  if (h.size() != cfg.input_dim) {
    Fail(ErrorKind::kDimensionMismatch, "input of length " + std::to_string(h.size()) +
                                            " for input_dim " +
                                            std::to_string(cfg.input_dim));
  }
  return MatMul(cfg.proj_up, cfg.proj_down);
}

Matrix ResampleTokenFeatures(const Matrix& seq, double source_rate_hz,
                             double target_rate_hz) {
  if (seq.rows() == 0) Fail(ErrorKind::kInvalidInput, "empty feature sequence");
  if (!(source_rate_hz > 0.0) || !(target_rate_hz > 0.0)) {
    Fail(ErrorKind::kInvalidInput, "frame rates must be positive");
  }
  const std::size_t frames = seq.rows();
  const std::size_t width = seq.cols();
  const double ratio = target_rate_hz / source_rate_hz;

  double repeat = 0.0;
  if (NearInteger(ratio, &repeat) && repeat >= 1.0) {
    const auto times = static_cast<std::size_t>(repeat);
    Matrix out(frames * times, width);
    for (std::size_t t = 0; t < frames; ++t) {
      for (std::size_t r = 0; r < times; ++r) {
        std::copy(seq.row(t).begin(), seq.row(t).end(), out.row(t * times + r).begin());
      }
    }
    return out;
  }

  const auto out_frames = static_cast<std::size_t>(
      std::max(1.0, std::round(static_cast<double>(frames) * ratio)));
  Matrix out(out_frames, width);
  for (std::size_t i = 0; i < out_frames; ++i) {
    // Output frame i sits at time i / target, i.e. source frame i / ratio.
    const double pos = std::min(static_cast<double>(i) / ratio,
                                static_cast<double>(frames - 1));
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, frames - 1);
    const double w = pos - static_cast<double>(lo);
    for (std::size_t c = 0; c < width; ++c) {
      out(i, c) = (1.0 - w) * seq(lo, c) + w * seq(hi, c);
    }
  }
  return out;
}

std::int64_t TokenCountForDuration(double seconds) {
  if (!(seconds >= 0.0) || !std::isfinite(seconds)) {
    Fail(ErrorKind::kInvalidInput, "duration must be a finite non-negative number");
  }
  return static_cast<std::int64_t>(SnappedFloor(seconds * kTokenRateHz));
}

}  // namespace tokenforge::fsq
