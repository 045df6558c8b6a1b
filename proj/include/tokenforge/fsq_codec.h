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

#ifndef TOKENFORGE_FSQ_CODEC_H_
#define TOKENFORGE_FSQ_CODEC_H_

#include <cstdint>
#include <span>
#include <vector>

#include "tokenforge/matrix.h"

// Finite scalar quantization: a low-rank projection whose components are
// rounded into [-K, K], packed into a single (2K+1)-ary token index.
namespace tokenforge::fsq {

// Speech tokens per second of audio.
inline constexpr double kTokenRateHz = 25.0;

struct FsqConfig {
  std::size_t input_dim = 0;
  std::size_t low_rank_dim = 0;  // D
  int bound = 0;                 // K
  Matrix proj_down;              // D x input_dim
  Matrix proj_up;                // input_dim x D

  // (2K+1)^D.
  std::uint64_t codebook_size() const;

  // Throws kConfig if any invariant is broken: D >= 1, K >= 1, matrix shapes,
  // finite entries, and (2K+1)^D representable in 64 bits.
  void Validate() const;
};

// Builds a config with identity-like projections (ones on the diagonal).
FsqConfig MakeIdentityConfig(std::size_t input_dim, std::size_t low_rank_dim,
                             int bound);

// Checked (2K+1)^D; throws kConfig when it does not fit in uint64.
std::uint64_t CodebookSize(std::size_t low_rank_dim, int bound);

struct QuantizedVector {
  std::vector<std::int32_t> values;

  friend bool operator==(const QuantizedVector&, const QuantizedVector&) = default;
};

struct TokenId {
  std::uint64_t code = 0;

  friend auto operator<=>(const TokenId&, const TokenId&) = default;
};

// Rounds half away from zero, then clamps into [-K, K].
// Throws kInvalidInput on non-finite components or K < 1.
QuantizedVector BoundedRound(std::span<const double> x, int bound);

std::vector<double> ProjectDown(std::span<const double> h, const FsqConfig& cfg);
std::vector<double> ProjectUp(std::span<const double> q, const FsqConfig& cfg);

QuantizedVector Quantize(std::span<const double> h, const FsqConfig& cfg);

// Dequantized reconstruction: proj_up applied to the rounded vector.
std::vector<double> Reconstruct(const QuantizedVector& q, const FsqConfig& cfg);

// code = sum_j (q_j + K) * (2K+1)^j. Throws kOutOfRange if a component lies
// outside [-K, K] or the code would overflow.
TokenId EncodeIndex(const QuantizedVector& q, int bound);

// Inverse of EncodeIndex. Throws kOutOfRange when code >= (2K+1)^D.
QuantizedVector DecodeIndex(TokenId token, std::size_t low_rank_dim, int bound);

// Straight-through Jacobian of h -> proj_up(round(proj_down(h))): rounding is
// the identity on the backward pass, leaving proj_up * proj_down.
Matrix SteJacobian(std::span<const double> h, const FsqConfig& cfg);

// Resamples a T x F feature sequence from one frame rate to another.
// T' = round(T * target / source). Integer upsampling ratios repeat each row;
// every other ratio interpolates linearly along time.
Matrix ResampleTokenFeatures(const Matrix& seq, double source_rate_hz,
                             double target_rate_hz);

// floor(25 * seconds); partial trailing frames are dropped.
std::int64_t TokenCountForDuration(double seconds);

}  // namespace tokenforge::fsq

#endif  // TOKENFORGE_FSQ_CODEC_H_
