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

#ifndef TOKENFORGE_NUMERIC_H_
#define TOKENFORGE_NUMERIC_H_

#include <algorithm>
#include <cmath>

namespace tokenforge {

// Products like 1.16 * 25 or 0.29 * 100 land a few ulps below the intended
// integer; values within this relative distance of the next integer snap up.
inline constexpr double kIntegerSnap = 1e-9;

inline double SnappedFloor(double x) {
  const double up = std::ceil(x);
  if (up - x <= kIntegerSnap * std::max(1.0, std::abs(x))) return up;
  return std::floor(x);
}

}  // namespace tokenforge

#endif  // TOKENFORGE_NUMERIC_H_
