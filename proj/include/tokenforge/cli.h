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

#ifndef TOKENFORGE_CLI_H_
#define TOKENFORGE_CLI_H_

#include <iosfwd>

#include "tokenforge/error.h"

namespace tokenforge::cli {

// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitIo = 3;
inline constexpr int kExitMissingAdapter = 4;
inline constexpr int kExitDivergence = 5;

// Input-data errors (malformed files, out-of-range values) share the I/O
// code; only configuration problems map to kExitConfig.
int ExitCodeFor(ErrorKind kind);

// Entry point of the tokenforge binary, writing to the given streams.
int Run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace tokenforge::cli

#endif  // TOKENFORGE_CLI_H_
