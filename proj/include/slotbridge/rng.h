// Copyright 2026 The Slotbridge Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#ifndef SLOTBRIDGE_RNG_H_
#define SLOTBRIDGE_RNG_H_

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace slotbridge {

// Derives an independent stream seed for a named consumer, optionally
// indexed (e.g. by step). Every random draw in the pipeline is rooted in one
// seed split through this function.
uint64_t SplitSeed(uint64_t root, std::string_view label, uint64_t index = 0);

// Portable random source: all draws are computed from raw 64-bit engine
// output so results do not depend on the standard library's distribution
// implementations. Holds no cached state beyond the engine.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  uint64_t NextU64() { return engine_(); }
  // Uniform in [0, 1) with 53 random bits.
  double Uniform();
  // Standard normal via Box-Muller; consumes two uniforms per call.
  double Normal();
  // Uniform integer in [0, n).
  uint64_t Index(uint64_t n);
  std::vector<int> Permutation(int n);

  std::string SerializeState() const;
  void RestoreState(const std::string& state);

 private:
  std::mt19937_64 engine_;
};

}  // namespace slotbridge

#endif  // SLOTBRIDGE_RNG_H_
