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
#ifndef SLOTBRIDGE_HALF_H_
#define SLOTBRIDGE_HALF_H_

#include <cstdint>

namespace slotbridge {

// IEEE 754 binary16 conversion with round-to-nearest-even, done in software
// so stored bits are identical on every platform.
uint16_t DoubleToHalf(double x);
double HalfToDouble(uint16_t h);

}  // namespace slotbridge

#endif  // SLOTBRIDGE_HALF_H_
