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
#include "slotbridge/half.h"

#include <cmath>

namespace slotbridge {

uint16_t DoubleToHalf(double x) {
  if (std::isnan(x)) return 0x7e00;
  const uint16_t sign = std::signbit(x) ? 0x8000 : 0;
  const double ax = std::fabs(x);
  // 65520 is the midpoint between the largest finite half and 2^16; ties go
  // to the even encoding, which is infinity.
  if (ax >= 65520.0) return sign | 0x7c00;
  if (ax < 0x1.0p-14) {
    // Subnormal (or rounds up to the smallest normal, whose encoding 0x0400
    // follows the subnormals contiguously).
    const double m = std::nearbyint(ax * 0x1.0p24);
    return sign | static_cast<uint16_t>(m);
  }
  int e2 = 0;
  const double f = std::frexp(ax, &e2);  // ax = f * 2^e2, f in [0.5, 1)
  int exponent = e2 - 1;
  const double significand = f * 2.0;  // [1, 2)
  double m = std::nearbyint((significand - 1.0) * 1024.0);
  if (m >= 1024.0) {
    m = 0.0;
    ++exponent;
  }
  if (exponent > 15) return sign | 0x7c00;
  return sign | static_cast<uint16_t>((exponent + 15) << 10) |
         static_cast<uint16_t>(m);
}

double HalfToDouble(uint16_t h) {
  const bool negative = (h & 0x8000) != 0;
  const int exponent = (h >> 10) & 0x1f;
  const int mantissa = h & 0x3ff;
  double v;
  if (exponent == 0) {
    v = std::ldexp(static_cast<double>(mantissa), -24);
  } else if (exponent == 31) {
    v = mantissa == 0 ? INFINITY : NAN;
  } else {
    v = std::ldexp(1.0 + mantissa / 1024.0, exponent - 15);
  }
  return negative ? -v : v;
}

}  // namespace slotbridge
