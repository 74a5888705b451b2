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
#ifndef SLOTBRIDGE_UNICODE_H_
#define SLOTBRIDGE_UNICODE_H_

#include <string>
#include <string_view>
#include <vector>

namespace slotbridge::unicode {

// Strict UTF-8 decoding; throws std::invalid_argument on malformed input.
std::vector<char32_t> DecodeUtf8(std::string_view text);
std::string EncodeUtf8(std::u32string_view code_points);
std::string EncodeUtf8(char32_t code_point);
bool IsValidUtf8(std::string_view text);

// Canonical decomposition (NFD).
std::string ToNfd(std::string_view text);
// Length in NFD code points. This is the "character" count used by corpus
// filters and tokens-per-character statistics.
size_t CharLength(std::string_view text);

bool IsLetter(char32_t c);
bool IsNumber(char32_t c);
bool IsWhiteSpace(char32_t c);

}  // namespace slotbridge::unicode

#endif  // SLOTBRIDGE_UNICODE_H_
