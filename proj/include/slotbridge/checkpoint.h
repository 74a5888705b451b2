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
// Self-describing tensor container used for every checkpoint in the
// pipeline. Layout (all integers little-endian):
//
//   bytes 0-7    magic "SLOTBCK1"
//   bytes 8-11   uint32 format version (currently 1)
//   bytes 12-19  uint64 header length H
//   next H bytes UTF-8 JSON header:
//                  {"kind": ..., "meta": {...},
//                   "tensors": [{"name", "rows", "cols", "offset"}, ...]}
//   payload      float64 little-endian row-major tensor data; "offset" is
//                the byte offset from the start of the payload.

#ifndef SLOTBRIDGE_CHECKPOINT_H_
#define SLOTBRIDGE_CHECKPOINT_H_

#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "slotbridge/autograd.h"

namespace slotbridge {

inline constexpr uint32_t kCheckpointVersion = 1;

struct TensorBundle {
  std::string kind;
  nlohmann::json meta = nlohmann::json::object();
  std::vector<std::pair<std::string, Matrix>> tensors;

  void Add(std::string name, Matrix value);
  const Matrix& Get(std::string_view name) const;
  bool Has(std::string_view name) const;
};

void WriteBundle(const std::filesystem::path& path, const TensorBundle& bundle);
// Throws MissingArtifactError if the file does not exist and
// std::runtime_error on a malformed or mismatched file. expected_kind may be
// empty to accept any kind.
TensorBundle ReadBundle(const std::filesystem::path& path,
                        std::string_view expected_kind = {});

// Lowercase hex SHA-256.
std::string Sha256Hex(std::string_view bytes);
std::string Sha256File(const std::filesystem::path& path);

// Digest of a set of named tensors: covers names, shapes and exact bits.
class TensorHasher {
 public:
  TensorHasher();
  ~TensorHasher();
  TensorHasher(const TensorHasher&) = delete;
  TensorHasher& operator=(const TensorHasher&) = delete;

  void Add(std::string_view name, const Matrix& m);
  std::string Finish();

 private:
  void* ctx_;
};

// Writes text to path, creating parent directories.
void WriteTextFile(const std::filesystem::path& path, std::string_view text);
std::string ReadTextFile(const std::filesystem::path& path);

}  // namespace slotbridge

#endif  // SLOTBRIDGE_CHECKPOINT_H_
