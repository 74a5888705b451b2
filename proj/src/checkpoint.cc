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
#include "slotbridge/checkpoint.h"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>
#include <openssl/evp.h>

#include "slotbridge/errors.h"

namespace slotbridge {
namespace {

constexpr char kMagic[8] = {'S', 'L', 'O', 'T', 'B', 'C', 'K', '1'};

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

template <typename T>
void WritePod(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T ReadPod(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw std::runtime_error("truncated checkpoint");
  return v;
}

std::string Hex(const unsigned char* d, unsigned n) {
  std::string out;
  for (unsigned i = 0; i < n; ++i) out += fmt::format("{:02x}", d[i]);
  return out;
}

}  // namespace

void TensorBundle::Add(std::string name, Matrix value) {
  if (Has(name)) throw std::invalid_argument("duplicate tensor " + name);
  tensors.emplace_back(std::move(name), std::move(value));
}

bool TensorBundle::Has(std::string_view name) const {
  for (const auto& [n, m] : tensors) {
    if (n == name) return true;
  }
  return false;
}

const Matrix& TensorBundle::Get(std::string_view name) const {
  for (const auto& [n, m] : tensors) {
    if (n == name) return m;
  }
  throw std::runtime_error(fmt::format("checkpoint has no tensor '{}'", name));
}

void WriteBundle(const std::filesystem::path& path, const TensorBundle& bundle) {
  nlohmann::json header;
  header["kind"] = bundle.kind;
  header["meta"] = bundle.meta;
  header["tensors"] = nlohmann::json::array();
  uint64_t offset = 0;
  for (const auto& [name, m] : bundle.tensors) {
    header["tensors"].push_back({{"name", name},
                                 {"rows", m.rows()},
                                 {"cols", m.cols()},
                                 {"offset", offset}});
    offset += static_cast<uint64_t>(m.size()) * sizeof(double);
  }
  const std::string text = header.dump();
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os.write(kMagic, sizeof(kMagic));
  WritePod<uint32_t>(os, kCheckpointVersion);
  WritePod<uint64_t>(os, text.size());
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& [name, m] : bundle.tensors) {
    os.write(reinterpret_cast<const char*>(m.data()),
             static_cast<std::streamsize>(m.size() * sizeof(double)));
  }
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

TensorBundle ReadBundle(const std::filesystem::path& path,
                        std::string_view expected_kind) {
  if (!std::filesystem::exists(path)) {
    throw MissingArtifactError("missing checkpoint: " + path.string());
  }
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw std::runtime_error("not a checkpoint file: " + path.string());
  }
  const auto version = ReadPod<uint32_t>(is);
  if (version != kCheckpointVersion) {
    throw std::runtime_error(
        fmt::format("unsupported checkpoint version {}", version));
  }
  const auto header_len = ReadPod<uint64_t>(is);
  std::string text(header_len, '\0');
  is.read(text.data(), static_cast<std::streamsize>(header_len));
  if (!is) throw std::runtime_error("truncated checkpoint header");
  const nlohmann::json header = nlohmann::json::parse(text);
  TensorBundle bundle;
  bundle.kind = header.at("kind").get<std::string>();
  if (!expected_kind.empty() && bundle.kind != expected_kind) {
    throw std::runtime_error(fmt::format("{}: expected a '{}' checkpoint, got '{}'",
                                         path.string(), expected_kind, bundle.kind));
  }
  bundle.meta = header.at("meta");
  const auto payload_start = is.tellg();
  for (const auto& t : header.at("tensors")) {
    Matrix m(t.at("rows").get<Eigen::Index>(), t.at("cols").get<Eigen::Index>());
    is.seekg(payload_start + static_cast<std::streamoff>(t.at("offset").get<uint64_t>()));
    is.read(reinterpret_cast<char*>(m.data()),
            static_cast<std::streamsize>(m.size() * sizeof(double)));
    if (!is) throw std::runtime_error("truncated checkpoint payload");
    bundle.tensors.emplace_back(t.at("name").get<std::string>(), std::move(m));
  }
  return bundle;
}

std::string Sha256Hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(),
                 nullptr) != 1) {
    throw std::runtime_error("SHA-256 failed");
  }
  return Hex(digest, len);
}

std::string Sha256File(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw MissingArtifactError("missing file: " + path.string());
  }
  return Sha256Hex(ReadTextFile(path));
}

TensorHasher::TensorHasher() : ctx_(EVP_MD_CTX_new()) {
  EVP_DigestInit_ex(static_cast<EVP_MD_CTX*>(ctx_), EVP_sha256(), nullptr);
}

TensorHasher::~TensorHasher() { EVP_MD_CTX_free(static_cast<EVP_MD_CTX*>(ctx_)); }

void TensorHasher::Add(std::string_view name, const Matrix& m) {
  auto* ctx = static_cast<EVP_MD_CTX*>(ctx_);
  const std::string tag = fmt::format("{}:{}x{};", name, m.rows(), m.cols());
  EVP_DigestUpdate(ctx, tag.data(), tag.size());
  EVP_DigestUpdate(ctx, m.data(), m.size() * sizeof(double));
}

std::string TensorHasher::Finish() {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned len = 0;
  EVP_DigestFinal_ex(static_cast<EVP_MD_CTX*>(ctx_), digest, &len);
  return Hex(digest, len);
}

void WriteTextFile(const std::filesystem::path& path, std::string_view text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
}

std::string ReadTextFile(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw MissingArtifactError("cannot read " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace slotbridge
