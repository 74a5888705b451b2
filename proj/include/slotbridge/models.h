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

// Frozen encoder / decoder abstractions and the small deterministic
// transformers that stand in for them in desk-scale runs.

#ifndef SLOTBRIDGE_MODELS_H_
#define SLOTBRIDGE_MODELS_H_

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "slotbridge/autograd.h"
#include "slotbridge/checkpoint.h"
#include "slotbridge/lora.h"
#include "slotbridge/tokenizer.h"

namespace slotbridge {

class FrozenEncoder {
 public:
  virtual ~FrozenEncoder() = default;
  virtual int hidden_dim() const = 0;
  // Per-token hidden states, shape (ids.size(), hidden_dim()).
  virtual Matrix Encode(std::span<const int> token_ids,
                        std::span<const int> attention_mask) const = 0;
  virtual std::string WeightsDigest() const = 0;
};

// Which hidden state a decoder read-out returns.
struct HiddenOptions {
  // Residual-stream output of this layer; -1 means the last layer.
  int layer = -1;
  // Apply the decoder's final normalization before returning.
  bool post_norm = true;
};

struct DecoderTrace {
  std::vector<Var> layer_outputs;  // residual stream after each layer
  Var final_hidden;                // final norm applied to the last layer
};

class FrozenDecoder {
 public:
  virtual ~FrozenDecoder() = default;

  virtual int hidden_dim() const = 0;
  virtual int vocab_size() const = 0;
  virtual int num_layers() const = 0;
  virtual const Matrix& embedding_matrix() const = 0;
  virtual const std::vector<int>& reserved_token_ids() const = 0;
  virtual DecoderShape shape() const = 0;

  // Differentiable forward over input embedding rows (seq x hidden_dim).
  // Base weights enter the graph as constants; only `lora` (when given and
  // trainable) contributes parameters.
  virtual DecoderTrace Forward(Graph& g, Var rows, LoraAdapterSet* lora) const = 0;
  // hidden (seq x hidden_dim) -> logits (seq x vocab).
  virtual Var Logits(Graph& g, Var hidden) const = 0;
  virtual Var FinalNorm(Graph& g, Var x) const = 0;
  virtual std::string WeightsDigest() const = 0;

  Matrix EmbedTokens(std::span<const int> ids) const;
  Matrix ForwardHidden(const Matrix& rows, const HiddenOptions& opts = {}) const;
  Matrix ForwardLogits(const Matrix& rows) const;
};

struct ToyModelConfig {
  int encoder_dim = 32;
  int decoder_dim = 64;
  int layers = 2;
  int heads = 4;
  // 0 means "exactly the toy tokenizer's vocabulary".
  int vocab_size = 0;
  int num_slots = 8;
  int mlp_ratio = 4;
  uint64_t seed = 0;

  // Throws std::invalid_argument naming the offending field.
  void Validate() const;
};

// Weights of one pre-norm transformer block (no biases, RMSNorm).
struct BlockWeights {
  Matrix attn_norm;  // 1 x d
  Matrix wq, wk, wv, wo;
  Matrix mlp_norm;   // 1 x d
  Matrix w_up;       // d x mlp
  Matrix w_down;     // mlp x d
};

class ToyEncoder : public FrozenEncoder {
 public:
  ToyEncoder(int dim, int heads, Matrix embedding, std::vector<BlockWeights> blocks,
             Matrix final_norm);

  int hidden_dim() const override { return dim_; }
  Matrix Encode(std::span<const int> token_ids,
                std::span<const int> attention_mask) const override;
  std::string WeightsDigest() const override;

  void AppendTo(TensorBundle& bundle, const std::string& prefix) const;
  static std::unique_ptr<ToyEncoder> FromBundle(const TensorBundle& bundle,
                                                const std::string& prefix,
                                                int heads);

 private:
  int dim_;
  int heads_;
  Matrix embedding_;
  std::vector<BlockWeights> blocks_;
  Matrix final_norm_;
};

// Causal LLaMA-style decoder: RMS pre-normalization without bias, rotary
// positions, GELU MLP, untied output head. Rows for reserved tokens in the
// embedding matrix are zero.
class ToyDecoder : public FrozenDecoder {
 public:
  ToyDecoder(int dim, int heads, Matrix embedding, std::vector<BlockWeights> blocks,
             Matrix final_norm, Matrix lm_head, std::vector<int> reserved_ids);

  int hidden_dim() const override { return dim_; }
  int vocab_size() const override { return static_cast<int>(embedding_.rows()); }
  int num_layers() const override { return static_cast<int>(blocks_.size()); }
  const Matrix& embedding_matrix() const override { return embedding_; }
  const std::vector<int>& reserved_token_ids() const override {
    return reserved_ids_;
  }
  DecoderShape shape() const override;

  DecoderTrace Forward(Graph& g, Var rows, LoraAdapterSet* lora) const override;
  Var Logits(Graph& g, Var hidden) const override;
  Var FinalNorm(Graph& g, Var x) const override;
  std::string WeightsDigest() const override;

  void AppendTo(TensorBundle& bundle, const std::string& prefix) const;
  static std::unique_ptr<ToyDecoder> FromBundle(const TensorBundle& bundle,
                                                const std::string& prefix,
                                                int heads,
                                                std::vector<int> reserved_ids);

 private:
  int dim_;
  int heads_;
  Matrix embedding_;
  std::vector<BlockWeights> blocks_;
  Matrix final_norm_;
  Matrix lm_head_;
  std::vector<int> reserved_ids_;
};

struct ToyModels {
  ToyModelConfig config;
  std::shared_ptr<const ToyEncoder> encoder;
  std::shared_ptr<const ToyDecoder> decoder;
  std::shared_ptr<const CharTokenizer> tokenizer;
};

ToyModels BuildToyModels(const ToyModelConfig& config);

// Non-owning view of the frozen pieces the trainers need.
struct FrozenModels {
  const FrozenEncoder* encoder = nullptr;
  const FrozenDecoder* decoder = nullptr;
  const Tokenizer* tokenizer = nullptr;
  int foreign_emb_id = -1;
  std::vector<int> slot_ids;  // <f0> ... <fK-1>
  int eos_id = -1;
  // Wrapped around source tokens before encoding, like the sentence markers
  // of the usual multilingual encoders. Pooling covers them too.
  std::vector<int> encoder_prefix;
  std::vector<int> encoder_suffix;
};

FrozenModels ViewOf(const ToyModels& models);

// Pooled encoder vector of a source sentence, markers included.
RowVector EncodeSource(const FrozenModels& models, std::string_view text);
void SaveToyModels(const ToyModels& models, const std::filesystem::path& path);
ToyModels LoadToyModels(const std::filesystem::path& path);

// Mean of the rows of token_states whose mask entry is nonzero.
RowVector MaskMeanPool(const Matrix& token_states,
                       std::span<const int> attention_mask);

// Encodes text with the encoder and mask-mean pools it (all tokens valid).
RowVector EncodeSentence(const FrozenEncoder& encoder, const Tokenizer& tokenizer,
                         std::string_view text);

struct TeacherTarget {
  RowVector vector;
  int position = -1;
  HiddenOptions options;
};

// Hidden state at the (last) occurrence of reserved_id in prompt_ids.
TeacherTarget ExtractTeacher(const FrozenDecoder& decoder,
                             std::span<const int> prompt_ids, int reserved_id,
                             const HiddenOptions& opts = {});

// "User:<instruction><foreign_emb> Assistant:"
std::string TeacherPrompt(std::string_view instruction);

// Median row L2 norm of the embedding matrix, skipping reserved rows.
// Even counts average the two middle values.
double MedianEmbeddingNorm(const FrozenDecoder& decoder);

}  // namespace slotbridge

#endif  // SLOTBRIDGE_MODELS_H_
