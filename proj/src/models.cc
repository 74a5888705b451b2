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

#include "slotbridge/models.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <fmt/format.h>

#include "slotbridge/rng.h"

namespace slotbridge {
namespace {

constexpr double kNormEps = 1e-6;
constexpr double kRopeBase = 10000.0;

Matrix RandomNormal(Rng& rng, Eigen::Index rows, Eigen::Index cols, double std) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = std * rng.Normal();
  return m;
}

BlockWeights RandomBlock(Rng& rng, int dim, int mlp_dim) {
  const double s = 1.0 / std::sqrt(static_cast<double>(dim));
  BlockWeights w;
  w.attn_norm = Matrix::Ones(1, dim);
  w.wq = RandomNormal(rng, dim, dim, s);
  w.wk = RandomNormal(rng, dim, dim, s);
  w.wv = RandomNormal(rng, dim, dim, s);
  w.wo = RandomNormal(rng, dim, dim, s);
  w.mlp_norm = Matrix::Ones(1, dim);
  w.w_up = RandomNormal(rng, dim, mlp_dim, s);
  w.w_down = RandomNormal(rng, mlp_dim, dim,
                          1.0 / std::sqrt(static_cast<double>(mlp_dim)));
  return w;
}

Var Project(Graph& g, Var x, const Matrix& w, LoraAdapterSet* lora, int layer,
            LoraTarget target) {
  Var y = ops::MatMul(x, g.ConstantRef(w));
  if (lora != nullptr) {
    if (auto delta = lora->Delta(g, layer, target, x)) y = ops::Add(y, *delta);
  }
  return y;
}

// Pre-norm block: x + Attn(Norm(x)), then h + MLP(Norm(h)).
Var BlockForward(Graph& g, Var x, const BlockWeights& w, int heads,
                 const Matrix& mask, LoraAdapterSet* lora, int layer) {
  const Eigen::Index dim = x.cols();
  const Eigen::Index head_dim = dim / heads;
  Var attn_gain = g.ConstantRef(w.attn_norm);
  Var xn = ops::RmsNormRows(x, &attn_gain, kNormEps);
  Var q = ops::Rope(Project(g, xn, w.wq, lora, layer, LoraTarget::kQuery),
                    heads, kRopeBase);
  Var k = ops::Rope(Project(g, xn, w.wk, lora, layer, LoraTarget::kKey), heads,
                    kRopeBase);
  Var v = Project(g, xn, w.wv, lora, layer, LoraTarget::kValue);
  std::vector<Var> head_out;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(head_dim));
  for (int h = 0; h < heads; ++h) {
    Var qh = ops::SliceCols(q, h * head_dim, head_dim);
    Var kh = ops::SliceCols(k, h * head_dim, head_dim);
    Var vh = ops::SliceCols(v, h * head_dim, head_dim);
    Var p = ops::SoftmaxRows(ops::Scale(ops::MatMulBT(qh, kh), inv_sqrt), &mask);
    head_out.push_back(ops::MatMul(p, vh));
  }
  Var attn = Project(g, ops::ConcatCols(head_out), w.wo, lora, layer,
                     LoraTarget::kOutput);
  Var h = ops::Add(x, attn);
  Var mlp_gain = g.ConstantRef(w.mlp_norm);
  Var hn = ops::RmsNormRows(h, &mlp_gain, kNormEps);
  Var up = ops::Gelu(Project(g, hn, w.w_up, lora, layer, LoraTarget::kUp));
  Var down = Project(g, up, w.w_down, lora, layer, LoraTarget::kDown);
  return ops::Add(h, down);
}

Matrix CausalMask(Eigen::Index n) {
  Matrix m = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      m(i, j) = -std::numeric_limits<double>::infinity();
    }
  }
  return m;
}

void HashBlocks(TensorHasher& h, const std::vector<BlockWeights>& blocks) {
  for (size_t l = 0; l < blocks.size(); ++l) {
    const BlockWeights& b = blocks[l];
    const std::string p = fmt::format("block{}.", l);
    h.Add(p + "attn_norm", b.attn_norm);
    h.Add(p + "wq", b.wq);
    h.Add(p + "wk", b.wk);
    h.Add(p + "wv", b.wv);
    h.Add(p + "wo", b.wo);
    h.Add(p + "mlp_norm", b.mlp_norm);
    h.Add(p + "w_up", b.w_up);
    h.Add(p + "w_down", b.w_down);
  }
}

void AppendBlocks(TensorBundle& bundle, const std::string& prefix,
                  const std::vector<BlockWeights>& blocks) {
  for (size_t l = 0; l < blocks.size(); ++l) {
    const BlockWeights& b = blocks[l];
    const std::string p = fmt::format("{}block{}.", prefix, l);
    bundle.Add(p + "attn_norm", b.attn_norm);
    bundle.Add(p + "wq", b.wq);
    bundle.Add(p + "wk", b.wk);
    bundle.Add(p + "wv", b.wv);
    bundle.Add(p + "wo", b.wo);
    bundle.Add(p + "mlp_norm", b.mlp_norm);
    bundle.Add(p + "w_up", b.w_up);
    bundle.Add(p + "w_down", b.w_down);
  }
}

std::vector<BlockWeights> ReadBlocks(const TensorBundle& bundle,
                                     const std::string& prefix) {
  std::vector<BlockWeights> blocks;
  for (int l = 0;; ++l) {
    const std::string p = fmt::format("{}block{}.", prefix, l);
    if (!bundle.Has(p + "wq")) break;
    BlockWeights b;
    b.attn_norm = bundle.Get(p + "attn_norm");
    b.wq = bundle.Get(p + "wq");
    b.wk = bundle.Get(p + "wk");
    b.wv = bundle.Get(p + "wv");
    b.wo = bundle.Get(p + "wo");
    b.mlp_norm = bundle.Get(p + "mlp_norm");
    b.w_up = bundle.Get(p + "w_up");
    b.w_down = bundle.Get(p + "w_down");
    blocks.push_back(std::move(b));
  }
  return blocks;
}

}  // namespace

Matrix FrozenDecoder::EmbedTokens(std::span<const int> ids) const {
  const Matrix& e = embedding_matrix();
  Matrix rows(static_cast<Eigen::Index>(ids.size()), e.cols());
  for (size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= e.rows()) {
      throw std::out_of_range(fmt::format("token id {} out of range", ids[i]));
    }
    rows.row(static_cast<Eigen::Index>(i)) = e.row(ids[i]);
  }
  return rows;
}

Matrix FrozenDecoder::ForwardHidden(const Matrix& rows,
                                    const HiddenOptions& opts) const {
  Graph g;
  DecoderTrace trace = Forward(g, g.ConstantRef(rows), nullptr);
  const int layer = opts.layer < 0 ? num_layers() - 1 : opts.layer;
  if (layer >= num_layers()) throw std::out_of_range("hidden layer index");
  Var out = trace.layer_outputs[layer];
  if (opts.post_norm) {
    out = layer == num_layers() - 1 ? trace.final_hidden : FinalNorm(g, out);
  }
  return out.value();
}

Matrix FrozenDecoder::ForwardLogits(const Matrix& rows) const {
  Graph g;
  DecoderTrace trace = Forward(g, g.ConstantRef(rows), nullptr);
  return Logits(g, trace.final_hidden).value();
}

void ToyModelConfig::Validate() const {
  auto fail = [](const std::string& m) { throw std::invalid_argument(m); };
  if (encoder_dim <= 0) fail("encoder_dim must be positive");
  if (decoder_dim <= 0) fail("decoder_dim must be positive");
  if (layers <= 0) fail("layers must be positive");
  if (heads <= 0) fail("heads must be positive");
  if (encoder_dim % heads != 0) fail("encoder_dim must be divisible by heads");
  if (decoder_dim % heads != 0) fail("decoder_dim must be divisible by heads");
  if ((encoder_dim / heads) % 2 != 0 || (decoder_dim / heads) % 2 != 0) {
    fail("head dimension must be even (rotary positions)");
  }
  if (num_slots < 1) fail("num_slots must be >= 1");
  if (mlp_ratio <= 0) fail("mlp_ratio must be positive");
  if (vocab_size < 0) fail("vocab_size must be >= 0");
  if (vocab_size > 0 && vocab_size < CharTokenizer(num_slots).vocab_size()) {
    fail("vocab_size smaller than the toy tokenizer vocabulary");
  }
}

ToyEncoder::ToyEncoder(int dim, int heads, Matrix embedding,
                       std::vector<BlockWeights> blocks, Matrix final_norm)
    : dim_(dim), heads_(heads), embedding_(std::move(embedding)),
      blocks_(std::move(blocks)), final_norm_(std::move(final_norm)) {}

Matrix ToyEncoder::Encode(std::span<const int> token_ids,
                          std::span<const int> attention_mask) const {
  if (token_ids.size() != attention_mask.size()) {
    throw std::invalid_argument("Encode: ids/mask length mismatch");
  }
  if (token_ids.empty()) throw std::invalid_argument("Encode: empty sequence");
  const auto n = static_cast<Eigen::Index>(token_ids.size());
  Matrix rows(n, dim_);
  Matrix mask = Matrix::Zero(n, n);
  bool any = false;
  for (Eigen::Index i = 0; i < n; ++i) {
    const int id = token_ids[i];
    if (id < 0 || id >= embedding_.rows()) {
      throw std::out_of_range(fmt::format("token id {} out of range", id));
    }
    rows.row(i) = embedding_.row(id);
    if (attention_mask[i] == 0) {
      mask.col(i).setConstant(-std::numeric_limits<double>::infinity());
    } else {
      any = true;
    }
  }
  if (!any) throw std::invalid_argument("Encode: empty sequence");
  Graph g;
  Var x = g.ConstantRef(rows);
  for (size_t l = 0; l < blocks_.size(); ++l) {
    x = BlockForward(g, x, blocks_[l], heads_, mask, nullptr, static_cast<int>(l));
  }
  Var gain = g.ConstantRef(final_norm_);
  return ops::RmsNormRows(x, &gain, kNormEps).value();
}

std::string ToyEncoder::WeightsDigest() const {
  TensorHasher h;
  h.Add("embedding", embedding_);
  HashBlocks(h, blocks_);
  h.Add("final_norm", final_norm_);
  return h.Finish();
}

void ToyEncoder::AppendTo(TensorBundle& bundle, const std::string& prefix) const {
  bundle.Add(prefix + "embedding", embedding_);
  AppendBlocks(bundle, prefix, blocks_);
  bundle.Add(prefix + "final_norm", final_norm_);
}

std::unique_ptr<ToyEncoder> ToyEncoder::FromBundle(const TensorBundle& bundle,
                                                   const std::string& prefix,
                                                   int heads) {
  const Matrix& e = bundle.Get(prefix + "embedding");
  return std::make_unique<ToyEncoder>(static_cast<int>(e.cols()), heads, e,
                                      ReadBlocks(bundle, prefix),
                                      bundle.Get(prefix + "final_norm"));
}

ToyDecoder::ToyDecoder(int dim, int heads, Matrix embedding,
                       std::vector<BlockWeights> blocks, Matrix final_norm,
                       Matrix lm_head, std::vector<int> reserved_ids)
    : dim_(dim), heads_(heads), embedding_(std::move(embedding)),
      blocks_(std::move(blocks)), final_norm_(std::move(final_norm)),
      lm_head_(std::move(lm_head)), reserved_ids_(std::move(reserved_ids)) {}

DecoderShape ToyDecoder::shape() const {
  return DecoderShape{num_layers(), dim_,
                      blocks_.empty() ? 0 : static_cast<int>(blocks_[0].w_up.cols())};
}

DecoderTrace ToyDecoder::Forward(Graph& g, Var rows, LoraAdapterSet* lora) const {
  if (rows.cols() != dim_) throw std::invalid_argument("decoder input width");
  if (rows.rows() == 0) throw std::invalid_argument("decoder: empty sequence");
  const Matrix mask = CausalMask(rows.rows());
  DecoderTrace trace;
  Var x = rows;
  for (size_t l = 0; l < blocks_.size(); ++l) {
    x = BlockForward(g, x, blocks_[l], heads_, mask, lora, static_cast<int>(l));
    trace.layer_outputs.push_back(x);
  }
  trace.final_hidden = FinalNorm(g, x);
  return trace;
}

Var ToyDecoder::FinalNorm(Graph& g, Var x) const {
  Var gain = g.ConstantRef(final_norm_);
  return ops::RmsNormRows(x, &gain, kNormEps);
}

Var ToyDecoder::Logits(Graph& g, Var hidden) const {
  return ops::MatMul(hidden, g.ConstantRef(lm_head_));
}

std::string ToyDecoder::WeightsDigest() const {
  TensorHasher h;
  h.Add("embedding", embedding_);
  HashBlocks(h, blocks_);
  h.Add("final_norm", final_norm_);
  h.Add("lm_head", lm_head_);
  return h.Finish();
}

void ToyDecoder::AppendTo(TensorBundle& bundle, const std::string& prefix) const {
  bundle.Add(prefix + "embedding", embedding_);
  AppendBlocks(bundle, prefix, blocks_);
  bundle.Add(prefix + "final_norm", final_norm_);
  bundle.Add(prefix + "lm_head", lm_head_);
}

std::unique_ptr<ToyDecoder> ToyDecoder::FromBundle(const TensorBundle& bundle,
                                                   const std::string& prefix,
                                                   int heads,
                                                   std::vector<int> reserved_ids) {
  const Matrix& e = bundle.Get(prefix + "embedding");
  return std::make_unique<ToyDecoder>(
      static_cast<int>(e.cols()), heads, e, ReadBlocks(bundle, prefix),
      bundle.Get(prefix + "final_norm"), bundle.Get(prefix + "lm_head"),
      std::move(reserved_ids));
}

ToyModels BuildToyModels(const ToyModelConfig& config) {
  config.Validate();
  auto tokenizer = std::make_shared<const CharTokenizer>(config.num_slots);
  const int vocab = config.vocab_size > 0 ? config.vocab_size
                                          : tokenizer->vocab_size();

  Rng enc_rng(SplitSeed(config.seed, "toy_models/encoder"));
  const int ed = config.encoder_dim;
  Matrix enc_emb = RandomNormal(enc_rng, vocab, ed, 1.0);
  std::vector<BlockWeights> enc_blocks;
  for (int l = 0; l < config.layers; ++l) {
    enc_blocks.push_back(RandomBlock(enc_rng, ed, ed * config.mlp_ratio));
  }
  auto encoder = std::make_shared<const ToyEncoder>(
      ed, config.heads, std::move(enc_emb), std::move(enc_blocks),
      Matrix::Ones(1, ed));

  Rng dec_rng(SplitSeed(config.seed, "toy_models/decoder"));
  const int dd = config.decoder_dim;
  Matrix dec_emb = RandomNormal(dec_rng, vocab, dd, 1.0 / std::sqrt(double(dd)));
  const std::vector<int> reserved = tokenizer->ReservedIds();
  for (int id : reserved) dec_emb.row(id).setZero();
  std::vector<BlockWeights> dec_blocks;
  for (int l = 0; l < config.layers; ++l) {
    dec_blocks.push_back(RandomBlock(dec_rng, dd, dd * config.mlp_ratio));
  }
  Matrix lm_head = RandomNormal(dec_rng, dd, vocab, 1.0 / std::sqrt(double(dd)));
  auto decoder = std::make_shared<const ToyDecoder>(
      dd, config.heads, std::move(dec_emb), std::move(dec_blocks),
      Matrix::Ones(1, dd), std::move(lm_head), reserved);

  return ToyModels{config, std::move(encoder), std::move(decoder),
                   std::move(tokenizer)};
}

FrozenModels ViewOf(const ToyModels& models) {
  FrozenModels v;
  v.encoder = models.encoder.get();
  v.decoder = models.decoder.get();
  v.tokenizer = models.tokenizer.get();
  v.foreign_emb_id = CharTokenizer::kForeignEmb;
  v.slot_ids = models.tokenizer->SlotIds();
  v.eos_id = CharTokenizer::kEos;
  v.encoder_prefix = {CharTokenizer::kBos};
  v.encoder_suffix = {CharTokenizer::kEos};
  return v;
}

RowVector EncodeSource(const FrozenModels& models, std::string_view text) {
  std::vector<int> ids = models.encoder_prefix;
  const std::vector<int> body = models.tokenizer->Encode(text);
  ids.insert(ids.end(), body.begin(), body.end());
  ids.insert(ids.end(), models.encoder_suffix.begin(), models.encoder_suffix.end());
  const std::vector<int> mask(ids.size(), 1);
  return MaskMeanPool(models.encoder->Encode(ids, mask), mask);
}

void SaveToyModels(const ToyModels& models, const std::filesystem::path& path) {
  TensorBundle bundle;
  bundle.kind = "toy_models";
  const ToyModelConfig& c = models.config;
  bundle.meta = {{"encoder_dim", c.encoder_dim}, {"decoder_dim", c.decoder_dim},
                 {"layers", c.layers},           {"heads", c.heads},
                 {"vocab_size", c.vocab_size},   {"num_slots", c.num_slots},
                 {"mlp_ratio", c.mlp_ratio},     {"seed", c.seed},
                 {"encoder_digest", models.encoder->WeightsDigest()},
                 {"decoder_digest", models.decoder->WeightsDigest()}};
  models.encoder->AppendTo(bundle, "encoder.");
  models.decoder->AppendTo(bundle, "decoder.");
  WriteBundle(path, bundle);
}

ToyModels LoadToyModels(const std::filesystem::path& path) {
  const TensorBundle bundle = ReadBundle(path, "toy_models");
  ToyModelConfig c;
  const auto& m = bundle.meta;
  c.encoder_dim = m.at("encoder_dim").get<int>();
  c.decoder_dim = m.at("decoder_dim").get<int>();
  c.layers = m.at("layers").get<int>();
  c.heads = m.at("heads").get<int>();
  c.vocab_size = m.at("vocab_size").get<int>();
  c.num_slots = m.at("num_slots").get<int>();
  c.mlp_ratio = m.at("mlp_ratio").get<int>();
  c.seed = m.at("seed").get<uint64_t>();
  c.Validate();
  auto tokenizer = std::make_shared<const CharTokenizer>(c.num_slots);
  ToyModels models{c, ToyEncoder::FromBundle(bundle, "encoder.", c.heads),
                   ToyDecoder::FromBundle(bundle, "decoder.", c.heads,
                                          tokenizer->ReservedIds()),
                   tokenizer};
  if (models.encoder->WeightsDigest() != m.at("encoder_digest").get<std::string>() ||
      models.decoder->WeightsDigest() != m.at("decoder_digest").get<std::string>()) {
    throw std::runtime_error("model checkpoint digest mismatch: " + path.string());
  }
  return models;
}

RowVector MaskMeanPool(const Matrix& token_states,
                       std::span<const int> attention_mask) {
  if (static_cast<Eigen::Index>(attention_mask.size()) != token_states.rows()) {
    throw std::invalid_argument("MaskMeanPool: length mismatch");
  }
  RowVector sum = RowVector::Zero(token_states.cols());
  int count = 0;
  for (Eigen::Index i = 0; i < token_states.rows(); ++i) {
    if (attention_mask[i] != 0) {
      sum += token_states.row(i);
      ++count;
    }
  }
  if (count == 0) throw std::invalid_argument("empty sequence");
  return sum / count;
}

RowVector EncodeSentence(const FrozenEncoder& encoder, const Tokenizer& tokenizer,
                         std::string_view text) {
  const std::vector<int> ids = tokenizer.Encode(text);
  const std::vector<int> mask(ids.size(), 1);
  return MaskMeanPool(encoder.Encode(ids, mask), mask);
}

TeacherTarget ExtractTeacher(const FrozenDecoder& decoder,
                             std::span<const int> prompt_ids, int reserved_id,
                             const HiddenOptions& opts) {
  const auto& reserved = decoder.reserved_token_ids();
  if (std::find(reserved.begin(), reserved.end(), reserved_id) == reserved.end()) {
    throw std::invalid_argument(
        fmt::format("token {} is not a registered reserved token", reserved_id));
  }
  int position = -1;
  for (size_t i = 0; i < prompt_ids.size(); ++i) {
    if (prompt_ids[i] == reserved_id) position = static_cast<int>(i);
  }
  if (position < 0) throw std::invalid_argument("reserved position not found");
  // Causal attention: tokens after the reserved position cannot affect it.
  const Matrix rows = decoder.EmbedTokens(prompt_ids.first(position + 1));
  const Matrix hidden = decoder.ForwardHidden(rows, opts);
  return TeacherTarget{hidden.row(position), position, opts};
}

std::string TeacherPrompt(std::string_view instruction) {
  return fmt::format("User:{}{} Assistant:", instruction, kForeignEmbToken);
}

double MedianEmbeddingNorm(const FrozenDecoder& decoder) {
  const Matrix& e = decoder.embedding_matrix();
  const auto& reserved = decoder.reserved_token_ids();
  std::vector<double> norms;
  for (Eigen::Index i = 0; i < e.rows(); ++i) {
    if (std::find(reserved.begin(), reserved.end(), static_cast<int>(i)) !=
        reserved.end()) {
      continue;
    }
    norms.push_back(e.row(i).norm());
  }
  if (norms.empty()) throw std::invalid_argument("embedding matrix is empty");
  std::sort(norms.begin(), norms.end());
  const size_t n = norms.size();
  return n % 2 == 1 ? norms[n / 2] : 0.5 * (norms[n / 2 - 1] + norms[n / 2]);
}

}  // namespace slotbridge
