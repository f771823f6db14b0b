// Copyright 2026 The swa-infer Authors
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

#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <vector>

#include "swa/config.h"
#include "swa/rolling_cache.h"
#include "swa/tensor.h"

namespace swa {

struct LayerWeights {
  Tensor attn_norm_gain;  // [dim]
  Tensor wq;              // [dim x n_heads*head_dim]
  Tensor wk;              // [dim x n_kv_heads*head_dim]
  Tensor wv;              // [dim x n_kv_heads*head_dim]
  Tensor wo;              // [n_heads*head_dim x dim]
  Tensor ffn_norm_gain;   // [dim]
  Tensor w1;              // [dim x hidden_dim]
  Tensor w2;              // [hidden_dim x dim]
  Tensor w3;              // [dim x hidden_dim]

  bool operator==(const LayerWeights&) const = default;
};

// Immutable once built; share between sessions through shared_ptr<const>.
struct DecoderWeights {
  ModelConfig config;
  Tensor token_embedding;  // [vocab_size x dim]
  std::vector<LayerWeights> layers;
  Tensor final_norm_gain;  // [dim]
  Tensor output_proj;      // [dim x vocab_size]

  // Visits every tensor in serialization order.
  template <class Self, class Fn>
  static void visit(Self& self, Fn&& fn) {
    fn(self.token_embedding);
    for (auto& layer : self.layers) {
      fn(layer.attn_norm_gain);
      fn(layer.wq);
      fn(layer.wk);
      fn(layer.wv);
      fn(layer.wo);
      fn(layer.ffn_norm_gain);
      fn(layer.w1);
      fn(layer.w2);
      fn(layer.w3);
    }
    fn(self.final_norm_gain);
    fn(self.output_proj);
  }
  template <class Fn>
  void for_each_tensor(Fn&& fn) const { visit(*this, fn); }
  template <class Fn>
  void for_each_tensor(Fn&& fn) { visit(*this, fn); }

  int64_t element_count() const;
  bool operator==(const DecoderWeights&) const = default;
};

// Zero tensors with the shapes implied by `config`.
DecoderWeights allocate_weights(const ModelConfig& config);

// Deterministic random weights. Projections and embeddings are uniform in
// +-0.02/sqrt(n_layers); norm gains are uniform in [0.5, 1.5).
DecoderWeights init_random(const ModelConfig& config, uint64_t seed);

// [start, end) token range of one pre-fill chunk.
struct TokenRange {
  int64_t start = 0;
  int64_t end = 0;
  int64_t size() const { return end - start; }
  bool operator==(const TokenRange&) const = default;
};

// Splits [0, prompt_len) into window-sized chunks; the last may be shorter.
std::vector<TokenRange> chunk_prompt(int64_t prompt_len, int64_t window);

// One sequence decoding over shared weights, with one rolling cache per layer.
class GenerationSession {
 public:
  explicit GenerationSession(std::shared_ptr<const DecoderWeights> weights);

  // Feeds one token at next_position() and returns its logits [vocab_size].
  Tensor forward_decode(int32_t token);
  // Chunked pre-fill of a fresh session; returns the last position's logits.
  Tensor prefill(std::span<const int32_t> prompt);

  const ModelConfig& config() const { return weights_->config; }
  const DecoderWeights& weights() const { return *weights_; }
  int64_t next_position() const { return next_position_; }
  const std::vector<RollingKvCache>& caches() const { return caches_; }
  int64_t cache_bytes() const;
  // Largest query x key score block materialized for a single head so far.
  int64_t peak_score_entries() const { return peak_score_entries_; }

 private:
  Tensor run_layers(Tensor x, int64_t start, bool prefill_chunk);
  Tensor logits_for_last(const Tensor& x) const;
  Tensor embed(std::span<const int32_t> tokens) const;

  std::shared_ptr<const DecoderWeights> weights_;
  std::vector<RollingKvCache> caches_;
  int64_t next_position_ = 0;
  int64_t peak_score_entries_ = 0;
};

struct SamplerSpec {
  enum class Mode { kGreedy, kTopK };
  Mode mode = Mode::kGreedy;
  int64_t k = 1;
  float temperature = 1.0f;
  uint64_t seed = 0;

  static SamplerSpec greedy() { return {}; }
  static SamplerSpec top_k(int64_t k, float temperature, uint64_t seed) {
    return {Mode::kTopK, k, temperature, seed};
  }
};

// Picks next tokens from logit rows. Greedy breaks ties toward the lowest id.
class TokenSampler {
 public:
  TokenSampler(const SamplerSpec& spec, int64_t vocab_size);
  int32_t pick(const Tensor& logits);

 private:
  SamplerSpec spec_;
  std::mt19937_64 engine_;
};

int32_t argmax_lowest(std::span<const float> logits);

struct GenerationStats {
  int64_t prompt_tokens = 0;
  int64_t tokens_generated = 0;
  double prefill_seconds = 0.0;
  double decode_seconds = 0.0;
  double tokens_per_second = 0.0;
  int64_t cache_bytes = 0;
  int64_t swa_score_pairs = 0;
  int64_t full_score_pairs = 0;
};

struct GenerationResult {
  std::vector<int32_t> tokens;
  GenerationStats stats;
  bool truncated = false;
};

// Pre-fills `prompt` then samples up to max_tokens continuations. Stops early
// with truncated=true when the sequence would exceed context_len.
GenerationResult generate(GenerationSession& session, std::span<const int32_t> prompt,
                          int64_t max_tokens, const SamplerSpec& sampler);

}  // namespace swa
