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

// Slow full-history baselines. Nothing here touches the rolling cache or the
// attention module: every position keeps its K/V rows for the whole sequence
// and the window predicate is applied inline.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "swa/config.h"
#include "swa/decoder_model.h"
#include "swa/tensor.h"

namespace swa {

// Refuse sequences whose hidden history (len x dim) exceeds this.
inline constexpr int64_t kOracleMaxHistoryElements = int64_t{1} << 20;

// Unbounded K/V storage, one entry per layer; rows grow with every token.
struct FullHistoryState {
  std::vector<Tensor> keys;    // per layer [len x n_kv_heads*head_dim], post-rotary
  std::vector<Tensor> values;  // per layer [len x n_kv_heads*head_dim]

  int64_t rows_per_layer() const { return keys.empty() ? 0 : keys.front().dim(0); }
  int64_t float_count() const;
};

// Logits [len x vocab_size] for every position. `window` limits each query to
// the most recent `window` keys including itself; nullopt means plain causal.
// `config` may differ from weights.config only in window_size/context_len.
Tensor oracle_forward_embedded(const DecoderWeights& weights, const ModelConfig& config,
                               const Tensor& embeddings, std::optional<int64_t> window,
                               FullHistoryState* history = nullptr);

Tensor oracle_embed(const DecoderWeights& weights, std::span<const int32_t> tokens);

Tensor oracle_forward_swa(const DecoderWeights& weights, const ModelConfig& config,
                          std::span<const int32_t> tokens, FullHistoryState* history = nullptr);
Tensor oracle_forward_causal(const DecoderWeights& weights, const ModelConfig& config,
                             std::span<const int32_t> tokens, FullHistoryState* history = nullptr);

inline constexpr float kReachThreshold = 1e-7f;

// Output positions whose logits move by more than kReachThreshold when the
// first coordinate of the embedding at perturb_position is shifted by epsilon.
std::vector<int64_t> reach_probe(const DecoderWeights& weights, const ModelConfig& config,
                                 std::span<const int32_t> tokens, int64_t perturb_position,
                                 float epsilon);

}  // namespace swa
