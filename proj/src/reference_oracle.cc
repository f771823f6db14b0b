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

#include "swa/reference_oracle.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace swa {
namespace {

void require_compatible(const DecoderWeights& weights, const ModelConfig& config) {
  require_valid(config);
  ModelConfig shape_only = config;
  shape_only.window_size = weights.config.window_size;
  shape_only.context_len = weights.config.context_len;
  if (!(shape_only == weights.config)) {
    throw std::invalid_argument("oracle: config shapes do not match the weights");
  }
}

void check_length(const ModelConfig& config, int64_t len) {
  if (len < 1) throw std::invalid_argument("oracle: token list must be non-empty");
  if (len > config.context_len) {
    throw std::out_of_range("oracle: " + std::to_string(len) + " tokens exceed context_len " +
                            std::to_string(config.context_len));
  }
  if (len * config.dim > kOracleMaxHistoryElements) {
    throw std::out_of_range("oracle: history of " + std::to_string(len) + "x" +
                            std::to_string(config.dim) + " exceeds the desk-scale limit");
  }
}

// Full-history attention for one layer. q: [len x n_heads*hd], k, v:
// [len x n_kv_heads*hd]. Returns [len x n_heads*hd].
Tensor attend_history(const ModelConfig& cfg, const Tensor& q, const Tensor& k, const Tensor& v,
                      std::optional<int64_t> window) {
  const int64_t len = q.dim(0), hd = cfg.head_dim;
  const int64_t group = cfg.n_heads / cfg.n_kv_heads;
  const float scale = 1.0f / std::sqrt(static_cast<float>(hd));
  Tensor out({len, cfg.n_heads * hd});
  for (int64_t i = 0; i < len; ++i) {
    const int64_t first = window ? std::max<int64_t>(0, i - *window + 1) : 0;
    const auto n_keys = static_cast<size_t>(i - first + 1);
    std::vector<float> scores(n_keys), weights(n_keys);
    const std::vector<uint8_t> all(n_keys, 1);
    for (int64_t h = 0; h < cfg.n_heads; ++h) {
      const int64_t kvh = h / group;
      const float* qi = &q[i * cfg.n_heads * hd + h * hd];
      for (int64_t j = first; j <= i; ++j) {
        const float* kj = &k[j * cfg.n_kv_heads * hd + kvh * hd];
        float dot = 0.0f;
        for (int64_t d = 0; d < hd; ++d) dot += qi[d] * kj[d];
        scores[static_cast<size_t>(j - first)] = dot * scale;
      }
      softmax_row(scores, all, weights);
      float* oi = &out[i * cfg.n_heads * hd + h * hd];
      for (int64_t j = first; j <= i; ++j) {
        const float* vj = &v[j * cfg.n_kv_heads * hd + kvh * hd];
        const float w = weights[static_cast<size_t>(j - first)];
        for (int64_t d = 0; d < hd; ++d) oi[d] += w * vj[d];
      }
    }
  }
  return out;
}

void rotate_all(Tensor& x, int64_t heads, int64_t hd) {
  for (int64_t pos = 0; pos < x.dim(0); ++pos) {
    for (int64_t h = 0; h < heads; ++h) {
      rope_rotate_inplace(x.row(pos).subspan(static_cast<size_t>(h * hd), static_cast<size_t>(hd)), pos);
    }
  }
}

}  // namespace

int64_t FullHistoryState::float_count() const {
  int64_t n = 0;
  for (const auto& t : keys) n += t.size();
  for (const auto& t : values) n += t.size();
  return n;
}

Tensor oracle_embed(const DecoderWeights& weights, std::span<const int32_t> tokens) {
  const ModelConfig& cfg = weights.config;
  Tensor x({static_cast<int64_t>(tokens.size()), cfg.dim});
  for (size_t t = 0; t < tokens.size(); ++t) {
    if (tokens[t] < 0 || tokens[t] >= cfg.vocab_size) {
      throw std::out_of_range("oracle: invalid token id " + std::to_string(tokens[t]));
    }
    for (int64_t d = 0; d < cfg.dim; ++d) {
      x.at(static_cast<int64_t>(t), d) = weights.token_embedding.at(tokens[t], d);
    }
  }
  return x;
}

Tensor oracle_forward_embedded(const DecoderWeights& weights, const ModelConfig& config,
                               const Tensor& embeddings, std::optional<int64_t> window,
                               FullHistoryState* history) {
  require_compatible(weights, config);
  if (embeddings.rank() != 2 || embeddings.dim(1) != config.dim) {
    throw std::invalid_argument("oracle: embeddings must be [len x dim], got " +
                                shape_string(embeddings.shape()));
  }
  check_length(config, embeddings.dim(0));
  if (window && *window < 1) throw std::invalid_argument("oracle: window must be >= 1");
  if (history) *history = FullHistoryState{};

  Tensor x = embeddings;
  for (const LayerWeights& lw : weights.layers) {
    const Tensor xn = rms_norm(x, lw.attn_norm_gain);
    Tensor q = matmul(xn, lw.wq);
    Tensor k = matmul(xn, lw.wk);
    Tensor v = matmul(xn, lw.wv);
    rotate_all(q, config.n_heads, config.head_dim);
    rotate_all(k, config.n_kv_heads, config.head_dim);

    const Tensor attn = attend_history(config, q, k, v, window);
    const Tensor h = add(x, matmul(attn, lw.wo));
    const Tensor hn = rms_norm(h, lw.ffn_norm_gain);
    x = add(h, matmul(silu_gate(matmul(hn, lw.w1), matmul(hn, lw.w3)), lw.w2));

    if (history) {
      history->keys.push_back(std::move(k));
      history->values.push_back(std::move(v));
    }
  }
  return matmul(rms_norm(x, weights.final_norm_gain), weights.output_proj);
}

Tensor oracle_forward_swa(const DecoderWeights& weights, const ModelConfig& config,
                          std::span<const int32_t> tokens, FullHistoryState* history) {
  check_length(config, static_cast<int64_t>(tokens.size()));
  return oracle_forward_embedded(weights, config, oracle_embed(weights, tokens), config.window_size,
                                 history);
}

Tensor oracle_forward_causal(const DecoderWeights& weights, const ModelConfig& config,
                             std::span<const int32_t> tokens, FullHistoryState* history) {
  check_length(config, static_cast<int64_t>(tokens.size()));
  return oracle_forward_embedded(weights, config, oracle_embed(weights, tokens), std::nullopt, history);
}

std::vector<int64_t> reach_probe(const DecoderWeights& weights, const ModelConfig& config,
                                 std::span<const int32_t> tokens, int64_t perturb_position,
                                 float epsilon) {
  const auto len = static_cast<int64_t>(tokens.size());
  if (perturb_position < 0 || perturb_position >= len) {
    throw std::out_of_range("reach_probe: perturb position " + std::to_string(perturb_position) +
                            " outside [0, " + std::to_string(len) + ")");
  }
  if (!(epsilon > 0.0f)) throw std::invalid_argument("reach_probe: epsilon must be > 0");

  const Tensor base = oracle_embed(weights, tokens);
  Tensor shifted = base;
  shifted.at(perturb_position, 0) += epsilon;

  const Tensor a = oracle_forward_embedded(weights, config, base, config.window_size);
  const Tensor b = oracle_forward_embedded(weights, config, shifted, config.window_size);
  std::vector<int64_t> affected;
  for (int64_t i = 0; i < len; ++i) {
    float worst = 0.0f;
    for (int64_t c = 0; c < a.dim(1); ++c) worst = std::max(worst, std::abs(a.at(i, c) - b.at(i, c)));
    if (worst > kReachThreshold) affected.push_back(i);
  }
  return affected;
}

}  // namespace swa
