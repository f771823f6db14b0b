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

#include "swa/decoder_model.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "swa/attention.h"

namespace swa {
namespace {

// Uniform double in [0, 1) from the top 53 bits of the engine output.
double unit_uniform(std::mt19937_64& engine) {
  return static_cast<double>(engine() >> 11) * 0x1.0p-53;
}

void fill_uniform(Tensor& t, std::mt19937_64& engine, float center, float half_width) {
  for (float& v : t.data()) {
    v = center + half_width * static_cast<float>(2.0 * unit_uniform(engine) - 1.0);
  }
}

void rotate_rows(Tensor& x, int64_t n_heads, int64_t head_dim, int64_t start) {
  for (int64_t t = 0; t < x.dim(0); ++t) {
    auto row = x.row(t);
    for (int64_t h = 0; h < n_heads; ++h) {
      rope_rotate_inplace(row.subspan(static_cast<size_t>(h * head_dim), static_cast<size_t>(head_dim)),
                          start + t);
    }
  }
}

Tensor last_row(const Tensor& x) {
  auto r = x.row(x.dim(0) - 1);
  return Tensor({1, x.dim(1)}, std::vector<float>(r.begin(), r.end()));
}

}  // namespace

int64_t DecoderWeights::element_count() const {
  int64_t n = 0;
  for_each_tensor([&](const Tensor& t) { n += t.size(); });
  return n;
}

DecoderWeights allocate_weights(const ModelConfig& config) {
  require_valid(config);
  const int64_t q_width = config.n_heads * config.head_dim;
  const int64_t kv_width = config.n_kv_heads * config.head_dim;
  DecoderWeights w;
  w.config = config;
  w.token_embedding = Tensor({config.vocab_size, config.dim});
  w.layers.reserve(static_cast<size_t>(config.n_layers));
  for (int64_t l = 0; l < config.n_layers; ++l) {
    w.layers.push_back(LayerWeights{
        .attn_norm_gain = Tensor({config.dim}),
        .wq = Tensor({config.dim, q_width}),
        .wk = Tensor({config.dim, kv_width}),
        .wv = Tensor({config.dim, kv_width}),
        .wo = Tensor({q_width, config.dim}),
        .ffn_norm_gain = Tensor({config.dim}),
        .w1 = Tensor({config.dim, config.hidden_dim}),
        .w2 = Tensor({config.hidden_dim, config.dim}),
        .w3 = Tensor({config.dim, config.hidden_dim}),
    });
  }
  w.final_norm_gain = Tensor({config.dim});
  w.output_proj = Tensor({config.dim, config.vocab_size});
  return w;
}

DecoderWeights init_random(const ModelConfig& config, uint64_t seed) {
  DecoderWeights w = allocate_weights(config);
  std::mt19937_64 engine(seed);
  const float scale = 0.02f / std::sqrt(static_cast<float>(config.n_layers));
  // Norm gains are the only rank-1 tensors.
  w.for_each_tensor([&](Tensor& t) {
    if (t.rank() == 1) {
      fill_uniform(t, engine, 1.0f, 0.5f);
    } else {
      fill_uniform(t, engine, 0.0f, scale);
    }
  });
  return w;
}

std::vector<TokenRange> chunk_prompt(int64_t prompt_len, int64_t window) {
  if (prompt_len < 1) throw std::invalid_argument("chunk_prompt: prompt_len must be >= 1");
  if (window < 1) throw std::invalid_argument("chunk_prompt: window must be >= 1");
  std::vector<TokenRange> chunks;
  for (int64_t start = 0; start < prompt_len; start += window) {
    chunks.push_back({start, std::min(start + window, prompt_len)});
  }
  return chunks;
}

GenerationSession::GenerationSession(std::shared_ptr<const DecoderWeights> weights)
    : weights_(std::move(weights)) {
  if (!weights_) throw std::invalid_argument("GenerationSession: null weights");
  caches_.reserve(static_cast<size_t>(config().n_layers));
  for (int64_t l = 0; l < config().n_layers; ++l) caches_.push_back(RollingKvCache::for_config(config()));
}

int64_t GenerationSession::cache_bytes() const {
  int64_t bytes = 0;
  for (const auto& c : caches_) bytes += c.allocated_bytes();
  return bytes;
}

Tensor GenerationSession::embed(std::span<const int32_t> tokens) const {
  const ModelConfig& cfg = config();
  Tensor x({static_cast<int64_t>(tokens.size()), cfg.dim});
  for (size_t t = 0; t < tokens.size(); ++t) {
    const int32_t id = tokens[t];
    if (id < 0 || id >= cfg.vocab_size) {
      throw std::out_of_range("invalid token id " + std::to_string(id) + " (vocab_size " +
                              std::to_string(cfg.vocab_size) + ")");
    }
    auto src = weights_->token_embedding.row(id);
    std::copy(src.begin(), src.end(), x.row(static_cast<int64_t>(t)).begin());
  }
  return x;
}

Tensor GenerationSession::run_layers(Tensor x, int64_t start, bool prefill_chunk) {
  const ModelConfig& cfg = config();
  const auto grouping = HeadGrouping::make(cfg.n_heads, cfg.n_kv_heads);
  const int64_t n = x.dim(0);

  for (int64_t l = 0; l < cfg.n_layers; ++l) {
    const LayerWeights& lw = weights_->layers[static_cast<size_t>(l)];
    RollingKvCache& cache = caches_[static_cast<size_t>(l)];

    const Tensor xn = rms_norm(x, lw.attn_norm_gain);
    Tensor q = matmul(xn, lw.wq);
    Tensor k = matmul(xn, lw.wk);
    const Tensor v = matmul(xn, lw.wv);
    rotate_rows(q, cfg.n_heads, cfg.head_dim, start);
    rotate_rows(k, cfg.n_kv_heads, cfg.head_dim, start);

    Tensor attended;
    if (!prefill_chunk) {
      // Decode: the token's own K/V goes in first, so the window includes it.
      cache.append(start, k, v);
      const CacheWindow window = cache.window_view();
      const AttentionMask mask = build_swa_mask({start}, window.positions, cfg.window_size);
      peak_score_entries_ = std::max(peak_score_entries_, mask.n_queries() * mask.n_keys());
      attended = gqa_attend(split_heads(q, cfg.n_heads), window.keys, window.values, mask, grouping);
    } else {
      Tensor keys = split_heads(k, cfg.n_kv_heads);
      Tensor values = split_heads(v, cfg.n_kv_heads);
      std::vector<int64_t> cached_positions;
      if (cache.filled() > 0) {
        CacheWindow window = cache.window_view();
        cached_positions = std::move(window.positions);
        keys = concat_tokens(window.keys, keys);
        values = concat_tokens(window.values, values);
      }
      const AttentionMask mask = build_prefill_mask(start, n, cached_positions, cfg.window_size);
      peak_score_entries_ = std::max(peak_score_entries_, mask.n_queries() * mask.n_keys());
      attended = gqa_attend(split_heads(q, cfg.n_heads), keys, values, mask, grouping);
      cache.prefill_bulk(start, k, v);
    }

    const Tensor h = add(x, matmul(merge_heads(attended), lw.wo));
    const Tensor hn = rms_norm(h, lw.ffn_norm_gain);
    const Tensor gated = silu_gate(matmul(hn, lw.w1), matmul(hn, lw.w3));
    x = add(h, matmul(gated, lw.w2));
  }
  return x;
}

Tensor GenerationSession::logits_for_last(const Tensor& x) const {
  const Tensor normed = rms_norm(last_row(x), weights_->final_norm_gain);
  return matmul(normed, weights_->output_proj).reshaped({config().vocab_size});
}

Tensor GenerationSession::forward_decode(int32_t token) {
  if (next_position_ >= config().context_len) {
    throw std::out_of_range("forward_decode: position " + std::to_string(next_position_) +
                            " exceeds context_len " + std::to_string(config().context_len));
  }
  const int32_t tokens[] = {token};
  Tensor x = run_layers(embed(tokens), next_position_, /*prefill_chunk=*/false);
  ++next_position_;
  return logits_for_last(x);
}

Tensor GenerationSession::prefill(std::span<const int32_t> prompt) {
  if (next_position_ != 0) throw std::logic_error("prefill: session is not fresh");
  if (prompt.empty()) throw std::invalid_argument("prefill: empty prompt");
  if (static_cast<int64_t>(prompt.size()) > config().context_len) {
    throw std::out_of_range("prefill: prompt of " + std::to_string(prompt.size()) +
                            " tokens exceeds context_len " + std::to_string(config().context_len));
  }
  // Validate every id before any cache is touched.
  const Tensor embedded = embed(prompt);
  Tensor last;
  for (const TokenRange& chunk : chunk_prompt(static_cast<int64_t>(prompt.size()), config().window_size)) {
    Tensor x({chunk.size(), config().dim});
    for (int64_t t = 0; t < chunk.size(); ++t) {
      auto src = embedded.row(chunk.start + t);
      std::copy(src.begin(), src.end(), x.row(t).begin());
    }
    last = run_layers(std::move(x), chunk.start, /*prefill_chunk=*/true);
    next_position_ = chunk.end;
  }
  return logits_for_last(last);
}

int32_t argmax_lowest(std::span<const float> logits) {
  if (logits.empty()) throw std::invalid_argument("argmax: empty logits");
  size_t best = 0;
  for (size_t i = 1; i < logits.size(); ++i) {
    if (logits[i] > logits[best]) best = i;
  }
  return static_cast<int32_t>(best);
}

TokenSampler::TokenSampler(const SamplerSpec& spec, int64_t vocab_size)
    : spec_(spec), engine_(spec.seed) {
  if (spec_.mode == SamplerSpec::Mode::kTopK) {
    if (spec_.k < 1 || spec_.k > vocab_size) {
      throw std::invalid_argument("top-k sampler: k must be in [1, " + std::to_string(vocab_size) +
                                  "], got " + std::to_string(spec_.k));
    }
    if (!(spec_.temperature > 0.0f) || !std::isfinite(spec_.temperature)) {
      throw std::invalid_argument("top-k sampler: temperature must be > 0");
    }
  }
}

int32_t TokenSampler::pick(const Tensor& logits) {
  const auto row = logits.data();
  if (spec_.mode == SamplerSpec::Mode::kGreedy) return argmax_lowest(row);

  std::vector<int32_t> ids(row.size());
  std::iota(ids.begin(), ids.end(), 0);
  const auto k = static_cast<size_t>(spec_.k);
  std::partial_sort(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(k), ids.end(),
                    [&](int32_t a, int32_t b) { return row[a] > row[b] || (row[a] == row[b] && a < b); });
  ids.resize(k);

  std::vector<double> weights(k);
  const double top = row[ids.front()];
  double total = 0.0;
  for (size_t i = 0; i < k; ++i) {
    weights[i] = std::exp((row[ids[i]] - top) / static_cast<double>(spec_.temperature));
    total += weights[i];
  }
  const double u = unit_uniform(engine_) * total;
  double acc = 0.0;
  for (size_t i = 0; i < k; ++i) {
    acc += weights[i];
    if (u < acc) return ids[i];
  }
  return ids.back();
}

GenerationResult generate(GenerationSession& session, std::span<const int32_t> prompt,
                          int64_t max_tokens, const SamplerSpec& sampler_spec) {
  if (prompt.empty()) throw std::invalid_argument("generate: prompt must be non-empty");
  if (max_tokens < 0) throw std::invalid_argument("generate: max_tokens must be >= 0");
  const ModelConfig& cfg = session.config();
  TokenSampler sampler(sampler_spec, cfg.vocab_size);
  using Clock = std::chrono::steady_clock;

  GenerationResult result;
  const auto prompt_len = static_cast<int64_t>(prompt.size());
  const auto t0 = Clock::now();
  Tensor logits = session.prefill(prompt);
  const auto t1 = Clock::now();

  while (static_cast<int64_t>(result.tokens.size()) < max_tokens) {
    if (prompt_len + static_cast<int64_t>(result.tokens.size()) >= cfg.context_len) {
      result.truncated = true;
      break;
    }
    const int32_t next = sampler.pick(logits);
    result.tokens.push_back(next);
    if (static_cast<int64_t>(result.tokens.size()) < max_tokens &&
        session.next_position() < cfg.context_len) {
      logits = session.forward_decode(next);
    }
  }
  const auto t2 = Clock::now();

  GenerationStats& s = result.stats;
  s.prompt_tokens = prompt_len;
  s.tokens_generated = static_cast<int64_t>(result.tokens.size());
  s.prefill_seconds = std::chrono::duration<double>(t1 - t0).count();
  s.decode_seconds = std::chrono::duration<double>(t2 - t1).count();
  s.tokens_per_second = s.decode_seconds > 0.0 ? static_cast<double>(s.tokens_generated) / s.decode_seconds : 0.0;
  s.cache_bytes = session.cache_bytes();
  const int64_t total_len = prompt_len + s.tokens_generated;
  s.swa_score_pairs = score_pair_count(total_len, cfg.window_size);
  s.full_score_pairs = full_pair_count(total_len);
  return result;
}

}  // namespace swa
