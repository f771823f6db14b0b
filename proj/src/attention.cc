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

#include "swa/attention.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace swa {

int64_t AttentionMask::admissible_count() const {
  int64_t n = 0;
  for (uint8_t a : admissible) n += a;
  return n;
}

HeadGrouping HeadGrouping::make(int64_t n_heads, int64_t n_kv_heads) {
  if (n_heads < 1 || n_kv_heads < 1 || n_heads % n_kv_heads != 0) {
    throw std::invalid_argument("head grouping: n_heads " + std::to_string(n_heads) +
                                " is not a multiple of n_kv_heads " + std::to_string(n_kv_heads));
  }
  return HeadGrouping{n_heads, n_kv_heads, n_heads / n_kv_heads};
}

AttentionMask build_swa_mask(const std::vector<int64_t>& query_positions,
                             const std::vector<int64_t>& key_positions, int64_t window) {
  if (window < 1) throw std::invalid_argument("build_swa_mask: window must be >= 1");
  AttentionMask mask{query_positions, key_positions, {}};
  mask.admissible.resize(query_positions.size() * key_positions.size());
  size_t idx = 0;
  for (int64_t qp : query_positions) {
    if (qp < 0) throw std::invalid_argument("build_swa_mask: negative query position");
    for (int64_t kp : key_positions) {
      const int64_t distance = qp - kp;
      mask.admissible[idx++] = (distance >= 0 && distance <= window - 1) ? 1 : 0;
    }
  }
  return mask;
}

AttentionMask build_prefill_mask(int64_t chunk_start, int64_t chunk_len,
                                 const std::vector<int64_t>& cache_positions, int64_t window) {
  if (chunk_len < 1) throw std::invalid_argument("build_prefill_mask: chunk_len must be >= 1");
  for (int64_t p : cache_positions) {
    if (p >= chunk_start) {
      throw std::invalid_argument("build_prefill_mask: cache position " + std::to_string(p) +
                                  " is not before chunk start " + std::to_string(chunk_start));
    }
  }
  std::vector<int64_t> queries(static_cast<size_t>(chunk_len));
  for (int64_t i = 0; i < chunk_len; ++i) queries[static_cast<size_t>(i)] = chunk_start + i;
  std::vector<int64_t> keys = cache_positions;
  keys.insert(keys.end(), queries.begin(), queries.end());
  return build_swa_mask(queries, keys, window);
}

Tensor gqa_attend(const Tensor& q, const Tensor& k, const Tensor& v, const AttentionMask& mask,
                  const HeadGrouping& grouping) {
  if (q.rank() != 3 || k.rank() != 3 || k.shape() != v.shape()) {
    throw std::invalid_argument("gqa_attend: expected rank-3 q/k/v with k, v alike, got " +
                                shape_string(q.shape()) + ", " + shape_string(k.shape()) + ", " +
                                shape_string(v.shape()));
  }
  const int64_t n_heads = q.dim(0), n_q = q.dim(1), head_dim = q.dim(2);
  const int64_t n_k = k.dim(1);
  if (n_heads != grouping.n_heads || k.dim(0) != grouping.n_kv_heads || k.dim(2) != head_dim) {
    throw std::invalid_argument("gqa_attend: shapes " + shape_string(q.shape()) + " / " +
                                shape_string(k.shape()) + " inconsistent with head grouping");
  }
  if (mask.n_queries() != n_q || mask.n_keys() != n_k) {
    throw std::invalid_argument("gqa_attend: mask is " + std::to_string(mask.n_queries()) + "x" +
                                std::to_string(mask.n_keys()) + " but attention is " +
                                std::to_string(n_q) + "x" + std::to_string(n_k));
  }
  for (int64_t j = 1; j < n_k; ++j) {
    if (mask.key_positions[j] <= mask.key_positions[j - 1]) {
      throw std::invalid_argument("gqa_attend: key positions must be strictly ascending");
    }
  }

  const float scale = 1.0f / std::sqrt(static_cast<float>(head_dim));
  Tensor out({n_heads, n_q, head_dim});
  std::vector<float> scores(static_cast<size_t>(n_k));
  std::vector<float> weights(static_cast<size_t>(n_k));
  const std::span<const uint8_t> admissible(mask.admissible);

  for (int64_t h = 0; h < n_heads; ++h) {
    const int64_t g = grouping.kv_head_for(h);
    const float* kh = &k[g * n_k * head_dim];
    const float* vh = &v[g * n_k * head_dim];
    for (int64_t i = 0; i < n_q; ++i) {
      const float* qi = &q[(h * n_q + i) * head_dim];
      const auto row_mask = admissible.subspan(static_cast<size_t>(i * n_k), static_cast<size_t>(n_k));
      for (int64_t j = 0; j < n_k; ++j) {
        if (!row_mask[j]) {
          scores[j] = 0.0f;
          continue;
        }
        float dot = 0.0f;
        for (int64_t d = 0; d < head_dim; ++d) dot += qi[d] * kh[j * head_dim + d];
        scores[j] = dot * scale;
      }
      softmax_row(scores, row_mask, weights);
      float* oi = &out[(h * n_q + i) * head_dim];
      for (int64_t j = 0; j < n_k; ++j) {
        if (!row_mask[j]) continue;
        const float w = weights[j];
        for (int64_t d = 0; d < head_dim; ++d) oi[d] += w * vh[j * head_dim + d];
      }
    }
  }
  return out;
}

Tensor split_heads(const Tensor& x, int64_t n_heads) {
  if (x.rank() != 2 || x.dim(1) % n_heads != 0) {
    throw std::invalid_argument("split_heads: cannot split " + shape_string(x.shape()) + " into " +
                                std::to_string(n_heads) + " heads");
  }
  const int64_t n = x.dim(0), head_dim = x.dim(1) / n_heads;
  Tensor y({n_heads, n, head_dim});
  for (int64_t t = 0; t < n; ++t)
    for (int64_t h = 0; h < n_heads; ++h)
      for (int64_t d = 0; d < head_dim; ++d)
        y[(h * n + t) * head_dim + d] = x[t * n_heads * head_dim + h * head_dim + d];
  return y;
}

Tensor merge_heads(const Tensor& x) {
  if (x.rank() != 3) throw std::invalid_argument("merge_heads: expected rank 3, got " + shape_string(x.shape()));
  const int64_t n_heads = x.dim(0), n = x.dim(1), head_dim = x.dim(2);
  Tensor y({n, n_heads * head_dim});
  for (int64_t h = 0; h < n_heads; ++h)
    for (int64_t t = 0; t < n; ++t)
      for (int64_t d = 0; d < head_dim; ++d)
        y[t * n_heads * head_dim + h * head_dim + d] = x[(h * n + t) * head_dim + d];
  return y;
}

Tensor concat_tokens(const Tensor& a, const Tensor& b) {
  if (a.rank() != 3 || b.rank() != 3 || a.dim(0) != b.dim(0) || a.dim(2) != b.dim(2)) {
    throw std::invalid_argument("concat_tokens: incompatible " + shape_string(a.shape()) + " and " +
                                shape_string(b.shape()));
  }
  const int64_t heads = a.dim(0), na = a.dim(1), nb = b.dim(1), head_dim = a.dim(2);
  Tensor y({heads, na + nb, head_dim});
  for (int64_t h = 0; h < heads; ++h) {
    auto dst = y.data().subspan(static_cast<size_t>(h * (na + nb) * head_dim));
    auto src_a = a.data().subspan(static_cast<size_t>(h * na * head_dim), static_cast<size_t>(na * head_dim));
    auto src_b = b.data().subspan(static_cast<size_t>(h * nb * head_dim), static_cast<size_t>(nb * head_dim));
    std::copy(src_a.begin(), src_a.end(), dst.begin());
    std::copy(src_b.begin(), src_b.end(), dst.begin() + static_cast<std::ptrdiff_t>(na * head_dim));
  }
  return y;
}

int64_t score_pair_count(int64_t seq_len, int64_t window) {
  if (seq_len < 1 || window < 1) throw std::invalid_argument("score_pair_count: L and W must be >= 1");
  const int64_t ramp = std::min(seq_len, window);
  // Positions 0..ramp-1 see i+1 keys; the rest see exactly W.
  return ramp * (ramp + 1) / 2 + (seq_len - ramp) * window;
}

int64_t full_pair_count(int64_t seq_len) {
  if (seq_len < 1) throw std::invalid_argument("full_pair_count: L must be >= 1");
  return seq_len * (seq_len + 1) / 2;
}

}  // namespace swa
