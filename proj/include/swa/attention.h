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
#include <vector>

#include "swa/tensor.h"

namespace swa {

// Per-(query, key) admissibility over absolute token positions.
struct AttentionMask {
  std::vector<int64_t> query_positions;
  std::vector<int64_t> key_positions;
  std::vector<uint8_t> admissible;  // row-major [n_queries x n_keys]

  int64_t n_queries() const { return static_cast<int64_t>(query_positions.size()); }
  int64_t n_keys() const { return static_cast<int64_t>(key_positions.size()); }
  bool allows(int64_t q, int64_t k) const {
    return admissible[static_cast<size_t>(q * n_keys() + k)] != 0;
  }
  int64_t admissible_count() const;
};

struct HeadGrouping {
  int64_t n_heads = 0;
  int64_t n_kv_heads = 0;
  int64_t group_size = 0;

  static HeadGrouping make(int64_t n_heads, int64_t n_kv_heads);
  int64_t kv_head_for(int64_t query_head) const { return query_head / group_size; }
};

// A key is admissible iff 0 <= query - key <= window - 1.
AttentionMask build_swa_mask(const std::vector<int64_t>& query_positions,
                             const std::vector<int64_t>& key_positions, int64_t window);

// Mask for one pre-fill chunk: keys are cache_positions followed by the
// chunk's own positions [chunk_start, chunk_start + chunk_len).
AttentionMask build_prefill_mask(int64_t chunk_start, int64_t chunk_len,
                                 const std::vector<int64_t>& cache_positions, int64_t window);

// Scaled dot-product attention with grouped KV heads.
//   q: [n_heads x n_q x head_dim], k, v: [n_kv_heads x n_k x head_dim]
// Keys must be ordered by ascending position; masked keys are skipped
// entirely, so the summation order only depends on the admissible set.
Tensor gqa_attend(const Tensor& q, const Tensor& k, const Tensor& v, const AttentionMask& mask,
                  const HeadGrouping& grouping);

// [n x heads*head_dim] <-> [heads x n x head_dim]
Tensor split_heads(const Tensor& x, int64_t n_heads);
Tensor merge_heads(const Tensor& x);
// Concatenates two [heads x n_i x head_dim] tensors along the token axis.
Tensor concat_tokens(const Tensor& a, const Tensor& b);

// Admissible (query, key) pairs over a length-L sequence.
int64_t score_pair_count(int64_t seq_len, int64_t window);  // sum_i min(i+1, W)
int64_t full_pair_count(int64_t seq_len);                   // L(L+1)/2

}  // namespace swa
