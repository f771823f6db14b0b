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

#include <algorithm>
#include <cstdint>
#include <vector>

#include "swa/config.h"
#include "swa/tensor.h"

namespace swa {

// Retained cache entries in ascending position order, gathered head-major so
// they can be fed straight into gqa_attend.
struct CacheWindow {
  std::vector<int64_t> positions;
  Tensor keys;    // [n_kv_heads x n x head_dim]
  Tensor values;  // [n_kv_heads x n x head_dim]

  int64_t size() const { return static_cast<int64_t>(positions.size()); }
};

// Fixed-capacity key/value store for one layer. The entry for absolute
// position i lives in slot i mod W; writes must arrive strictly in order.
class RollingKvCache {
 public:
  RollingKvCache(int64_t capacity, int64_t n_kv_heads, int64_t head_dim);
  static RollingKvCache for_config(const ModelConfig& config);

  int64_t capacity() const { return capacity_; }
  int64_t n_kv_heads() const { return n_kv_heads_; }
  int64_t head_dim() const { return head_dim_; }
  int64_t next_position() const { return next_position_; }
  int64_t filled() const { return std::min(next_position_, capacity_); }
  int64_t oldest_retained() const { return next_position_ - filled(); }
  int64_t slot_of(int64_t position) const { return position % capacity_; }

  // k_row, v_row: [n_kv_heads x head_dim] (or any shape with that many floats).
  void append(int64_t position, const Tensor& k_row, const Tensor& v_row);
  // k_block, v_block: [n x n_kv_heads x head_dim] token-major rows, equivalent
  // to n appends starting at start_position.
  void prefill_bulk(int64_t start_position, const Tensor& k_block, const Tensor& v_block);

  // Throws std::logic_error on an empty cache.
  CacheWindow window_view() const;
  std::vector<int64_t> retained_positions() const;

  // Floats allocated for keys and values together; fixed at construction.
  int64_t allocated_floats() const { return keys_.size() + values_.size(); }
  int64_t allocated_bytes() const { return allocated_floats() * static_cast<int64_t>(sizeof(float)); }

  // Raw slot storage, [n_kv_heads x W x head_dim].
  const Tensor& raw_keys() const { return keys_; }
  const Tensor& raw_values() const { return values_; }

  bool operator==(const RollingKvCache&) const = default;

 private:
  void write_slot(int64_t position, std::span<const float> k_row, std::span<const float> v_row);

  int64_t capacity_;
  int64_t n_kv_heads_;
  int64_t head_dim_;
  int64_t next_position_ = 0;
  Tensor keys_;
  Tensor values_;
};

}  // namespace swa
