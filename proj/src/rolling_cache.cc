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

#include "swa/rolling_cache.h"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace swa {

RollingKvCache::RollingKvCache(int64_t capacity, int64_t n_kv_heads, int64_t head_dim)
    : capacity_(capacity),
      n_kv_heads_(n_kv_heads),
      head_dim_(head_dim),
      keys_({n_kv_heads, capacity, head_dim}),
      values_({n_kv_heads, capacity, head_dim}) {}

RollingKvCache RollingKvCache::for_config(const ModelConfig& config) {
  require_valid(config);
  return RollingKvCache(config.window_size, config.n_kv_heads, config.head_dim);
}

void RollingKvCache::write_slot(int64_t position, std::span<const float> k_row,
                                std::span<const float> v_row) {
  const int64_t slot = slot_of(position);
  for (int64_t h = 0; h < n_kv_heads_; ++h) {
    const int64_t dst = (h * capacity_ + slot) * head_dim_;
    const int64_t src = h * head_dim_;
    for (int64_t d = 0; d < head_dim_; ++d) {
      keys_[dst + d] = k_row[src + d];
      values_[dst + d] = v_row[src + d];
    }
  }
}

void RollingKvCache::append(int64_t position, const Tensor& k_row, const Tensor& v_row) {
  if (position != next_position_) {
    throw std::invalid_argument("rolling cache: out-of-order write, expected position " +
                                std::to_string(next_position_) + ", got " + std::to_string(position));
  }
  const int64_t row_floats = n_kv_heads_ * head_dim_;
  if (k_row.size() != row_floats || v_row.size() != row_floats) {
    throw std::invalid_argument("rolling cache: k/v rows must hold " + std::to_string(row_floats) +
                                " floats, got " + shape_string(k_row.shape()) + " / " +
                                shape_string(v_row.shape()));
  }
  write_slot(position, k_row.data(), v_row.data());
  ++next_position_;
}

void RollingKvCache::prefill_bulk(int64_t start_position, const Tensor& k_block,
                                  const Tensor& v_block) {
  if (start_position != next_position_) {
    throw std::invalid_argument("rolling cache: out-of-order bulk write, expected start " +
                                std::to_string(next_position_) + ", got " +
                                std::to_string(start_position));
  }
  const int64_t row_floats = n_kv_heads_ * head_dim_;
  if (k_block.shape() != v_block.shape() || k_block.size() % row_floats != 0) {
    throw std::invalid_argument("rolling cache: bulk k/v blocks " + shape_string(k_block.shape()) +
                                " / " + shape_string(v_block.shape()) + " are not whole rows");
  }
  const int64_t n = k_block.size() / row_floats;
  // Rows that would be overwritten within this block are never written.
  const int64_t first = std::max<int64_t>(0, n - capacity_);
  for (int64_t t = first; t < n; ++t) {
    const auto offset = static_cast<size_t>(t * row_floats);
    const auto count = static_cast<size_t>(row_floats);
    write_slot(start_position + t, k_block.data().subspan(offset, count),
               v_block.data().subspan(offset, count));
  }
  next_position_ += n;
}

std::vector<int64_t> RollingKvCache::retained_positions() const {
  std::vector<int64_t> positions;
  for (int64_t p = oldest_retained(); p < next_position_; ++p) positions.push_back(p);
  return positions;
}

CacheWindow RollingKvCache::window_view() const {
  if (filled() == 0) throw std::logic_error("rolling cache: window_view on an empty cache");
  const int64_t n = filled();
  CacheWindow window{retained_positions(), Tensor({n_kv_heads_, n, head_dim_}),
                     Tensor({n_kv_heads_, n, head_dim_})};
  for (int64_t h = 0; h < n_kv_heads_; ++h) {
    for (int64_t t = 0; t < n; ++t) {
      const int64_t src = (h * capacity_ + slot_of(window.positions[t])) * head_dim_;
      const int64_t dst = (h * n + t) * head_dim_;
      for (int64_t d = 0; d < head_dim_; ++d) {
        window.keys[dst + d] = keys_[src + d];
        window.values[dst + d] = values_[src + d];
      }
    }
  }
  return window;
}

}  // namespace swa
