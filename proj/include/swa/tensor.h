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
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace swa {

// Dense row-major float32 array. Operations below never mutate their inputs.
class Tensor {
 public:
  Tensor() = default;
  // Zero-filled tensor. Every dimension must be >= 1.
  explicit Tensor(std::vector<int64_t> shape);
  Tensor(std::vector<int64_t> shape, std::vector<float> data);

  static Tensor from_rows(const std::vector<std::vector<float>>& rows);

  const std::vector<int64_t>& shape() const { return shape_; }
  int64_t rank() const { return static_cast<int64_t>(shape_.size()); }
  int64_t dim(int64_t axis) const;
  int64_t size() const { return static_cast<int64_t>(data_.size()); }
  // Size of the trailing axis.
  int64_t cols() const { return shape_.empty() ? 0 : shape_.back(); }
  // Product of all but the trailing axis.
  int64_t rows() const { return cols() == 0 ? 0 : size() / cols(); }

  std::span<float> data() { return data_; }
  std::span<const float> data() const { return data_; }
  std::span<float> row(int64_t r);
  std::span<const float> row(int64_t r) const;

  float& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
  const float& operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }
  // 2-D access.
  float& at(int64_t r, int64_t c);
  float at(int64_t r, int64_t c) const;

  Tensor reshaped(std::vector<int64_t> shape) const;
  bool all_finite() const;

  bool operator==(const Tensor& other) const = default;

 private:
  std::vector<int64_t> shape_;
  std::vector<float> data_;
};

std::string shape_string(const std::vector<int64_t>& shape);
float max_abs_diff(const Tensor& a, const Tensor& b);

inline constexpr float kRopeThetaBase = 10000.0f;
inline constexpr float kRmsNormEps = 1e-5f;

// [m x n] * [n x p]. Each output element accumulates its dot product with k
// ascending, so row results do not depend on how many rows are batched.
Tensor matmul(const Tensor& a, const Tensor& b);

// Masked softmax over the trailing axis. `admissible` has one flag per element
// of `x`; masked entries are excluded from max and sum and come out as 0.
// Throws std::domain_error("degenerate attention row") for an all-masked row.
Tensor softmax_stable(const Tensor& x, const std::vector<uint8_t>& admissible);
Tensor softmax_stable(const Tensor& x);
// Row kernel used by attention. `out` receives the normalized weights.
void softmax_row(std::span<const float> x, std::span<const uint8_t> admissible,
                 std::span<float> out);

Tensor rms_norm(const Tensor& x, const Tensor& gain, float eps = kRmsNormEps);

// Rotates pairs (x[2j], x[2j+1]) of every trailing-axis slice by
// position * theta_base^(-2j / head_dim).
Tensor rope_apply(const Tensor& x, int64_t position, float theta_base = kRopeThetaBase);
void rope_rotate_inplace(std::span<float> head, int64_t position,
                         float theta_base = kRopeThetaBase);

// silu(x1) * x3, elementwise.
Tensor silu_gate(const Tensor& x1, const Tensor& x3);

Tensor add(const Tensor& a, const Tensor& b);

}  // namespace swa
