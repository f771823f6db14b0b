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

#include "swa/tensor.h"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace swa {
namespace {

int64_t element_count(const std::vector<int64_t>& shape) {
  if (shape.empty()) throw std::invalid_argument("tensor shape must have at least one axis");
  int64_t n = 1;
  for (int64_t d : shape) {
    if (d < 1) throw std::invalid_argument("tensor dimensions must be >= 1, got " + shape_string(shape));
    n *= d;
  }
  return n;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_string(a.shape()) +
                                " vs " + shape_string(b.shape()));
  }
}

}  // namespace

Tensor::Tensor(std::vector<int64_t> shape)
    : shape_(std::move(shape)), data_(static_cast<size_t>(element_count(shape_)), 0.0f) {}

Tensor::Tensor(std::vector<int64_t> shape, std::vector<float> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (static_cast<int64_t>(data_.size()) != element_count(shape_)) {
    throw std::invalid_argument("tensor data length " + std::to_string(data_.size()) +
                                " does not match shape " + shape_string(shape_));
  }
}

Tensor Tensor::from_rows(const std::vector<std::vector<float>>& rows) {
  if (rows.empty()) throw std::invalid_argument("from_rows: no rows");
  const size_t width = rows.front().size();
  std::vector<float> flat;
  flat.reserve(rows.size() * width);
  for (const auto& r : rows) {
    if (r.size() != width) throw std::invalid_argument("from_rows: ragged rows");
    flat.insert(flat.end(), r.begin(), r.end());
  }
  return Tensor({static_cast<int64_t>(rows.size()), static_cast<int64_t>(width)}, std::move(flat));
}

int64_t Tensor::dim(int64_t axis) const {
  if (axis < 0) axis += rank();
  if (axis < 0 || axis >= rank()) throw std::out_of_range("tensor axis out of range");
  return shape_[static_cast<size_t>(axis)];
}

std::span<float> Tensor::row(int64_t r) {
  return std::span<float>(data_).subspan(static_cast<size_t>(r * cols()), static_cast<size_t>(cols()));
}

std::span<const float> Tensor::row(int64_t r) const {
  return std::span<const float>(data_).subspan(static_cast<size_t>(r * cols()),
                                               static_cast<size_t>(cols()));
}

float& Tensor::at(int64_t r, int64_t c) { return data_[static_cast<size_t>(r * cols() + c)]; }
float Tensor::at(int64_t r, int64_t c) const { return data_[static_cast<size_t>(r * cols() + c)]; }

Tensor Tensor::reshaped(std::vector<int64_t> shape) const { return Tensor(std::move(shape), data_); }

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](float v) { return std::isfinite(v); });
}

std::string shape_string(const std::vector<int64_t>& shape) {
  std::ostringstream s;
  s << '[';
  for (size_t i = 0; i < shape.size(); ++i) s << (i ? "x" : "") << shape[i];
  s << ']';
  return s.str();
}

float max_abs_diff(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "max_abs_diff");
  float worst = 0.0f;
  for (int64_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw std::invalid_argument("matmul: shape mismatch " + shape_string(a.shape()) + " x " +
                                shape_string(b.shape()));
  }
  const int64_t m = a.dim(0), n = a.dim(1), p = b.dim(1);
  Tensor c({m, p});
  // i-k-j order: c[i][j] still accumulates a[i][k]*b[k][j] for k = 0..n-1 in order.
  for (int64_t i = 0; i < m; ++i) {
    float* out = &c[i * p];
    for (int64_t k = 0; k < n; ++k) {
      const float aik = a[i * n + k];
      const float* brow = &b[k * p];
      for (int64_t j = 0; j < p; ++j) out[j] += aik * brow[j];
    }
  }
  return c;
}

void softmax_row(std::span<const float> x, std::span<const uint8_t> admissible,
                 std::span<float> out) {
  const size_t n = x.size();
  float peak = 0.0f;
  bool any = false;
  for (size_t i = 0; i < n; ++i) {
    if (!admissible[i]) continue;
    peak = any ? std::max(peak, x[i]) : x[i];
    any = true;
  }
  if (!any) throw std::domain_error("degenerate attention row");
  float total = 0.0f;
  for (size_t i = 0; i < n; ++i) {
    out[i] = admissible[i] ? std::exp(x[i] - peak) : 0.0f;
    total += out[i];
  }
  for (size_t i = 0; i < n; ++i) out[i] = admissible[i] ? out[i] / total : 0.0f;
}

Tensor softmax_stable(const Tensor& x, const std::vector<uint8_t>& admissible) {
  if (static_cast<int64_t>(admissible.size()) != x.size()) {
    throw std::invalid_argument("softmax_stable: mask has " + std::to_string(admissible.size()) +
                                " entries for tensor " + shape_string(x.shape()));
  }
  Tensor y(x.shape());
  const auto n = static_cast<size_t>(x.cols());
  for (int64_t r = 0; r < x.rows(); ++r) {
    softmax_row(x.row(r), std::span<const uint8_t>(admissible).subspan(static_cast<size_t>(r) * n, n),
                y.row(r));
  }
  return y;
}

Tensor softmax_stable(const Tensor& x) {
  return softmax_stable(x, std::vector<uint8_t>(static_cast<size_t>(x.size()), 1));
}

Tensor rms_norm(const Tensor& x, const Tensor& gain, float eps) {
  if (gain.rank() != 1 || gain.dim(0) != x.cols()) {
    throw std::invalid_argument("rms_norm: shape mismatch " + shape_string(x.shape()) + " vs gain " +
                                shape_string(gain.shape()));
  }
  if (!(eps > 0.0f)) throw std::invalid_argument("rms_norm: eps must be > 0");
  Tensor y(x.shape());
  const int64_t n = x.cols();
  for (int64_t r = 0; r < x.rows(); ++r) {
    auto in = x.row(r);
    auto out = y.row(r);
    float sum_sq = 0.0f;
    for (float v : in) sum_sq += v * v;
    const float inv = 1.0f / std::sqrt(sum_sq / static_cast<float>(n) + eps);
    for (int64_t i = 0; i < n; ++i) out[i] = in[i] * inv * gain[i];
  }
  return y;
}

void rope_rotate_inplace(std::span<float> head, int64_t position, float theta_base) {
  const auto head_dim = static_cast<int64_t>(head.size());
  if (head_dim % 2 != 0) throw std::invalid_argument("rope: head_dim must be even, got " + std::to_string(head_dim));
  if (position < 0) throw std::invalid_argument("rope: position must be >= 0");
  for (int64_t j = 0; j < head_dim / 2; ++j) {
    const double freq = std::pow(static_cast<double>(theta_base),
                                 -2.0 * static_cast<double>(j) / static_cast<double>(head_dim));
    const double angle = static_cast<double>(position) * freq;
    const auto c = static_cast<float>(std::cos(angle));
    const auto s = static_cast<float>(std::sin(angle));
    const float x0 = head[2 * j];
    const float x1 = head[2 * j + 1];
    head[2 * j] = x0 * c - x1 * s;
    head[2 * j + 1] = x0 * s + x1 * c;
  }
}

Tensor rope_apply(const Tensor& x, int64_t position, float theta_base) {
  if (x.cols() % 2 != 0) {
    throw std::invalid_argument("rope: head_dim must be even, got " + std::to_string(x.cols()));
  }
  Tensor y = x;
  if (position == 0) return y;
  for (int64_t r = 0; r < y.rows(); ++r) rope_rotate_inplace(y.row(r), position, theta_base);
  return y;
}

Tensor silu_gate(const Tensor& x1, const Tensor& x3) {
  require_same_shape(x1, x3, "silu_gate");
  Tensor y(x1.shape());
  for (int64_t i = 0; i < x1.size(); ++i) {
    const float t = x1[i];
    y[i] = t / (1.0f + std::exp(-t)) * x3[i];
  }
  return y;
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  Tensor y(a.shape());
  for (int64_t i = 0; i < a.size(); ++i) y[i] = a[i] + b[i];
  return y;
}

}  // namespace swa
