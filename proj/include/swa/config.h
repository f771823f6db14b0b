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
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace swa {

// Decoder hyperparameters. Field names follow the external JSON document.
struct ModelConfig {
  int64_t dim = 0;
  int64_t n_layers = 0;
  int64_t head_dim = 0;
  int64_t hidden_dim = 0;
  int64_t n_heads = 0;
  int64_t n_kv_heads = 0;
  int64_t window_size = 0;
  int64_t context_len = 0;
  int64_t vocab_size = 0;

  bool operator==(const ModelConfig&) const = default;

  // The published 7B architecture.
  static ModelConfig preset_7b();
  // Desk-scale configuration used by the equivalence suites.
  static ModelConfig toy();
};

// Thrown by parse_config. `key()` names the offending field (empty when the
// document itself is malformed).
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, const std::string& what)
      : std::runtime_error(what), key_(std::move(key)) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

// Rule names reported by validate().
inline constexpr std::string_view kRuleHeadsTimesHeadDim = "dim == n_heads*head_dim";
inline constexpr std::string_view kRuleHeadsDivisible = "n_heads % n_kv_heads == 0";
inline constexpr std::string_view kRuleKvHeadsPositive = "n_kv_heads >= 1";
inline constexpr std::string_view kRuleWindowRange = "1 <= window_size <= context_len";

// Returns the names of all violated invariants; empty means the config is valid.
std::vector<std::string> validate(const ModelConfig& config);

// Throws std::invalid_argument listing every violation.
void require_valid(const ModelConfig& config);

// Parses the nine-key JSON configuration document and validates it.
ModelConfig parse_config(std::string_view text);
ModelConfig load_config_file(const std::string& path);
std::string to_json(const ModelConfig& config);

// k * W: the span stated for stacked windowed layers.
int64_t theoretical_span(const ModelConfig& config);
// k * (W - 1) + 1: input positions visible from one output position when the
// window holds W keys including the query itself.
int64_t exact_reach(const ModelConfig& config);
// Total weight count: embeddings, per-layer attention and gated FFN, norms,
// and an untied output projection.
int64_t parameter_count(const ModelConfig& config);
// seq_len / min(seq_len, W).
double cache_memory_ratio(int64_t seq_len, const ModelConfig& config);

}  // namespace swa
