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

#include "swa/config.h"

#include <algorithm>
#include <array>
#include <fstream>
#include <sstream>
#include <utility>

#include "json.hpp"

namespace swa {
namespace {

using FieldPtr = int64_t ModelConfig::*;

constexpr std::array<std::pair<const char*, FieldPtr>, 9> kFields = {{
    {"dim", &ModelConfig::dim},
    {"n_layers", &ModelConfig::n_layers},
    {"head_dim", &ModelConfig::head_dim},
    {"hidden_dim", &ModelConfig::hidden_dim},
    {"n_heads", &ModelConfig::n_heads},
    {"n_kv_heads", &ModelConfig::n_kv_heads},
    {"window_size", &ModelConfig::window_size},
    {"context_len", &ModelConfig::context_len},
    {"vocab_size", &ModelConfig::vocab_size},
}};

}  // namespace

ModelConfig ModelConfig::preset_7b() {
  return ModelConfig{.dim = 4096,
                     .n_layers = 32,
                     .head_dim = 128,
                     .hidden_dim = 14336,
                     .n_heads = 32,
                     .n_kv_heads = 8,
                     .window_size = 4096,
                     .context_len = 8192,
                     .vocab_size = 32000};
}

ModelConfig ModelConfig::toy() {
  return ModelConfig{.dim = 64,
                     .n_layers = 4,
                     .head_dim = 16,
                     .hidden_dim = 128,
                     .n_heads = 4,
                     .n_kv_heads = 2,
                     .window_size = 8,
                     .context_len = 128,
                     .vocab_size = 256};
}

std::vector<std::string> validate(const ModelConfig& config) {
  std::vector<std::string> violations;
  for (const auto& [name, field] : kFields) {
    if (config.*field <= 0) violations.push_back(std::string(name) + " > 0");
  }
  if (config.dim != config.n_heads * config.head_dim) {
    violations.emplace_back(kRuleHeadsTimesHeadDim);
  }
  if (config.n_kv_heads < 1) {
    violations.emplace_back(kRuleKvHeadsPositive);
  } else if (config.n_heads % config.n_kv_heads != 0) {
    violations.emplace_back(kRuleHeadsDivisible);
  }
  if (config.window_size < 1 || config.window_size > config.context_len) {
    violations.emplace_back(kRuleWindowRange);
  }
  return violations;
}

void require_valid(const ModelConfig& config) {
  const auto violations = validate(config);
  if (violations.empty()) return;
  std::string message = "invalid model config:";
  for (const auto& v : violations) message += " [" + v + "]";
  throw std::invalid_argument(message);
}

ModelConfig parse_config(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("", std::string("config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("", "config must be a JSON object");

  ModelConfig config;
  for (const auto& [name, field] : kFields) {
    auto it = doc.find(name);
    if (it == doc.end()) {
      throw ConfigError(name, std::string("missing key \"") + name + "\"");
    }
    if (!it->is_number_integer()) {
      throw ConfigError(name, std::string("non-integer value for \"") + name + "\"");
    }
    config.*field = it->get<int64_t>();
  }
  for (const auto& item : doc.items()) {
    const bool known = std::any_of(kFields.begin(), kFields.end(),
                                   [&](const auto& f) { return item.key() == f.first; });
    if (!known) throw ConfigError(item.key(), "unknown key \"" + item.key() + "\"");
  }

  const auto violations = validate(config);
  if (!violations.empty()) {
    // Name the first field mentioned by the first violated rule.
    std::string key;
    std::istringstream rule(violations.front());
    for (std::string token; key.empty() && rule >> token;) {
      token.erase(std::find_if(token.begin(), token.end(),
                               [](char c) { return c == '*' || c == '%'; }),
                  token.end());
      for (const auto& f : kFields) {
        if (token == f.first) key = token;
      }
    }
    std::string message = "config validation failed:";
    for (const auto& v : violations) message += " [" + v + "]";
    throw ConfigError(key, message);
  }
  return config;
}

ModelConfig load_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("", "cannot open config file " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str());
}

std::string to_json(const ModelConfig& config) {
  nlohmann::ordered_json doc;
  for (const auto& [name, field] : kFields) doc[name] = config.*field;
  return doc.dump();
}

int64_t theoretical_span(const ModelConfig& config) {
  return config.n_layers * config.window_size;
}

int64_t exact_reach(const ModelConfig& config) {
  return config.n_layers * (config.window_size - 1) + 1;
}

int64_t parameter_count(const ModelConfig& config) {
  const int64_t q_width = config.n_heads * config.head_dim;
  const int64_t kv_width = config.n_kv_heads * config.head_dim;
  const int64_t per_layer = 2 * config.dim                      // attention + ffn norms
                            + config.dim * q_width               // wq
                            + 2 * config.dim * kv_width          // wk, wv
                            + q_width * config.dim               // wo
                            + 2 * config.dim * config.hidden_dim // w1, w3
                            + config.hidden_dim * config.dim;    // w2
  return config.vocab_size * config.dim + config.n_layers * per_layer + config.dim +
         config.dim * config.vocab_size;
}

double cache_memory_ratio(int64_t seq_len, const ModelConfig& config) {
  if (seq_len < 1) throw std::invalid_argument("cache_memory_ratio: seq_len must be >= 1");
  return static_cast<double>(seq_len) /
         static_cast<double>(std::min(seq_len, config.window_size));
}

}  // namespace swa
