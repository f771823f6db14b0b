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

// Acceptance suite: prints one PASS/FAIL line per criterion and exits
// nonzero if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cli.h"
#include "json.hpp"
#include "swa/attention.h"
#include "swa/config.h"
#include "swa/decoder_model.h"
#include "swa/reference_oracle.h"
#include "swa/rolling_cache.h"

namespace {

using namespace swa;

struct Outcome {
  bool passed;
  std::string detail;
};

std::vector<int32_t> tokens_from(uint64_t seed, int64_t n, int64_t vocab) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int32_t> dist(0, static_cast<int32_t>(vocab - 1));
  std::vector<int32_t> out(static_cast<size_t>(n));
  for (auto& t : out) t = dist(rng);
  return out;
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

float decode_vs_oracle(const std::shared_ptr<const DecoderWeights>& w, const Tensor& oracle,
                       const std::vector<int32_t>& tokens) {
  GenerationSession session(w);
  float err = 0.0f;
  for (size_t i = 0; i < tokens.size(); ++i) {
    const Tensor logits = session.forward_decode(tokens[i]);
    for (int64_t c = 0; c < w->config.vocab_size; ++c)
      err = std::max(err, std::abs(logits[c] - oracle.at(static_cast<int64_t>(i), c)));
  }
  return err;
}

Outcome oracle_equivalence() {
  const auto start = std::chrono::steady_clock::now();
  auto w = std::make_shared<const DecoderWeights>(init_random(ModelConfig::toy(), 42));
  const auto tokens = tokens_from(42, 64, w->config.vocab_size);
  const float err = decode_vs_oracle(w, oracle_forward_swa(*w, w->config, tokens), tokens);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {err <= 1e-5f && secs < 10.0, fmt("max err %.3e", err) + fmt(", %.3f s", secs)};
}

Outcome vanilla_degeneracy() {
  auto w = std::make_shared<const DecoderWeights>(init_random(ModelConfig::toy(), 42));
  const auto tokens = tokens_from(43, 8, w->config.vocab_size);
  const float err = decode_vs_oracle(w, oracle_forward_causal(*w, w->config, tokens), tokens);
  return {err <= 1e-5f, fmt("max err %.3e vs causal", err)};
}

Outcome chunked_prefill() {
  auto w = std::make_shared<const DecoderWeights>(init_random(ModelConfig::toy(), 42));
  float worst = 0.0f;
  bool caches_equal = true;
  for (int64_t len : {1, 7, 8, 9, 24, 26}) {
    const auto tokens = tokens_from(100 + static_cast<uint64_t>(len), len, w->config.vocab_size);
    GenerationSession chunked(w), stepwise(w);
    const Tensor a = chunked.prefill(tokens);
    Tensor b;
    for (int32_t t : tokens) b = stepwise.forward_decode(t);
    worst = std::max(worst, max_abs_diff(a, b));
    for (size_t l = 0; l < chunked.caches().size(); ++l) {
      caches_equal = caches_equal && chunked.caches()[l].retained_positions() ==
                                         stepwise.caches()[l].retained_positions();
    }
  }
  return {worst <= 1e-6f && caches_equal,
          fmt("max err %.3e", worst) + (caches_equal ? ", caches match" : ", caches differ")};
}

Outcome cache_bound() {
  auto w = std::make_shared<const DecoderWeights>(init_random(ModelConfig::toy(), 42));
  const auto tokens = tokens_from(44, 64, w->config.vocab_size);
  GenerationSession session(w);
  for (int32_t t : tokens) session.forward_decode(t);
  bool all_eight = true;
  for (const auto& cache : session.caches()) all_eight = all_eight && cache.filled() == 8;
  FullHistoryState history;
  oracle_forward_swa(*w, w->config, tokens, &history);
  const double ratio = static_cast<double>(history.rows_per_layer()) / session.caches()[0].filled();
  return {all_eight && history.rows_per_layer() == 64 && ratio == 8.0 &&
              cache_memory_ratio(32768, ModelConfig::preset_7b()) == 8.0,
          "rolling 8/layer, history " + std::to_string(history.rows_per_layer()) + fmt(", ratio %.1f", ratio)};
}

Outcome receptive_field() {
  ModelConfig c = ModelConfig::toy();
  c.n_layers = 2;
  c.window_size = 4;
  const DecoderWeights w = init_random(c, 42);
  const auto affected = reach_probe(w, c, tokens_from(45, 12, c.vocab_size), 0, 1e-2f);
  std::vector<int64_t> expected;
  for (int64_t i = 0; i <= 6; ++i) expected.push_back(i);
  std::string got;
  for (int64_t p : affected) got += (got.empty() ? "" : ",") + std::to_string(p);
  return {affected == expected && exact_reach(c) == 7, "affected {" + got + "}"};
}

Outcome operation_count() {
  const int64_t full = full_pair_count(16384);
  const int64_t windowed = score_pair_count(16384, 4096);
  const double ratio = static_cast<double>(full) / static_cast<double>(windowed);
  bool enumerated = true;
  for (int64_t len = 1; len <= 64 && enumerated; ++len) {
    std::vector<int64_t> pos(static_cast<size_t>(len));
    for (int64_t i = 0; i < len; ++i) pos[static_cast<size_t>(i)] = i;
    for (int64_t win = 1; win <= 16; ++win) {
      const AttentionMask m = build_swa_mask(pos, pos, win);
      if (m.admissible_count() != score_pair_count(len, win)) enumerated = false;
    }
    if (build_swa_mask(pos, pos, len).admissible_count() != full_pair_count(len)) enumerated = false;
  }
  return {full == 134'225'920 && windowed == 58'722'304 && ratio >= 2.0 && enumerated,
          std::to_string(full) + " vs " + std::to_string(windowed) + fmt(", ratio %.3f", ratio)};
}

Outcome gqa_degeneracy() {
  std::mt19937 rng(5);
  std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
  const int64_t heads = 4, n = 10, d = 16, window = 6;
  auto fill = [&](Tensor t) {
    for (float& v : t.data()) v = dist(rng);
    return t;
  };
  const Tensor q = fill(Tensor({heads, n, d})), k = fill(Tensor({heads, n, d})), v = fill(Tensor({heads, n, d}));
  std::vector<int64_t> pos(n);
  for (int64_t i = 0; i < n; ++i) pos[static_cast<size_t>(i)] = i;
  const AttentionMask mask = build_swa_mask(pos, pos, window);
  const Tensor got = gqa_attend(q, k, v, mask, HeadGrouping::make(heads, heads));

  // Plain multi-head attention in double precision.
  float err = 0.0f;
  for (int64_t h = 0; h < heads; ++h) {
    for (int64_t i = 0; i < n; ++i) {
      std::vector<double> s(static_cast<size_t>(n), -INFINITY);
      double mx = -INFINITY;
      for (int64_t j = 0; j < n; ++j) {
        if (j > i || i - j >= window) continue;
        double dot = 0.0;
        for (int64_t e = 0; e < d; ++e) dot += double(q[(h * n + i) * d + e]) * k[(h * n + j) * d + e];
        s[static_cast<size_t>(j)] = dot / std::sqrt(double(d));
        mx = std::max(mx, s[static_cast<size_t>(j)]);
      }
      double z = 0.0;
      for (double& x : s) z += (x = std::exp(x - mx));
      for (int64_t e = 0; e < d; ++e) {
        double acc = 0.0;
        for (int64_t j = 0; j < n; ++j) acc += s[static_cast<size_t>(j)] / z * v[(h * n + j) * d + e];
        err = std::max(err, static_cast<float>(std::abs(acc - got[(h * n + i) * d + e])));
      }
    }
  }
  return {err <= 1e-6f, fmt("max err %.3e vs plain MHA", err)};
}

Outcome parameter_count_check() {
  const int64_t big = parameter_count(ModelConfig::preset_7b());
  const int64_t toy_formula = parameter_count(ModelConfig::toy());
  const int64_t toy_alloc = allocate_weights(ModelConfig::toy()).element_count();
  return {big == 7'241'732'096 && big >= 7'000'000'000 && big <= 7'500'000'000 && toy_formula == toy_alloc,
          std::to_string(big) + ", toy " + std::to_string(toy_alloc)};
}

Outcome rolling_slot_law() {
  std::mt19937 rng(9);
  std::uniform_int_distribution<int64_t> len_dist(1, 100), win_dist(1, 16);
  std::uniform_real_distribution<float> val(-1.0f, 1.0f);
  const int64_t kv = 2, d = 4;
  for (int trial = 0; trial < 200; ++trial) {
    const int64_t w = win_dist(rng), len = len_dist(rng);
    RollingKvCache cache(w, kv, d);
    std::vector<Tensor> keys, values;
    for (int64_t p = 0; p < len; ++p) {
      Tensor k({kv, d}), v({kv, d});
      for (float& x : k.data()) x = val(rng);
      for (float& x : v.data()) x = val(rng);
      cache.append(p, k, v);
      keys.push_back(k);
      values.push_back(v);
    }
    const CacheWindow view = cache.window_view();
    const int64_t n = std::min(len, w);
    if (view.size() != n) return {false, "trial " + std::to_string(trial) + ": wrong size"};
    for (int64_t t = 0; t < n; ++t) {
      const int64_t p = len - n + t;
      if (view.positions[static_cast<size_t>(t)] != p) return {false, "trial " + std::to_string(trial) + ": order"};
      for (int64_t h = 0; h < kv; ++h) {
        for (int64_t e = 0; e < d; ++e) {
          if (view.keys[(h * n + t) * d + e] != keys[static_cast<size_t>(p)].at(h, e) ||
              view.values[(h * n + t) * d + e] != values[static_cast<size_t>(p)].at(h, e))
            return {false, "trial " + std::to_string(trial) + ": contents"};
        }
      }
    }
  }
  return {true, "200 random sequences match the unbounded log"};
}

Outcome determinism() {
  const std::vector<std::string> args = {"swa-infer", "generate", "--random-init", "--seed", "42",
                                         "--prompt-ids", "1 2 3", "--max-tokens", "16", "--greedy"};
  std::ostringstream out_a, err_a, out_b, err_b;
  const int code_a = cli::run_cli(args, out_a, err_a);
  const int code_b = cli::run_cli(args, out_b, err_b);
  auto report = [](const std::string& err) {
    auto j = nlohmann::json::parse(err.substr(err.rfind('{')));
    j.erase("wall_time");
    j.erase("tokens_per_second");
    return j;
  };
  const bool same = code_a == 0 && code_b == 0 && out_a.str() == out_b.str() && !out_a.str().empty() &&
                    report(err_a.str()) == report(err_b.str());
  return {same, same ? "identical output and reports" : "runs differ"};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"oracle equivalence", oracle_equivalence},
      {"vanilla degeneracy", vanilla_degeneracy},
      {"chunked prefill", chunked_prefill},
      {"cache bound", cache_bound},
      {"receptive field", receptive_field},
      {"operation count ratio", operation_count},
      {"gqa degeneracy", gqa_degeneracy},
      {"parameter count", parameter_count_check},
      {"rolling slot law", rolling_slot_law},
      {"determinism", determinism},
  };
  int failures = 0;
  for (size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    if (!o.passed) ++failures;
    std::printf("[%s] %zu. %s: %s\n", o.passed ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                o.detail.c_str());
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
