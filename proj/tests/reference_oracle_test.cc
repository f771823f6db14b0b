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

#include "swa/reference_oracle.h"

#include <gtest/gtest.h>

#include <random>

#include "test_util.h"

namespace swa {
namespace {

using testing::random_ids;

DecoderWeights weights_for(int64_t layers, int64_t window, uint64_t seed = 42) {
  ModelConfig c = ModelConfig::toy();
  c.n_layers = layers;
  c.window_size = window;
  return init_random(c, seed);
}

std::vector<int64_t> range(int64_t from, int64_t to_inclusive) {
  std::vector<int64_t> r;
  for (int64_t i = from; i <= to_inclusive; ++i) r.push_back(i);
  return r;
}

TEST(OracleTest, ShortSequencesIgnoreWindow) {
  const auto w = weights_for(4, 8);
  std::mt19937 rng(1);
  const auto tokens = random_ids(8, 256, rng);
  EXPECT_EQ(oracle_forward_swa(w, w.config, tokens), oracle_forward_causal(w, w.config, tokens));
}

TEST(OracleTest, WindowBindsOnLongSequences) {
  const auto w = weights_for(4, 8);
  std::mt19937 rng(42);
  const auto tokens = random_ids(32, 256, rng);
  const Tensor swa = oracle_forward_swa(w, w.config, tokens);
  const Tensor causal = oracle_forward_causal(w, w.config, tokens);
  float before = 0.0f, after = 0.0f;
  for (int64_t i = 0; i < 32; ++i) {
    for (int64_t c = 0; c < 256; ++c) {
      const float d = std::abs(swa.at(i, c) - causal.at(i, c));
      (i < 8 ? before : after) = std::max(i < 8 ? before : after, d);
    }
  }
  EXPECT_EQ(before, 0.0f);
  EXPECT_GT(after, 1e-7f);
}

TEST(OracleTest, CausalDependenceOnEarlierToken) {
  const auto w = weights_for(2, 4);
  const std::vector<int32_t> a = {3, 9}, b = {4, 9};
  const Tensor la = oracle_forward_causal(w, w.config, a);
  const Tensor lb = oracle_forward_causal(w, w.config, b);
  float diff = 0.0f;
  for (int64_t c = 0; c < 256; ++c) diff = std::max(diff, std::abs(la.at(1, c) - lb.at(1, c)));
  EXPECT_GT(diff, 1e-7f);
}

TEST(OracleTest, HistoryGrowsLinearly) {
  const auto w = weights_for(4, 8);
  std::mt19937 rng(2);
  int64_t prev = 0;
  for (int64_t len : {8, 16, 32, 64}) {
    FullHistoryState history;
    oracle_forward_swa(w, w.config, random_ids(len, 256, rng), &history);
    EXPECT_EQ(history.rows_per_layer(), len);
    EXPECT_EQ(history.float_count(), 4 * 2 * len * 2 * 16);
    EXPECT_GT(history.float_count(), prev);
    prev = history.float_count();
  }
}

TEST(OracleTest, Guards) {
  const auto w = weights_for(1, 4);
  EXPECT_THROW(oracle_forward_swa(w, w.config, std::vector<int32_t>{}), std::invalid_argument);
  EXPECT_THROW(oracle_forward_swa(w, w.config, std::vector<int32_t>(129, 0)), std::out_of_range);
  ModelConfig big = w.config;
  big.context_len = 1 << 16;
  EXPECT_THROW(oracle_forward_swa(w, big, std::vector<int32_t>(20000, 0)), std::out_of_range);
  ModelConfig other = w.config;
  other.hidden_dim = 64;
  EXPECT_THROW(oracle_forward_swa(w, other, std::vector<int32_t>{1}), std::invalid_argument);
}

TEST(ReachProbeTest, SingleLayerWindowThree) {
  const auto w = weights_for(1, 3);
  std::mt19937 rng(3);
  const auto tokens = random_ids(10, 256, rng);
  for (int64_t j = 0; j < 10; ++j) {
    EXPECT_EQ(reach_probe(w, w.config, tokens, j, 1e-2f), range(j, std::min<int64_t>(j + 2, 9)));
  }
}

TEST(ReachProbeTest, TwoLayersWindowFour) {
  const auto w = weights_for(2, 4);
  std::mt19937 rng(4);
  const auto tokens = random_ids(10, 256, rng);
  EXPECT_EQ(reach_probe(w, w.config, tokens, 0, 1e-2f), range(0, 6));
}

TEST(ReachProbeTest, LastPositionOnlyAffectsItself) {
  const auto w = weights_for(2, 4);
  std::mt19937 rng(5);
  const auto tokens = random_ids(9, 256, rng);
  EXPECT_EQ(reach_probe(w, w.config, tokens, 8, 1e-2f), (std::vector<int64_t>{8}));
  EXPECT_THROW(reach_probe(w, w.config, tokens, 9, 1e-2f), std::out_of_range);
  EXPECT_THROW(reach_probe(w, w.config, tokens, 0, 0.0f), std::invalid_argument);
}

TEST(ReachProbeTest, AffectedSetsAreContiguousFromPerturbation) {
  std::mt19937 rng(6);
  for (int64_t layers : {1, 2, 3}) {
    for (int64_t window : {2, 3, 4}) {
      const auto w = weights_for(layers, window, 7);
      const auto tokens = random_ids(14, 256, rng);
      for (int64_t j : {0, 3, 9}) {
        const auto affected = reach_probe(w, w.config, tokens, j, 1e-2f);
        ASSERT_FALSE(affected.empty());
        EXPECT_EQ(affected.front(), j);
        for (size_t i = 1; i < affected.size(); ++i) EXPECT_EQ(affected[i], affected[i - 1] + 1);
        EXPECT_LE(affected.back() - j, layers * (window - 1));
      }
    }
  }
}

}  // namespace
}  // namespace swa
