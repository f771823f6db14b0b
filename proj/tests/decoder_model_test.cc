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

#include "swa/decoder_model.h"

#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "swa/reference_oracle.h"
#include "swa/weight_file.h"
#include "test_util.h"

namespace swa {
namespace {

using testing::random_ids;

std::shared_ptr<const DecoderWeights> toy_weights(uint64_t seed = 42, int64_t window = 8) {
  ModelConfig c = ModelConfig::toy();
  c.window_size = window;
  return std::make_shared<DecoderWeights>(init_random(c, seed));
}

TEST(InitRandomTest, DeterministicAndSeedSensitive) {
  const auto a = init_random(ModelConfig::toy(), 42);
  const auto b = init_random(ModelConfig::toy(), 42);
  const auto c = init_random(ModelConfig::toy(), 43);
  EXPECT_EQ(a, b);
  EXPECT_NE(a.token_embedding, c.token_embedding);
}

// Enumerates allocated tensors independently of the closed-form count.
TEST(InitRandomTest, ElementCountMatchesParameterCount) {
  for (const ModelConfig& c : {ModelConfig::toy(), ModelConfig{32, 3, 8, 48, 4, 1, 5, 40, 97}}) {
    const auto w = init_random(c, 1);
    int64_t enumerated = 0;
    int64_t tensors = 0;
    w.for_each_tensor([&](const Tensor& t) {
      int64_t n = 1;
      for (int64_t d : t.shape()) n *= d;
      enumerated += n;
      ++tensors;
    });
    EXPECT_EQ(enumerated, parameter_count(c));
    EXPECT_EQ(tensors, 3 + 9 * c.n_layers);
  }
}

TEST(InitRandomTest, ValueRanges) {
  const auto w = init_random(ModelConfig::toy(), 7);
  const float bound = 0.02f / 2.0f;  // 0.02 / sqrt(4 layers)
  for (float v : w.layers[0].wq.data()) EXPECT_LE(std::abs(v), bound);
  for (float v : w.final_norm_gain.data()) {
    EXPECT_GE(v, 0.5f);
    EXPECT_LT(v, 1.5f);
  }
}

TEST(ChunkPromptTest, Examples) {
  EXPECT_EQ(chunk_prompt(12, 4), (std::vector<TokenRange>{{0, 4}, {4, 8}, {8, 12}}));
  EXPECT_EQ(chunk_prompt(3, 8), (std::vector<TokenRange>{{0, 3}}));
  EXPECT_EQ(chunk_prompt(9, 4), (std::vector<TokenRange>{{0, 4}, {4, 8}, {8, 9}}));
  EXPECT_THROW(chunk_prompt(0, 4), std::invalid_argument);
}

TEST(ChunkPromptTest, CoversPromptExactly) {
  for (int64_t len = 1; len <= 50; ++len) {
    for (int64_t w = 1; w <= 9; ++w) {
      int64_t next = 0;
      for (const auto& r : chunk_prompt(len, w)) {
        ASSERT_EQ(r.start, next);
        ASSERT_GE(r.size(), 1);
        ASSERT_LE(r.size(), w);
        next = r.end;
      }
      ASSERT_EQ(next, len);
    }
  }
}

TEST(ForwardDecodeTest, ShapeAndErrors) {
  auto w = toy_weights();
  GenerationSession s(w);
  const Tensor logits = s.forward_decode(3);
  EXPECT_EQ(logits.shape(), (std::vector<int64_t>{256}));
  EXPECT_TRUE(logits.all_finite());
  EXPECT_EQ(s.next_position(), 1);
  EXPECT_THROW(s.forward_decode(256), std::out_of_range);
  EXPECT_THROW(s.forward_decode(-1), std::out_of_range);
  EXPECT_EQ(s.next_position(), 1);
  for (const auto& c : s.caches()) EXPECT_EQ(c.next_position(), 1);
}

TEST(ForwardDecodeTest, FirstTokenEqualsSingleTokenOracle) {
  auto w = toy_weights();
  GenerationSession s(w);
  const int32_t token[] = {17};
  const Tensor oracle = oracle_forward_swa(*w, w->config, token);
  EXPECT_EQ(s.forward_decode(17), oracle.reshaped({256}));
}

TEST(ForwardDecodeTest, ContextOverflow) {
  ModelConfig c = ModelConfig::toy();
  c.context_len = 10;
  auto w = std::make_shared<DecoderWeights>(init_random(c, 1));
  GenerationSession s(w);
  for (int i = 0; i < 10; ++i) s.forward_decode(i);
  EXPECT_THROW(s.forward_decode(0), std::out_of_range);
}

// Master property: 4 seeds x W {4, 8} x L {2W, 8W}, every step within 1e-5.
TEST(ForwardDecodeTest, MatchesFullHistoryOracle) {
  for (uint64_t seed : {1, 2, 3, 4}) {
    for (int64_t window : {4, 8}) {
      auto w = toy_weights(seed, window);
      std::mt19937 rng(static_cast<uint32_t>(seed));
      for (int64_t len : {2 * window, 8 * window}) {
        const auto tokens = random_ids(len, 256, rng);
        GenerationSession s(w);
        const Tensor oracle = oracle_forward_swa(*w, w->config, tokens);
        const Tensor causal = oracle_forward_causal(*w, w->config, tokens);
        for (int64_t i = 0; i < len; ++i) {
          const Tensor logits = s.forward_decode(tokens[static_cast<size_t>(i)]);
          float err = 0.0f, causal_err = 0.0f;
          for (int64_t c = 0; c < 256; ++c) {
            err = std::max(err, std::abs(logits[c] - oracle.at(i, c)));
            causal_err = std::max(causal_err, std::abs(logits[c] - causal.at(i, c)));
          }
          ASSERT_LE(err, 1e-5f) << "seed " << seed << " W " << window << " pos " << i;
          // Until the window binds, SWA and vanilla attention coincide.
          if (i < window) {
            ASSERT_LE(causal_err, 1e-5f);
          }
        }
      }
    }
  }
}

TEST(PrefillTest, MatchesTokenByToken) {
  for (int64_t window : {4, 8}) {
    auto w = toy_weights(42, window);
    std::mt19937 rng(99);
    for (int64_t len : {int64_t{1}, window - 1, window, window + 1, 3 * window, 3 * window + 2}) {
      const auto prompt = random_ids(len, 256, rng);
      GenerationSession bulk(w), stepwise(w);
      const Tensor a = bulk.prefill(prompt);
      Tensor b;
      for (int32_t t : prompt) b = stepwise.forward_decode(t);
      EXPECT_LE(max_abs_diff(a, b), 1e-6f) << "len " << len;
      EXPECT_EQ(bulk.next_position(), stepwise.next_position());
      for (size_t l = 0; l < bulk.caches().size(); ++l) {
        EXPECT_EQ(bulk.caches()[l].retained_positions(), stepwise.caches()[l].retained_positions());
      }
      // Summation order is fixed, so cache contents agree bit for bit.
      EXPECT_EQ(bulk.caches(), stepwise.caches());
    }
  }
}

TEST(PrefillTest, ChunkScoreBlockBounded) {
  auto w = toy_weights(42, 8);
  std::mt19937 rng(5);
  GenerationSession s(w);
  s.prefill(random_ids(64, 256, rng));
  EXPECT_EQ(chunk_prompt(64, 8).size(), 8u);
  EXPECT_LE(s.peak_score_entries(), 8 * 16);
  EXPECT_EQ(s.peak_score_entries(), 8 * 16);
}

TEST(PrefillTest, Errors) {
  auto w = toy_weights();
  GenerationSession s(w);
  const std::vector<int32_t> ok = {1, 2};
  s.prefill(ok);
  EXPECT_THROW(s.prefill(ok), std::logic_error);
  GenerationSession fresh(w);
  EXPECT_THROW(fresh.prefill(std::vector<int32_t>(129, 1)), std::out_of_range);
  EXPECT_THROW(fresh.prefill(std::vector<int32_t>{1, 999}), std::out_of_range);
  EXPECT_EQ(fresh.next_position(), 0);
}

TEST(GenerateTest, ZeroTokens) {
  auto w = toy_weights();
  GenerationSession s(w);
  const std::vector<int32_t> prompt = {1, 2, 3};
  const auto r = generate(s, prompt, 0, SamplerSpec::greedy());
  EXPECT_TRUE(r.tokens.empty());
  EXPECT_FALSE(r.truncated);
  EXPECT_EQ(r.stats.prompt_tokens, 3);
  EXPECT_EQ(r.stats.full_score_pairs, 6);
}

TEST(GenerateTest, GreedyIsDeterministic) {
  auto w = toy_weights();
  const std::vector<int32_t> prompt = {1, 2, 3};
  GenerationSession a(w), b(w);
  const auto ra = generate(a, prompt, 20, SamplerSpec::greedy());
  const auto rb = generate(b, prompt, 20, SamplerSpec::greedy());
  EXPECT_EQ(ra.tokens.size(), 20u);
  EXPECT_EQ(ra.tokens, rb.tokens);
  EXPECT_EQ(ra.stats.cache_bytes, 4 * 2 * 2 * 8 * 16 * 4);
}

TEST(GenerateTest, TopOneEqualsGreedy) {
  auto w = toy_weights(3);
  const std::vector<int32_t> prompt = {7};
  GenerationSession a(w), b(w);
  const auto greedy = generate(a, prompt, 100, SamplerSpec::greedy());
  const auto top1 = generate(b, prompt, 100, SamplerSpec::top_k(1, 0.7f, 123));
  EXPECT_EQ(greedy.tokens, top1.tokens);
}

TEST(GenerateTest, TopKSeededAndWithinCandidates) {
  auto w = toy_weights(3);
  const std::vector<int32_t> prompt = {7, 8};
  GenerationSession a(w), b(w);
  const auto ra = generate(a, prompt, 30, SamplerSpec::top_k(5, 1.0f, 9));
  const auto rb = generate(b, prompt, 30, SamplerSpec::top_k(5, 1.0f, 9));
  EXPECT_EQ(ra.tokens, rb.tokens);
  EXPECT_THROW(TokenSampler(SamplerSpec::top_k(0, 1.0f, 1), 256), std::invalid_argument);
  EXPECT_THROW(TokenSampler(SamplerSpec::top_k(257, 1.0f, 1), 256), std::invalid_argument);
  EXPECT_THROW(TokenSampler(SamplerSpec::top_k(3, 0.0f, 1), 256), std::invalid_argument);

  TokenSampler sampler(SamplerSpec::top_k(2, 1.0f, 4), 6);
  const Tensor logits({6}, {0, 5, 1, 5, -3, 2});
  for (int i = 0; i < 50; ++i) {
    const int32_t t = sampler.pick(logits);
    EXPECT_TRUE(t == 1 || t == 3);
  }
}

TEST(GenerateTest, GreedyTieBreaksLow) {
  EXPECT_EQ(argmax_lowest(std::vector<float>{1, 3, 3, 2}), 1);
  EXPECT_EQ(argmax_lowest(std::vector<float>{4, 4}), 0);
}

TEST(GenerateTest, TruncatesAtContext) {
  ModelConfig c = ModelConfig::toy();
  c.context_len = 12;
  auto w = std::make_shared<DecoderWeights>(init_random(c, 1));
  GenerationSession s(w);
  const std::vector<int32_t> prompt(5, 1);
  const auto r = generate(s, prompt, 20, SamplerSpec::greedy());
  EXPECT_TRUE(r.truncated);
  EXPECT_EQ(r.tokens.size(), 7u);
  EXPECT_THROW(generate(s, std::vector<int32_t>{}, 1, SamplerSpec::greedy()), std::invalid_argument);
}

TEST(GenerateTest, CacheStopsGrowing) {
  auto w = toy_weights(42, 8);
  GenerationSession s(w);
  std::mt19937 rng(1);
  const auto tokens = random_ids(64, 256, rng);
  int64_t after_window = 0;
  for (int64_t i = 0; i < 64; ++i) {
    s.forward_decode(tokens[static_cast<size_t>(i)]);
    if (i == 7) after_window = s.cache_bytes();
  }
  EXPECT_EQ(s.cache_bytes(), after_window);
  for (const auto& c : s.caches()) EXPECT_EQ(c.filled(), 8);
}

TEST(WeightFileTest, RoundTripAndHeader) {
  const auto w = init_random(ModelConfig::toy(), 11);
  std::stringstream buf;
  save_weights(w, buf);
  const std::string bytes = buf.str();
  ASSERT_EQ(bytes.substr(0, 4), "MWDC");
  EXPECT_EQ(static_cast<unsigned char>(bytes[4]), 1u);
  const std::string doc = to_json(w.config);
  EXPECT_EQ(static_cast<unsigned char>(bytes[8]), doc.size());
  EXPECT_EQ(bytes.size(), 12 + doc.size() + 4 * static_cast<size_t>(parameter_count(w.config)));
  std::stringstream in(bytes);
  EXPECT_EQ(load_weights(in), w);
}

TEST(WeightFileTest, ValidationNamesFailingCheck) {
  const auto w = init_random(ModelConfig::toy(), 11);
  std::stringstream buf;
  save_weights(w, buf);
  const std::string good = buf.str();
  auto error_of = [](std::string bytes) {
    std::stringstream in(bytes);
    try {
      load_weights(in);
    } catch (const WeightFileError& e) {
      return std::string(e.what());
    }
    return std::string("<no error>");
  };
  std::string bad = good;
  bad[0] = 'X';
  EXPECT_NE(error_of(bad).find("magic"), std::string::npos);
  bad = good;
  bad[4] = 2;
  EXPECT_NE(error_of(bad).find("version"), std::string::npos);
  EXPECT_NE(error_of(good.substr(0, good.size() - 4)).find("length"), std::string::npos);
  EXPECT_NE(error_of(good + "x").find("length"), std::string::npos);
  EXPECT_NE(error_of("MW").find("header"), std::string::npos);
  bad = good;
  bad[13] = '#';
  EXPECT_NE(error_of(bad).find("config"), std::string::npos);
}

}  // namespace
}  // namespace swa
