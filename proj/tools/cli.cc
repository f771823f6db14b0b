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

#include "cli.h"

#include <algorithm>
#include <chrono>
#include <climits>
#include <cmath>
#include <iomanip>
#include <memory>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "swa/attention.h"
#include "swa/reference_oracle.h"
#include "swa/weight_file.h"

namespace swa::cli {
namespace {

constexpr float kOracleTolerance = 1e-5f;
constexpr float kPrefillTolerance = 1e-6f;
constexpr float kReachEpsilon = 1e-2f;

std::vector<int32_t> random_tokens(int64_t n, int64_t vocab, uint64_t seed) {
  std::mt19937_64 engine(seed);
  std::vector<int32_t> tokens(static_cast<size_t>(n));
  for (auto& t : tokens) t = static_cast<int32_t>(engine() % static_cast<uint64_t>(vocab));
  return tokens;
}

std::string format_err(float v) {
  std::ostringstream s;
  s << std::scientific << std::setprecision(3) << v;
  return s.str();
}

// Logits for each step of token-by-token decoding, stacked [len x vocab].
Tensor decode_all(GenerationSession& session, std::span<const int32_t> tokens) {
  const int64_t vocab = session.config().vocab_size;
  Tensor out({static_cast<int64_t>(tokens.size()), vocab});
  for (size_t t = 0; t < tokens.size(); ++t) {
    const Tensor logits = session.forward_decode(tokens[t]);
    std::copy(logits.data().begin(), logits.data().end(), out.row(static_cast<int64_t>(t)).begin());
  }
  return out;
}

std::shared_ptr<const DecoderWeights> with_window(const DecoderWeights& base, int64_t window) {
  auto w = std::make_shared<DecoderWeights>(base);
  w->config.window_size = window;
  w->config.context_len = std::max(w->config.context_len, window);
  return w;
}

CheckResult check_oracle_equivalence(const DecoderWeights& weights, const ModelConfig& cfg,
                                     const DecoderWeights& engine_weights, uint64_t seed) {
  const int64_t len = std::min(8 * cfg.window_size, cfg.context_len);
  const auto tokens = random_tokens(len, cfg.vocab_size, seed);
  GenerationSession session(std::make_shared<DecoderWeights>(engine_weights));
  const float err = max_abs_diff(decode_all(session, tokens), oracle_forward_swa(weights, cfg, tokens));
  return {"oracle-equivalence", err <= kOracleTolerance,
          "L=" + std::to_string(len) + " max_abs_err=" + format_err(err) + " tol=1e-05"};
}

CheckResult check_vanilla_degeneracy(const DecoderWeights& weights, const ModelConfig& cfg,
                                     const DecoderWeights& engine_weights, uint64_t seed) {
  const int64_t len = std::min(cfg.window_size, cfg.context_len);
  const auto tokens = random_tokens(len, cfg.vocab_size, seed + 1);
  GenerationSession session(std::make_shared<DecoderWeights>(engine_weights));
  const float err =
      max_abs_diff(decode_all(session, tokens), oracle_forward_causal(weights, cfg, tokens));
  return {"vanilla-degeneracy", err <= kOracleTolerance,
          "L=" + std::to_string(len) + " max_abs_err=" + format_err(err) + " tol=1e-05"};
}

CheckResult check_prefill(const DecoderWeights& engine_weights, uint64_t seed) {
  const ModelConfig& cfg = engine_weights.config;
  const int64_t w = cfg.window_size;
  auto shared = std::make_shared<DecoderWeights>(engine_weights);
  float worst = 0.0f;
  bool caches_match = true;
  std::string lengths;
  for (int64_t len : {int64_t{1}, w - 1, w, w + 1, 3 * w, 3 * w + 2}) {
    if (len < 1 || len > cfg.context_len) continue;
    const auto tokens = random_tokens(len, cfg.vocab_size, seed + 2 + static_cast<uint64_t>(len));
    GenerationSession bulk(shared), stepwise(shared);
    const Tensor a = bulk.prefill(tokens);
    Tensor b;
    for (int32_t t : tokens) b = stepwise.forward_decode(t);
    worst = std::max(worst, max_abs_diff(a, b));
    caches_match = caches_match && bulk.caches() == stepwise.caches() &&
                   bulk.next_position() == stepwise.next_position();
    lengths += (lengths.empty() ? "" : ",") + std::to_string(len);
  }
  return {"prefill-equivalence", worst <= kPrefillTolerance && caches_match,
          "lengths={" + lengths + "} max_abs_err=" + format_err(worst) +
              " caches=" + (caches_match ? "identical" : "DIFFER") + " tol=1e-06"};
}

// Per-position max-abs logit change, [len].
std::vector<float> position_deltas(const Tensor& a, const Tensor& b) {
  std::vector<float> deltas(static_cast<size_t>(a.dim(0)), 0.0f);
  for (int64_t i = 0; i < a.dim(0); ++i) {
    for (int64_t c = 0; c < a.dim(1); ++c) {
      deltas[static_cast<size_t>(i)] = std::max(deltas[static_cast<size_t>(i)], std::abs(a.at(i, c) - b.at(i, c)));
    }
  }
  return deltas;
}

// Nonzero change at the reach limit and an exact zero beyond it. Deep stacks
// attenuate the boundary signal below kReachThreshold, so exactness is judged
// on the raw deltas.
bool boundary_exact(const std::vector<float>& deltas, int64_t reach) {
  const auto len = static_cast<int64_t>(deltas.size());
  if (reach < len && !(deltas[static_cast<size_t>(reach)] > 0.0f)) return false;
  for (int64_t i = reach + 1; i < len; ++i) {
    if (deltas[static_cast<size_t>(i)] != 0.0f) return false;
  }
  return true;
}

CheckResult check_reach(const DecoderWeights& weights, const ModelConfig& cfg,
                        const DecoderWeights& engine_weights, uint64_t seed) {
  const int64_t reach = cfg.n_layers * (cfg.window_size - 1);
  const int64_t len = std::min(reach + 2, cfg.context_len);
  auto tokens = random_tokens(len, cfg.vocab_size, seed + 3);
  // The engine side perturbs an embedding row, so position 0 needs a token id
  // that appears nowhere else in the stream.
  while (std::count(tokens.begin() + 1, tokens.end(), tokens.front()) > 0) {
    tokens.front() = static_cast<int32_t>((tokens.front() + 1) % cfg.vocab_size);
  }

  const auto affected = reach_probe(weights, cfg, tokens, 0, kReachEpsilon);
  bool probe_ok = !affected.empty() && affected.back() <= reach;
  for (size_t i = 0; i < affected.size(); ++i) {
    probe_ok = probe_ok && affected[i] == static_cast<int64_t>(i);
  }

  const Tensor base = oracle_embed(weights, tokens);
  Tensor shifted_embed = base;
  shifted_embed.at(0, 0) += kReachEpsilon;
  const auto oracle_deltas =
      position_deltas(oracle_forward_embedded(weights, cfg, base, cfg.window_size),
                      oracle_forward_embedded(weights, cfg, shifted_embed, cfg.window_size));

  auto plain = std::make_shared<DecoderWeights>(engine_weights);
  auto shifted = std::make_shared<DecoderWeights>(engine_weights);
  shifted->token_embedding.at(tokens.front(), 0) += kReachEpsilon;
  GenerationSession sa(plain), sb(shifted);
  const auto engine_deltas = position_deltas(decode_all(sa, tokens), decode_all(sb, tokens));

  const bool exact = boundary_exact(oracle_deltas, reach) && boundary_exact(engine_deltas, reach);
  const bool ok = probe_ok && exact;
  std::ostringstream detail;
  detail << "affected=[0.." << (affected.empty() ? -1 : affected.back()) << "] affected <= " << reach
         << " boundary=" << (exact ? "exact" : "leaky");
  return {"reach", ok, detail.str()};
}

CheckResult check_cache_bound(const DecoderWeights& weights, const ModelConfig& cfg,
                              const DecoderWeights& engine_weights, uint64_t seed) {
  const int64_t w = engine_weights.config.window_size;
  const int64_t len = std::min(8 * cfg.window_size, cfg.context_len);
  const auto tokens = random_tokens(len, cfg.vocab_size, seed + 4);
  GenerationSession session(std::make_shared<DecoderWeights>(engine_weights));
  const int64_t bytes_at_start = session.cache_bytes();
  int64_t bytes_after_window = 0;
  for (int64_t i = 0; i < len; ++i) {
    session.forward_decode(tokens[static_cast<size_t>(i)]);
    if (i + 1 == w) bytes_after_window = session.cache_bytes();
  }
  bool retained_ok = true;
  for (const auto& c : session.caches()) retained_ok = retained_ok && c.filled() == std::min(w, len);
  FullHistoryState history;
  oracle_forward_swa(weights, cfg, tokens, &history);
  const double ratio = static_cast<double>(history.rows_per_layer()) /
                       static_cast<double>(session.caches().front().filled());
  const bool ok = retained_ok && bytes_after_window == session.cache_bytes() &&
                  bytes_at_start == session.cache_bytes() &&
                  session.caches().front().filled() == std::min(cfg.window_size, len);
  std::ostringstream detail;
  detail << "L=" << len << " retained/layer=" << session.caches().front().filled()
         << " history/layer=" << history.rows_per_layer() << " ratio=" << ratio
         << " cache_bytes=" << session.cache_bytes();
  return {"cache-bound", ok, detail.str()};
}

ModelConfig config_or_default(const std::string& path, const ModelConfig& fallback) {
  return path.empty() ? fallback : load_config_file(path);
}

struct GenerateArgs {
  std::string config_path;
  std::string weights_path;
  bool random_init = false;
  uint64_t seed = 0;
  std::string prompt_ids;
  int64_t max_tokens = 16;
  bool greedy = false;
  int64_t top_k = 0;
  float temperature = 1.0f;
  std::string mode = "swa";
};

int cmd_generate(const GenerateArgs& args, std::ostream& out, std::ostream& err) {
  std::shared_ptr<const DecoderWeights> weights;
  if (!args.weights_path.empty()) {
    try {
      weights = std::make_shared<DecoderWeights>(load_weights_file(args.weights_path));
    } catch (const WeightFileError& e) {
      err << "error: " << e.what() << "\n";
      return kExitWeightFile;
    }
    if (!args.config_path.empty()) {
      const ModelConfig requested = load_config_file(args.config_path);
      if (!(requested == weights->config)) {
        err << "error: weight file: config check failed, --config does not match the embedded config\n";
        return kExitWeightFile;
      }
    }
  } else {
    weights = std::make_shared<DecoderWeights>(
        init_random(config_or_default(args.config_path, ModelConfig::toy()), args.seed));
  }
  const ModelConfig& cfg = weights->config;

  const std::vector<int32_t> prompt = parse_prompt_ids(args.prompt_ids);
  if (prompt.empty()) throw std::invalid_argument("--prompt-ids must list at least one token id");
  for (int32_t id : prompt) {
    if (id < 0 || id >= cfg.vocab_size) {
      throw std::invalid_argument("prompt token id " + std::to_string(id) + " outside vocab_size " +
                                  std::to_string(cfg.vocab_size));
    }
  }
  if (args.max_tokens < 0) throw std::invalid_argument("--max-tokens must be >= 0");
  const SamplerSpec sampler = args.top_k > 0 ? SamplerSpec::top_k(args.top_k, args.temperature, args.seed)
                                             : SamplerSpec::greedy();

  RunReport report;
  std::vector<int32_t> produced;
  bool truncated = false;
  const auto start = std::chrono::steady_clock::now();
  if (static_cast<int64_t>(prompt.size()) > cfg.context_len) {
    truncated = true;
  } else if (args.mode == "swa") {
    GenerationSession session(weights);
    GenerationResult result = generate(session, prompt, args.max_tokens, sampler);
    produced = std::move(result.tokens);
    truncated = result.truncated;
  } else {
    const bool windowed = args.mode == "oracle-swa";
    TokenSampler picker(sampler, cfg.vocab_size);
    std::vector<int32_t> sequence = prompt;
    while (static_cast<int64_t>(produced.size()) < args.max_tokens) {
      if (static_cast<int64_t>(sequence.size()) >= cfg.context_len) {
        truncated = true;
        break;
      }
      const Tensor all = windowed ? oracle_forward_swa(*weights, cfg, sequence)
                                  : oracle_forward_causal(*weights, cfg, sequence);
      const auto last = all.row(all.dim(0) - 1);
      const int32_t next = picker.pick(Tensor({cfg.vocab_size}, std::vector<float>(last.begin(), last.end())));
      produced.push_back(next);
      sequence.push_back(next);
    }
  }
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  report = make_report(cfg, std::min<int64_t>(static_cast<int64_t>(prompt.size() + produced.size()),
                                              std::max<int64_t>(cfg.context_len, 1)));
  report.mode = args.mode;
  report.tokens_generated = static_cast<int64_t>(produced.size());
  report.wall_time = wall;
  report.tokens_per_second = wall > 0.0 ? static_cast<double>(produced.size()) / wall : 0.0;
  report.truncated = truncated;

  for (size_t i = 0; i < produced.size(); ++i) out << (i ? " " : "") << produced[i];
  if (!produced.empty()) out << "\n";
  err << report_json(report) << "\n";
  return truncated ? kExitTruncated : kExitOk;
}

int cmd_bench(const std::string& scenarios_text, const std::string& config_path, bool execute,
              std::ostream& out, std::ostream& err) {
  const auto scenarios = parse_scenarios(scenarios_text);
  const ModelConfig base = config_or_default(config_path, ModelConfig::preset_7b());
  const int64_t bytes_per_entry = 2 * base.n_kv_heads * base.head_dim * 4;

  for (const auto& sc : scenarios) {
    const int64_t full = full_pair_count(sc.seq_len);
    const int64_t windowed = score_pair_count(sc.seq_len, sc.window);
    const int64_t rolling_entries = std::min(sc.seq_len, sc.window);
    nlohmann::ordered_json row;
    row["seq_len"] = sc.seq_len;
    row["window"] = sc.window;
    row["full_score_pairs"] = full;
    row["swa_score_pairs"] = windowed;
    row["pair_ratio"] = static_cast<double>(full) / static_cast<double>(windowed);
    row["rolling_cache_bytes"] = base.n_layers * rolling_entries * bytes_per_entry;
    row["unbounded_cache_bytes"] = base.n_layers * sc.seq_len * bytes_per_entry;
    row["cache_ratio"] = static_cast<double>(sc.seq_len) / static_cast<double>(rolling_entries);

    if (execute) {
      constexpr int64_t kMaxExecuteLen = 1024;
      if (sc.seq_len > kMaxExecuteLen) {
        err << "bench: skipping --execute for L=" << sc.seq_len << " (limit " << kMaxExecuteLen << ")\n";
      } else {
        ModelConfig toy = ModelConfig::toy();
        toy.window_size = sc.window;
        toy.context_len = std::max(sc.seq_len, sc.window);
        auto weights = std::make_shared<DecoderWeights>(init_random(toy, 42));
        const auto tokens = random_tokens(sc.seq_len, toy.vocab_size, 7);
        using Clock = std::chrono::steady_clock;
        auto t0 = Clock::now();
        GenerationSession session(weights);
        for (int32_t t : tokens) session.forward_decode(t);
        auto t1 = Clock::now();
        oracle_forward_causal(*weights, toy, tokens);
        auto t2 = Clock::now();
        row["rolling_decode_seconds"] = std::chrono::duration<double>(t1 - t0).count();
        row["full_history_seconds"] = std::chrono::duration<double>(t2 - t1).count();
      }
    }
    out << row.dump() << "\n";
  }
  return kExitOk;
}

}  // namespace

RunReport make_report(const ModelConfig& config, int64_t seq_len) {
  RunReport r;
  r.cache_bytes_per_layer = 2 * config.n_kv_heads * config.window_size * config.head_dim * 4;
  r.total_cache_bytes = config.n_layers * r.cache_bytes_per_layer;
  r.swa_score_pairs = score_pair_count(seq_len, config.window_size);
  r.full_score_pairs = full_pair_count(seq_len);
  r.pair_ratio = static_cast<double>(r.full_score_pairs) / static_cast<double>(r.swa_score_pairs);
  return r;
}

std::string report_json(const RunReport& r) {
  nlohmann::ordered_json j;
  j["mode"] = r.mode;
  j["tokens_generated"] = r.tokens_generated;
  j["wall_time"] = r.wall_time;
  j["tokens_per_second"] = r.tokens_per_second;
  j["cache_bytes_per_layer"] = r.cache_bytes_per_layer;
  j["total_cache_bytes"] = r.total_cache_bytes;
  j["swa_score_pairs"] = r.swa_score_pairs;
  j["full_score_pairs"] = r.full_score_pairs;
  j["pair_ratio"] = r.pair_ratio;
  j["truncated"] = r.truncated;
  return j.dump();
}

std::vector<BenchScenario> parse_scenarios(const std::string& text) {
  std::vector<BenchScenario> scenarios;
  std::stringstream items(text);
  for (std::string item; std::getline(items, item, ',');) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) throw std::invalid_argument("malformed scenario \"" + item + "\", expected L:W");
    BenchScenario sc;
    try {
      size_t used_l = 0, used_w = 0;
      const std::string l = item.substr(0, colon), w = item.substr(colon + 1);
      sc.seq_len = std::stoll(l, &used_l);
      sc.window = std::stoll(w, &used_w);
      if (used_l != l.size() || used_w != w.size()) throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
      throw std::invalid_argument("malformed scenario \"" + item + "\", expected integers L:W");
    }
    if (sc.seq_len < 1 || sc.window < 1) {
      throw std::invalid_argument("scenario \"" + item + "\" needs L >= 1 and W >= 1");
    }
    scenarios.push_back(sc);
  }
  if (scenarios.empty()) throw std::invalid_argument("no bench scenarios given");
  return scenarios;
}

std::vector<int32_t> parse_prompt_ids(const std::string& text) {
  std::vector<int32_t> ids;
  std::istringstream in(text);
  for (std::string word; in >> word;) {
    size_t used = 0;
    long long v = 0;
    try {
      v = std::stoll(word, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != word.size() || v < 0 || v > INT32_MAX) {
      throw std::invalid_argument("malformed token id \"" + word + "\"");
    }
    ids.push_back(static_cast<int32_t>(v));
  }
  return ids;
}

std::vector<CheckResult> run_checks(const VerifyOptions& options) {
  const ModelConfig& cfg = options.config;
  require_valid(cfg);
  const DecoderWeights weights = init_random(cfg, options.seed);
  const auto engine = with_window(weights, cfg.window_size + options.engine_window_skew);

  std::vector<CheckResult> results;
  results.push_back(check_oracle_equivalence(weights, cfg, *engine, options.seed));
  results.push_back(check_vanilla_degeneracy(weights, cfg, *engine, options.seed));
  results.push_back(check_prefill(*engine, options.seed));
  results.push_back(check_reach(weights, cfg, *engine, options.seed));
  results.push_back(check_cache_bound(weights, cfg, *engine, options.seed));
  return results;
}

int cmd_verify(const VerifyOptions& options, std::ostream& out, std::ostream& err) {
  bool all = true;
  for (const auto& r : run_checks(options)) {
    out << r.name << ": " << r.detail << ": " << (r.passed ? "pass" : "FAIL") << "\n";
    all = all && r.passed;
  }
  if (!all) err << "verification failed\n";
  return all ? kExitOk : kExitVerifyFailed;
}

int run_cli(const std::vector<std::string>& argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Sliding-window transformer inference engine"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* generate_cmd = app.add_subcommand("generate", "Generate token ids from a prompt");
  generate_cmd->add_option("--config", gen.config_path, "JSON model config");
  auto* weights_opt = generate_cmd->add_option("--weights", gen.weights_path, "MWDC weight file");
  auto* random_opt = generate_cmd->add_flag("--random-init", gen.random_init, "Use seeded random weights");
  weights_opt->excludes(random_opt);
  generate_cmd->add_option("--seed", gen.seed, "Seed for weights and sampling");
  generate_cmd->add_option("--prompt-ids", gen.prompt_ids, "Space-separated prompt token ids")->required();
  generate_cmd->add_option("--max-tokens", gen.max_tokens, "Tokens to generate");
  auto* greedy_opt = generate_cmd->add_flag("--greedy", gen.greedy, "Greedy decoding (default)");
  auto* topk_opt = generate_cmd->add_option("--top-k", gen.top_k, "Top-k sampling")->check(CLI::PositiveNumber);
  greedy_opt->excludes(topk_opt);
  generate_cmd->add_option("--temperature", gen.temperature, "Top-k temperature")->needs(topk_opt);
  generate_cmd->add_option("--mode", gen.mode, "Attention path")
      ->check(CLI::IsMember({"swa", "oracle-swa", "oracle-causal"}));

  VerifyOptions verify;
  std::string verify_config;
  int64_t verify_window = 0, verify_layers = 0;
  auto* verify_cmd = app.add_subcommand("verify", "Run the oracle equivalence checks");
  verify_cmd->add_option("--config", verify_config, "JSON model config (default: toy)");
  verify_cmd->add_option("--seed", verify.seed, "Weight seed");
  verify_cmd->add_option("--window", verify_window, "Override window_size")->check(CLI::PositiveNumber);
  verify_cmd->add_option("--layers", verify_layers, "Override n_layers")->check(CLI::PositiveNumber);

  std::string bench_scenarios, bench_config;
  bool bench_execute = false;
  auto* bench_cmd = app.add_subcommand("bench", "Analytic attention and cache cost comparison");
  bench_cmd->add_option("--bench", bench_scenarios, "Scenarios L:W,L:W,...")->required();
  bench_cmd->add_option("--config", bench_config, "JSON model config (default: 7B)");
  bench_cmd->add_flag("--execute", bench_execute, "Also time toy-model decode");

  std::string init_config, init_out;
  uint64_t init_seed = 0;
  auto* init_cmd = app.add_subcommand("init-weights", "Write seeded random weights to a file");
  init_cmd->add_option("--config", init_config, "JSON model config (default: toy)");
  init_cmd->add_option("--seed", init_seed, "Weight seed");
  init_cmd->add_option("--out", init_out, "Output path")->required();

  std::vector<const char*> raw;
  raw.reserve(argv.size());
  for (const auto& a : argv) raw.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(raw.size()), raw.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*generate_cmd) {
      if (gen.weights_path.empty() && !gen.random_init) {
        err << "error: one of --weights or --random-init is required\n";
        return kExitUsage;
      }
      return cmd_generate(gen, out, err);
    }
    if (*verify_cmd) {
      verify.config = config_or_default(verify_config, ModelConfig::toy());
      if (verify_window > 0) {
        verify.config.window_size = verify_window;
        verify.config.context_len = std::max(verify.config.context_len, 8 * verify_window);
      }
      if (verify_layers > 0) verify.config.n_layers = verify_layers;
      return cmd_verify(verify, out, err);
    }
    if (*bench_cmd) return cmd_bench(bench_scenarios, bench_config, bench_execute, out, err);
    if (*init_cmd) {
      const DecoderWeights w = init_random(config_or_default(init_config, ModelConfig::toy()), init_seed);
      save_weights_file(w, init_out);
      return kExitOk;
    }
  } catch (const WeightFileError& e) {
    err << "error: " << e.what() << "\n";
    return kExitWeightFile;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace swa::cli
