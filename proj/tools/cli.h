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
#include <iosfwd>
#include <string>
#include <vector>

#include "swa/config.h"
#include "swa/decoder_model.h"

namespace swa::cli {

// Stable process exit codes.
enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitWeightFile = 2,
  kExitTruncated = 3,
  kExitVerifyFailed = 4,
};

struct RunReport {
  std::string mode;
  int64_t tokens_generated = 0;
  double wall_time = 0.0;
  double tokens_per_second = 0.0;
  int64_t cache_bytes_per_layer = 0;
  int64_t total_cache_bytes = 0;
  int64_t swa_score_pairs = 0;
  int64_t full_score_pairs = 0;
  double pair_ratio = 0.0;
  bool truncated = false;
};

// Fills the analytic fields (cache bytes, pair counts) for a sequence of
// `seq_len` tokens under `config`.
RunReport make_report(const ModelConfig& config, int64_t seq_len);
std::string report_json(const RunReport& report);

struct BenchScenario {
  int64_t seq_len = 0;
  int64_t window = 0;
};
// Parses "L:W,L:W,...". Throws std::invalid_argument on malformed input.
std::vector<BenchScenario> parse_scenarios(const std::string& text);
std::vector<int32_t> parse_prompt_ids(const std::string& text);

struct VerifyOptions {
  ModelConfig config = ModelConfig::toy();
  uint64_t seed = 42;
  // Shifts the engine's window relative to the oracle's. Non-zero values
  // model a mask off-by-one and must make verification fail.
  int64_t engine_window_skew = 0;
};

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

std::vector<CheckResult> run_checks(const VerifyOptions& options);
int cmd_verify(const VerifyOptions& options, std::ostream& out, std::ostream& err);

// Full command-line entry point; argv[0] is the program name.
int run_cli(const std::vector<std::string>& argv, std::ostream& out, std::ostream& err);

}  // namespace swa::cli
