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

#include "swa/weight_file.h"

#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <iterator>
#include <ostream>
#include <vector>

namespace swa {
namespace {

constexpr size_t kFixedHeaderBytes = 12;

void put_u32(std::vector<char>& buf, uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

uint32_t get_u32(const char* p) {
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(static_cast<unsigned char>(p[i])) << (8 * i);
  return v;
}

}  // namespace

void save_weights(const DecoderWeights& weights, std::ostream& out) {
  const std::string config_doc = to_json(weights.config);
  std::vector<char> buf(std::begin(kWeightMagic), std::end(kWeightMagic));
  put_u32(buf, kWeightVersion);
  put_u32(buf, static_cast<uint32_t>(config_doc.size()));
  buf.insert(buf.end(), config_doc.begin(), config_doc.end());
  buf.reserve(buf.size() + static_cast<size_t>(weights.element_count()) * 4);
  weights.for_each_tensor([&](const Tensor& t) {
    for (float f : t.data()) put_u32(buf, std::bit_cast<uint32_t>(f));
  });
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw WeightFileError("weight file: write failed");
}

void save_weights_file(const DecoderWeights& weights, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw WeightFileError("weight file: cannot open " + path + " for writing");
  save_weights(weights, out);
}

DecoderWeights load_weights(std::istream& in) {
  const std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < kFixedHeaderBytes) {
    throw WeightFileError("weight file: header check failed, file is only " +
                          std::to_string(bytes.size()) + " bytes");
  }
  if (std::memcmp(bytes.data(), kWeightMagic, 4) != 0) {
    throw WeightFileError("weight file: magic check failed, expected \"MWDC\"");
  }
  const uint32_t version = get_u32(bytes.data() + 4);
  if (version != kWeightVersion) {
    throw WeightFileError("weight file: version check failed, expected 1, got " + std::to_string(version));
  }
  const uint32_t config_len = get_u32(bytes.data() + 8);
  if (bytes.size() < kFixedHeaderBytes + config_len) {
    throw WeightFileError("weight file: config length check failed, document truncated");
  }
  ModelConfig config;
  try {
    config = parse_config(std::string_view(bytes.data() + kFixedHeaderBytes, config_len));
  } catch (const ConfigError& e) {
    throw WeightFileError(std::string("weight file: config check failed: ") + e.what());
  }

  const size_t header = kFixedHeaderBytes + config_len;
  const auto expected = header + static_cast<size_t>(parameter_count(config)) * 4;
  if (bytes.size() != expected) {
    throw WeightFileError("weight file: length check failed, expected " + std::to_string(expected) +
                          " bytes, got " + std::to_string(bytes.size()));
  }

  DecoderWeights weights = allocate_weights(config);
  const char* cursor = bytes.data() + header;
  bool finite = true;
  weights.for_each_tensor([&](Tensor& t) {
    for (float& f : t.data()) {
      f = std::bit_cast<float>(get_u32(cursor));
      finite = finite && std::isfinite(f);
      cursor += 4;
    }
  });
  if (!finite) throw WeightFileError("weight file: finiteness check failed, NaN or Inf in tensors");
  return weights;
}

DecoderWeights load_weights_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw WeightFileError("weight file: cannot open " + path);
  return load_weights(in);
}

}  // namespace swa
