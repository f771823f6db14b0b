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
#include <stdexcept>
#include <string>

#include "swa/decoder_model.h"

namespace swa {

// Binary weight file, little-endian:
//   "MWDC" | u32 version (=1) | u32 config length | config JSON | tensors
// Tensors follow DecoderWeights::for_each_tensor order as raw float32 rows.
inline constexpr char kWeightMagic[4] = {'M', 'W', 'D', 'C'};
inline constexpr uint32_t kWeightVersion = 1;

class WeightFileError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void save_weights(const DecoderWeights& weights, std::ostream& out);
void save_weights_file(const DecoderWeights& weights, const std::string& path);

// Throws WeightFileError naming the failing check (magic, version, config,
// length).
DecoderWeights load_weights(std::istream& in);
DecoderWeights load_weights_file(const std::string& path);

}  // namespace swa
