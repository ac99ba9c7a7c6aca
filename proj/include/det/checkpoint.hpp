/*
 * Copyright 2026 The det Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef DET_CHECKPOINT_HPP_
#define DET_CHECKPOINT_HPP_

#include <filesystem>
#include <map>
#include <string>

#include "det/encoder.hpp"
#include "json.hpp"

namespace det {

enum class CheckpointFormat { kBinary, kInlineJson };

// Named 2-D float64 tensors plus free-form JSON metadata. On disk the file
// at `path` is a JSON manifest; in binary form the values live in
// `path` + ".bin" as row-major little-endian float64, tensors in manifest
// order.
struct Checkpoint {
  std::map<std::string, Matrix> tensors;
  nlohmann::json metadata = nlohmann::json::object();

  void save(const std::filesystem::path& path,
            CheckpointFormat format = CheckpointFormat::kBinary) const;
  static Checkpoint load(const std::filesystem::path& path);

  const Matrix& at(const std::string& name) const;

  void put_encoder(const std::string& prefix, const EncoderParams& params);
  EncoderParams get_encoder(const std::string& prefix, const EncoderConfig& config) const;
};

nlohmann::json encoder_config_to_json(const EncoderConfig& config);
EncoderConfig encoder_config_from_json(const nlohmann::json& j);

}  // namespace det

#endif  // DET_CHECKPOINT_HPP_
