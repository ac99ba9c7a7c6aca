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

#include "det/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <vector>

#include "det/error.hpp"

namespace det {

using nlohmann::json;

namespace {

constexpr const char* kFormatTag = "det-checkpoint";

void put_le(std::vector<char>& out, double v) {
  uint64_t bits;
  std::memcpy(&bits, &v, sizeof bits);
  if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
  char buf[8];
  std::memcpy(buf, &bits, 8);
  out.insert(out.end(), buf, buf + 8);
}

double get_le(const char* p) {
  uint64_t bits;
  std::memcpy(&bits, p, 8);
  if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
  double v;
  std::memcpy(&v, &bits, sizeof v);
  return v;
}

std::filesystem::path sidecar(const std::filesystem::path& path) {
  return std::filesystem::path(path.string() + ".bin");
}

}  // namespace

const Matrix& Checkpoint::at(const std::string& name) const {
  auto it = tensors.find(name);
  if (it == tensors.end()) fail(ErrorKind::kShape, "checkpoint has no tensor '" + name + "'");
  return it->second;
}

void Checkpoint::save(const std::filesystem::path& path, CheckpointFormat format) const {
  json manifest;
  manifest["format"] = kFormatTag;
  manifest["version"] = 1;
  manifest["metadata"] = metadata;
  manifest["order"] = json::array();
  manifest["shapes"] = json::object();
  for (const auto& [name, m] : tensors) {
    manifest["order"].push_back(name);
    manifest["shapes"][name] = {m.rows(), m.cols()};
  }
  if (format == CheckpointFormat::kInlineJson) {
    manifest["storage"] = "inline";
    json values = json::object();
    for (const auto& [name, m] : tensors) {
      json flat = json::array();
      for (int i = 0; i < m.rows(); ++i) {
        for (int j = 0; j < m.cols(); ++j) flat.push_back(m(i, j));
      }
      values[name] = std::move(flat);
    }
    manifest["values"] = std::move(values);
  } else {
    manifest["storage"] = "binary";
    manifest["data_file"] = sidecar(path).filename().string();
    std::vector<char> bytes;
    for (const auto& [name, m] : tensors) {
      for (int i = 0; i < m.rows(); ++i) {
        for (int j = 0; j < m.cols(); ++j) put_le(bytes, m(i, j));
      }
    }
    std::ofstream bin(sidecar(path), std::ios::binary);
    if (!bin) fail(ErrorKind::kIo, "cannot write " + sidecar(path).string());
    bin.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!bin) fail(ErrorKind::kIo, "write failed for " + sidecar(path).string());
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::kIo, "cannot write checkpoint " + path.string());
  out << manifest.dump(1) << '\n';
  if (!out) fail(ErrorKind::kIo, "write failed for " + path.string());
}

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot open checkpoint " + path.string());
  json manifest;
  try {
    manifest = json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorKind::kParse, path.string() + ": " + e.what());
  }
  if (manifest.value("format", "") != kFormatTag) {
    fail(ErrorKind::kParse, path.string() + " is not a checkpoint manifest");
  }
  Checkpoint ck;
  ck.metadata = manifest.value("metadata", json::object());
  const auto order = manifest.at("order").get<std::vector<std::string>>();
  const auto& shapes = manifest.at("shapes");
  const std::string storage = manifest.value("storage", "binary");

  std::vector<char> bytes;
  size_t offset = 0;
  if (storage == "binary") {
    const auto data_path = path.parent_path() / manifest.at("data_file").get<std::string>();
    std::ifstream bin(data_path, std::ios::binary);
    if (!bin) fail(ErrorKind::kIo, "cannot open checkpoint data " + data_path.string());
    bytes.assign(std::istreambuf_iterator<char>(bin), std::istreambuf_iterator<char>());
  } else if (storage != "inline") {
    fail(ErrorKind::kParse, "unknown checkpoint storage '" + storage + "'");
  }

  for (const auto& name : order) {
    const auto shape = shapes.at(name).get<std::vector<long>>();
    if (shape.size() != 2 || shape[0] < 0 || shape[1] < 0) {
      fail(ErrorKind::kParse, "bad shape for tensor '" + name + "'");
    }
    Matrix m(shape[0], shape[1]);
    if (storage == "binary") {
      const size_t need = static_cast<size_t>(m.size()) * 8;
      if (offset + need > bytes.size()) {
        fail(ErrorKind::kParse, "checkpoint data truncated at tensor '" + name + "'");
      }
      for (int i = 0; i < m.rows(); ++i) {
        for (int j = 0; j < m.cols(); ++j) {
          m(i, j) = get_le(bytes.data() + offset);
          offset += 8;
        }
      }
    } else {
      const auto& flat = manifest.at("values").at(name);
      if (flat.size() != static_cast<size_t>(m.size())) {
        fail(ErrorKind::kParse, "value count mismatch for tensor '" + name + "'");
      }
      size_t k = 0;
      for (int i = 0; i < m.rows(); ++i) {
        for (int j = 0; j < m.cols(); ++j) m(i, j) = flat[k++].get<double>();
      }
    }
    ck.tensors.emplace(name, std::move(m));
  }
  if (storage == "binary" && offset != bytes.size()) {
    fail(ErrorKind::kParse, "checkpoint data has trailing bytes");
  }
  return ck;
}

void Checkpoint::put_encoder(const std::string& prefix, const EncoderParams& params) {
  params.for_each([&](const std::string& name, const Matrix& m) { tensors[prefix + name] = m; });
  metadata[prefix + "config"] = encoder_config_to_json(params.config);
}

EncoderParams Checkpoint::get_encoder(const std::string& prefix,
                                      const EncoderConfig& config) const {
  EncoderParams p = EncoderParams::initialize(config);
  p.for_each([&](const std::string& name, Matrix& m) {
    const Matrix& stored = at(prefix + name);
    if (stored.rows() != m.rows() || stored.cols() != m.cols()) {
      fail(ErrorKind::kShape, "tensor '" + prefix + name + "' has shape " +
                                  std::to_string(stored.rows()) + "x" +
                                  std::to_string(stored.cols()) + ", config expects " +
                                  std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
    }
    m = stored;
  });
  return p;
}

json encoder_config_to_json(const EncoderConfig& c) {
  return {{"vocab_size", c.vocab_size},       {"embed_dim", c.embed_dim},
          {"num_blocks", c.num_blocks},       {"num_heads", c.num_heads},
          {"max_positions", c.max_positions}, {"dropout_rate", c.dropout_rate},
          {"seed", c.seed}};
}

EncoderConfig encoder_config_from_json(const json& j) {
  EncoderConfig c;
  c.vocab_size = j.value("vocab_size", c.vocab_size);
  c.embed_dim = j.value("embed_dim", c.embed_dim);
  c.num_blocks = j.value("num_blocks", c.num_blocks);
  c.num_heads = j.value("num_heads", c.num_heads);
  c.max_positions = j.value("max_positions", c.max_positions);
  c.dropout_rate = j.value("dropout_rate", c.dropout_rate);
  c.seed = j.value("seed", c.seed);
  return c;
}

}  // namespace det
