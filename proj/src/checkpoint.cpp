// Copyright 2026 The uwtrack Authors
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

#include "uwtrack/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

namespace uwt {

namespace {

constexpr char kMagic[5] = {'U', 'W', 'T', 'R', '1'};

template <typename T>
void put(std::ostream& out, T v) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
  U bits = std::bit_cast<U>(v);
  unsigned char b[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), sizeof b);
}

template <typename T>
T get(std::istream& in) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
  unsigned char b[sizeof(U)];
  if (!in.read(reinterpret_cast<char*>(b), sizeof b)) throw Error(ErrorCode::BadCheckpoint, "truncated checkpoint");
  U bits = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) bits |= U(b[i]) << (8 * i);
  return std::bit_cast<T>(bits);
}

}  // namespace

void save_checkpoint(std::ostream& out, const ModelConfig& cfg, const ModelParams<double>& params) {
  check_params(params, cfg);
  out.write(kMagic, sizeof kMagic);
  for (int v : {cfg.height, cfg.width, cfg.window, cfg.channels, cfg.layers, cfg.heads, cfg.mlp_hidden})
    put(out, std::uint32_t(v));
  put(out, cfg.pre_gamma);
  put(out, std::uint64_t(cfg.seed));
  const auto tensors = params.tensors();
  put(out, std::uint32_t(tensors.size()));
  for (const auto& t : tensors) {
    put(out, std::uint32_t(t.name.size()));
    out.write(t.name.data(), std::streamsize(t.name.size()));
    put(out, std::uint32_t(t.shape.size()));
    for (auto d : t.shape) put(out, std::uint32_t(d));
    // Eigen storage is column-major; the payload is written row-major.
    if (t.shape.size() == 2) {
      const Eigen::Index rows = t.shape[0], cols = t.shape[1];
      for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) put(out, float(t.data[c * rows + r]));
    } else {
      for (Eigen::Index i = 0; i < t.size; ++i) put(out, float(t.data[i]));
    }
  }
  if (!out) throw Error(ErrorCode::IoError, "failed to write checkpoint");
}

Checkpoint load_checkpoint(std::istream& in) {
  char magic[5];
  if (!in.read(magic, 5) || std::memcmp(magic, kMagic, 5) != 0)
    throw Error(ErrorCode::BadCheckpoint, "missing UWTR1 magic");
  Checkpoint ck;
  ModelConfig& cfg = ck.config;
  for (int* field : {&cfg.height, &cfg.width, &cfg.window, &cfg.channels, &cfg.layers, &cfg.heads, &cfg.mlp_hidden})
    *field = int(get<std::uint32_t>(in));
  cfg.pre_gamma = get<double>(in);
  cfg.seed = get<std::uint64_t>(in);
  try {
    cfg.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::BadCheckpoint, std::string("invalid configuration block: ") + e.what());
  }

  // The shape template comes from the configuration; the stream must match it.
  ModelConfig shape_cfg = cfg;
  ck.params = init_params<double>(shape_cfg);
  auto tensors = ck.params.tensors();
  const auto count = get<std::uint32_t>(in);
  if (count != tensors.size())
    throw Error(ErrorCode::BadCheckpoint, "expected " + std::to_string(tensors.size()) + " tensors, found " +
                                              std::to_string(count));
  for (auto& t : tensors) {
    const auto len = get<std::uint32_t>(in);
    if (len > 4096) throw Error(ErrorCode::BadCheckpoint, "implausible tensor name length");
    std::string name(len, '\0');
    if (!in.read(name.data(), len)) throw Error(ErrorCode::BadCheckpoint, "truncated tensor name");
    if (name != t.name) throw Error(ErrorCode::BadCheckpoint, "expected tensor " + t.name + ", found " + name);
    const auto rank = get<std::uint32_t>(in);
    if (rank != t.shape.size()) throw Error(ErrorCode::BadCheckpoint, "rank mismatch for " + name);
    for (auto d : t.shape)
      if (get<std::uint32_t>(in) != std::uint32_t(d)) throw Error(ErrorCode::BadCheckpoint, "shape mismatch for " + name);
    if (t.shape.size() == 2) {
      const Eigen::Index rows = t.shape[0], cols = t.shape[1];
      for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) t.data[c * rows + r] = double(get<float>(in));
    } else {
      for (Eigen::Index i = 0; i < t.size; ++i) t.data[i] = double(get<float>(in));
    }
  }
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const ModelConfig& cfg, const ModelParams<double>& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot create " + path.string());
  save_checkpoint(out, cfg, params);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::MissingCheckpoint, "cannot open " + path.string());
  return load_checkpoint(in);
}

}  // namespace uwt
