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

#pragma once

#include <filesystem>
#include <iosfwd>

#include "uwtrack/model.hpp"

namespace uwt {

/// Binary checkpoint layout (all integers little-endian):
///
///   "UWTR1"                                   5-byte magic
///   u32 height, width, window, channels, layers, heads, mlp_hidden
///   f64 pre_gamma, u64 seed
///   u32 tensor_count
///   per tensor: u32 name_length, name bytes, u32 rank, rank x u32 dims,
///               prod(dims) x f32 payload (row-major)
///
/// Parameters initialized by init_params() or loaded from a checkpoint are
/// float32-exact, so save -> load reproduces them bit for bit.
struct Checkpoint {
  ModelConfig config;
  ModelParams<double> params;
};

void save_checkpoint(std::ostream& out, const ModelConfig& cfg, const ModelParams<double>& params);
Checkpoint load_checkpoint(std::istream& in);

void save_checkpoint(const std::filesystem::path& path, const ModelConfig& cfg, const ModelParams<double>& params);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace uwt
