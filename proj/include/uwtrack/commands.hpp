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

// Batch commands behind the `uwtrack` executable. Each command writes its
// outputs plus a resolved-config snapshot (config.json) into the output
// directory and returns the process exit status.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "uwtrack/model.hpp"
#include "uwtrack/tracking.hpp"

namespace uwt::cli {

struct GlobalOptions {
  std::uint64_t seed = 0;
  unsigned threads = 1;
  std::filesystem::path out = "uwtrack-out";
};

struct EnhanceOptions {
  std::filesystem::path input;
  std::string method = "wb";  // wb | gamma | he | uwie-tr
  double gamma = 0.7;
  std::optional<std::filesystem::path> checkpoint;
};

struct TrainOptions {
  std::filesystem::path pairs;  // JSON manifest of raw/target image pairs
  std::optional<std::filesystem::path> checkpoint_out;
  int steps = 200;
  double lr = 1e-2;
  int window = 4;
  int channels = 8;
  int layers = 1;
  int heads = 4;
  int mlp_hidden = 0;
  double pre_gamma = 0.7;
  std::string latent = "all";  // all | fused
};

struct EvalOptionsCli {
  std::filesystem::path manifest;
  std::vector<std::filesystem::path> results;  // one directory per tracker
  std::string norm_mode = "diagonal";          // diagonal | per-axis
  std::string split = "all";                   // all | train | test
};

struct VoteOptions {
  std::filesystem::path votes;
};

struct ValidateOptions {
  std::filesystem::path manifest;
  std::optional<double> split_ratio;
};

int cmd_enhance(const GlobalOptions& g, const EnhanceOptions& o, std::ostream& log);
int cmd_train(const GlobalOptions& g, const TrainOptions& o, std::ostream& log);
int cmd_eval(const GlobalOptions& g, const EvalOptionsCli& o, std::ostream& log);
int cmd_vote(const GlobalOptions& g, const VoteOptions& o, std::ostream& log);
int cmd_validate(const GlobalOptions& g, const ValidateOptions& o, std::ostream& log);

/// Parses the command line and dispatches. Library errors are reported on
/// `err` and yield exit status 1; usage errors yield CLI11's status.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace uwt::cli
