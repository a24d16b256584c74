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

#include <ostream>

#include <CLI11.hpp>

#include "uwtrack/commands.hpp"
#include "uwtrack/parallel.hpp"

namespace uwt::cli {

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Underwater tracking toolkit: enhancement, training, evaluation and dataset tools", "uwtrack"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Read options from a TOML/INI file");

  GlobalOptions g;
  g.threads = default_thread_count();
  app.add_option("--seed", g.seed, "Seed for every random choice")->capture_default_str();
  app.add_option("--threads", g.threads, "Worker threads (default: logical cores)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app.add_option("--out", g.out, "Output directory")->capture_default_str();

  EnhanceOptions eo;
  auto* enhance = app.add_subcommand("enhance", "Enhance every image in a directory");
  enhance->add_option("--input", eo.input, "Directory of .png/.ppm/.uwimg frames")->required();
  enhance->add_option("--method", eo.method, "wb, gamma, he or uwie-tr")
      ->check(CLI::IsMember({"wb", "gamma", "he", "uwie-tr"}))
      ->capture_default_str();
  enhance->add_option("--gamma", eo.gamma, "Exponent for --method gamma")->capture_default_str();
  enhance->add_option("--checkpoint", eo.checkpoint, "Model checkpoint for --method uwie-tr");

  TrainOptions to;
  auto* train = app.add_subcommand("train", "Train the enhancement model on raw/target pairs");
  train->add_option("--pairs", to.pairs, "JSON manifest {\"pairs\": [{\"raw\", \"target\"}]}")->required();
  train->add_option("--checkpoint-out", to.checkpoint_out, "Checkpoint path (default: <out>/model.uwtr)");
  train->add_option("--steps", to.steps, "Gradient-descent steps")->capture_default_str();
  train->add_option("--lr", to.lr, "Learning rate")->capture_default_str();
  train->add_option("--window", to.window, "Token window side")->capture_default_str();
  train->add_option("--channels", to.channels, "Feature channels")->capture_default_str();
  train->add_option("--layers", to.layers, "Encoder layers")->capture_default_str();
  train->add_option("--heads", to.heads, "Attention heads")->capture_default_str();
  train->add_option("--mlp-hidden", to.mlp_hidden, "MLP width (0: twice the token size)")->capture_default_str();
  train->add_option("--pre-gamma", to.pre_gamma, "Exponent of the gamma branch")->capture_default_str();
  train->add_option("--latent", to.latent, "Latent loss over all branches or the fused latent only")
      ->check(CLI::IsMember({"all", "fused"}))
      ->capture_default_str();

  EvalOptionsCli vo;
  auto* eval = app.add_subcommand("eval", "Evaluate tracker results against a dataset");
  eval->add_option("--manifest", vo.manifest, "Dataset manifest (JSON)")->required();
  eval->add_option("--results", vo.results, "Prediction directory per tracker (<sequence>.txt)")->required();
  eval->add_option("--norm-mode", vo.norm_mode, "diagonal or per-axis")
      ->check(CLI::IsMember({"diagonal", "per-axis"}))
      ->capture_default_str();
  eval->add_option("--split", vo.split, "all, train or test")
      ->check(CLI::IsMember({"all", "train", "test"}))
      ->capture_default_str();

  VoteOptions wo;
  auto* vote = app.add_subcommand("vote", "Majority vote over expert method choices");
  vote->add_option("--votes", wo.votes, "CSV of frame_id,expert_id,method_id")->required();

  ValidateOptions lo;
  auto* validate = app.add_subcommand("validate", "Check a dataset manifest against the sequence rules");
  validate->add_option("--manifest", lo.manifest, "Dataset manifest (JSON)")->required();
  validate->add_option("--split-ratio", lo.split_ratio, "Also write a stratified train/test split");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (enhance->parsed()) return cmd_enhance(g, eo, out);
    if (train->parsed()) return cmd_train(g, to, out);
    if (eval->parsed()) return cmd_eval(g, vo, out);
    if (vote->parsed()) return cmd_vote(g, wo, out);
    if (validate->parsed()) return cmd_validate(g, lo, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv;
  argv.reserve(args.size() + 1);
  argv.push_back("uwtrack");
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(int(argv.size()), argv.data(), out, err);
}

}  // namespace uwt::cli
