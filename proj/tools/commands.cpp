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

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "uwtrack/checkpoint.hpp"
#include "uwtrack/commands.hpp"
#include "uwtrack/dataset.hpp"
#include "uwtrack/enhance.hpp"
#include "uwtrack/image_io.hpp"
#include "uwtrack/parallel.hpp"
#include "uwtrack/report.hpp"
#include "uwtrack/train.hpp"
#include "uwtrack/voting.hpp"

namespace uwt::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out || !out.write(text.data(), std::streamsize(text.size())))
    throw Error(ErrorCode::IoError, "cannot write " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::UnreadableInput, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void prepare_out(const GlobalOptions& g) {
  std::error_code ec;
  fs::create_directories(g.out, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + g.out.string() + ": " + ec.message());
}

void write_snapshot(const GlobalOptions& g, const std::string& command, ordered_json options) {
  ordered_json j;
  j["command"] = command;
  j["seed"] = g.seed;
  j["threads"] = g.threads;
  j["out"] = g.out.string();
  j["options"] = std::move(options);
  write_text(g.out / "config.json", j.dump(2) + "\n");
}

ordered_json number_or_inf(double v) { return std::isfinite(v) ? ordered_json(v) : ordered_json("inf"); }

std::vector<fs::path> list_images(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error(ErrorCode::UnreadableInput, "input directory " + dir.string() + " not found");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && io::is_supported_image(e.path())) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw Error(ErrorCode::UnreadableInput, "no readable images in " + dir.string());
  return files;
}

std::string model_shape(const ModelConfig& cfg) {
  return std::to_string(cfg.height) + "x" + std::to_string(cfg.width);
}

}  // namespace

// ---------------------------------------------------------------------------

int cmd_enhance(const GlobalOptions& g, const EnhanceOptions& o, std::ostream& log) {
  const std::vector<std::string> methods = {"wb", "gamma", "he", "uwie-tr"};
  if (std::find(methods.begin(), methods.end(), o.method) == methods.end())
    throw Error(ErrorCode::InvalidConfig, "unknown method '" + o.method + "'");
  if (o.method == "gamma" && !(o.gamma > 0.0)) throw Error(ErrorCode::InvalidGamma, "gamma must be positive");

  std::optional<Checkpoint> ckpt;
  if (o.method == "uwie-tr") {
    if (!o.checkpoint) throw Error(ErrorCode::MissingCheckpoint, "method uwie-tr needs --checkpoint");
    ckpt = load_checkpoint(*o.checkpoint);
  }
  const auto files = list_images(o.input);
  prepare_out(g);
  if (fs::equivalent(g.out, o.input))
    throw Error(ErrorCode::InvalidConfig, "output directory must differ from the input directory");

  struct FrameResult {
    Image image;
    double psnr = 0;
    bool wb_warning = false;
  };
  std::vector<std::optional<FrameResult>> results(files.size());
  parallel_for(files.size(), g.threads, [&](std::size_t i) {
    const auto name = files[i].filename().string();
    try {
      Image in = io::read_image(files[i]);
      FrameResult r{in};
      if (o.method == "wb") {
        auto wb = white_balance(in);
        r.image = std::move(wb.image);
        r.wb_warning = wb.warning();
      } else if (o.method == "gamma") {
        r.image = gamma_correct(in, o.gamma);
      } else if (o.method == "he") {
        r.image = hist_equalize(in);
      } else {
        const auto& cfg = ckpt->config;
        if (in.height() % cfg.window != 0 || in.width() % cfg.window != 0)
          throw Error(ErrorCode::IndivisibleWindow, "window " + std::to_string(cfg.window) + " does not divide " +
                                                        std::to_string(in.height()) + "x" + std::to_string(in.width()));
        if (in.height() != cfg.height || in.width() != cfg.width)
          throw Error(ErrorCode::ShapeMismatch, "image is " + std::to_string(in.height()) + "x" +
                                                    std::to_string(in.width()) + ", model expects " + model_shape(cfg));
        r.image = enhance(in, ckpt->params, cfg);
      }
      r.psnr = psnr(r.image, in);
      results[i] = std::move(r);
    } catch (const Error& e) {
      throw Error(e.code(), "frame " + name + ": " + e.message());
    }
  });

  ordered_json frames = ordered_json::array();
  for (std::size_t i = 0; i < files.size(); ++i) {
    const auto name = files[i].filename();
    io::write_image(g.out / name, results[i]->image);
    ordered_json f;
    f["file"] = name.string();
    f["psnr_vs_input"] = number_or_inf(results[i]->psnr);
    if (results[i]->wb_warning) {
      f["warning"] = "zero-mean channel left unscaled";
      log << "warning: " << name.string() << ": zero-mean channel left unscaled\n";
    }
    frames.push_back(std::move(f));
  }
  ordered_json summary;
  summary["method"] = o.method;
  summary["frames"] = std::move(frames);
  write_text(g.out / "summary.json", summary.dump(2) + "\n");

  ordered_json opts;
  opts["input"] = o.input.string();
  opts["method"] = o.method;
  opts["gamma"] = o.gamma;
  opts["checkpoint"] = o.checkpoint ? ordered_json(o.checkpoint->string()) : ordered_json(nullptr);
  write_snapshot(g, "enhance", opts);
  log << "enhanced " << files.size() << " frame(s) with " << o.method << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

int cmd_train(const GlobalOptions& g, const TrainOptions& o, std::ostream& log) {
  if (o.steps < 0) throw Error(ErrorCode::InvalidConfig, "steps must be >= 0");
  if (o.latent != "all" && o.latent != "fused") throw Error(ErrorCode::InvalidConfig, "latent must be all or fused");

  ordered_json manifest;
  try {
    manifest = ordered_json::parse(read_text(o.pairs));
  } catch (const ordered_json::exception& e) {
    throw Error(ErrorCode::MalformedManifest, o.pairs.string() + ": " + e.what());
  }
  if (!manifest.contains("pairs") || !manifest["pairs"].is_array())
    throw Error(ErrorCode::MalformedManifest, o.pairs.string() + ": needs a \"pairs\" array");
  const auto base = o.pairs.parent_path();
  auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : base / p; };

  std::vector<TrainingPair<double>> batch;
  std::vector<std::string> names;
  for (const auto& p : manifest["pairs"]) {
    if (!p.contains("raw") || !p.contains("target"))
      throw Error(ErrorCode::MalformedManifest, "each pair needs \"raw\" and \"target\"");
    const std::string name = p.value("name", p["raw"].get<std::string>());
    Image raw = io::read_image(resolve(p["raw"].get<std::string>()));
    Image target = io::read_image(resolve(p["target"].get<std::string>()));
    if (raw.height() != target.height() || raw.width() != target.width())
      throw Error(ErrorCode::ShapeMismatch, "pair '" + name + "': raw and target sizes differ");
    if (!batch.empty() && (raw.height() != batch.front().raw.height() || raw.width() != batch.front().raw.width()))
      throw Error(ErrorCode::ShapeMismatch, "pair '" + name + "': size differs from pair '" + names.front() + "'");
    batch.push_back({std::move(raw), std::move(target)});
    names.push_back(name);
  }
  if (batch.empty()) throw Error(ErrorCode::EmptyManifest, o.pairs.string() + ": no training pairs");

  ModelConfig cfg;
  cfg.height = batch.front().raw.height();
  cfg.width = batch.front().raw.width();
  cfg.window = o.window;
  cfg.channels = o.channels;
  cfg.layers = o.layers;
  cfg.heads = o.heads;
  cfg.mlp_hidden = o.mlp_hidden;
  cfg.pre_gamma = o.pre_gamma;
  cfg.seed = g.seed;
  cfg.validate();

  LossOptions<double> lopts;
  lopts.latent_mode = o.latent == "fused" ? LatentLossMode::FusedOnly : LatentLossMode::AllBranches;

  prepare_out(g);
  const fs::path ckpt_path = o.checkpoint_out.value_or(g.out / "model.uwtr");
  std::ofstream jsonl(g.out / "train_log.jsonl", std::ios::binary);
  if (!jsonl) throw Error(ErrorCode::IoError, "cannot write training log");

  // One record per step, describing the parameters before that step's update.
  auto record = [&](int step, const LossBreakdown& lb, const ModelParams<double>& p) {
    double mean_psnr = 0;
    for (const auto& pair : batch) mean_psnr += psnr(enhance(pair.raw, p, cfg), pair.target);
    mean_psnr /= double(batch.size());
    ordered_json j;
    j["step"] = step;
    j["total"] = lb.total;
    j["appearance"] = lb.lambda_appearance * lb.appearance;
    j["perceptual"] = lb.lambda_perceptual * lb.perceptual;
    j["latent"] = lb.lambda_latent * lb.latent;
    j["psnr"] = number_or_inf(mean_psnr);
    j["alpha"] = p.alpha;
    j["beta"] = p.beta;
    j["gamma"] = p.gamma;
    jsonl << j.dump() << "\n";
  };

  auto params = init_params<double>(cfg);
  for (int s = 0; s < o.steps; ++s) {
    auto [next, lb] = train_step(params, batch, o.lr, cfg, lopts, g.threads);
    record(s, lb, params);
    params = std::move(next);
    round_to_storage_precision(params);
  }
  std::vector<LossBreakdown> parts;
  for (const auto& p : batch) parts.push_back(evaluate_objective(p.raw, p.target, params, cfg, lopts));
  const auto final_loss = mean_breakdown(parts);
  record(o.steps, final_loss, params);
  save_checkpoint(ckpt_path, cfg, params);

  ordered_json opts;
  opts["pairs"] = o.pairs.string();
  opts["checkpoint_out"] = ckpt_path.string();
  opts["steps"] = o.steps;
  opts["lr"] = o.lr;
  opts["height"] = cfg.height;
  opts["width"] = cfg.width;
  opts["window"] = cfg.window;
  opts["channels"] = cfg.channels;
  opts["layers"] = cfg.layers;
  opts["heads"] = cfg.heads;
  opts["mlp_hidden"] = cfg.hidden();
  opts["pre_gamma"] = cfg.pre_gamma;
  opts["latent"] = o.latent;
  write_snapshot(g, "train", opts);
  log << "trained " << o.steps << " step(s) on " << batch.size() << " pair(s); final loss " << final_loss.total
      << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

int cmd_eval(const GlobalOptions& g, const EvalOptionsCli& o, std::ostream& log) {
  if (o.results.empty()) throw Error(ErrorCode::InvalidConfig, "at least one --results directory is required");
  EvalOptions eo;
  if (o.norm_mode == "diagonal")
    eo.norm_mode = NormMode::Diagonal;
  else if (o.norm_mode == "per-axis")
    eo.norm_mode = NormMode::PerAxis;
  else
    throw Error(ErrorCode::InvalidConfig, "norm mode must be diagonal or per-axis");
  eo.threads = g.threads;
  if (o.split != "all" && o.split != "train" && o.split != "test")
    throw Error(ErrorCode::InvalidConfig, "split must be all, train or test");

  const auto ds = load_manifest(o.manifest);
  std::vector<SequenceRecord> seqs;
  for (const auto& s : ds.sequences)
    if (o.split == "all" || name(s.split) == o.split) seqs.push_back(s);
  if (seqs.empty()) throw Error(ErrorCode::EmptySequence, "no sequences selected for evaluation");

  std::vector<TrackerEvaluation> evals;
  for (const auto& dir : o.results) {
    auto tracker = dir.filename().string();
    if (tracker.empty()) tracker = dir.parent_path().filename().string();
    const auto preds = read_predictions(dir, seqs);
    try {
      evals.push_back(evaluate_tracker(tracker, seqs, preds, eo));
    } catch (const Error& e) {
      throw Error(e.code(), "tracker '" + tracker + "': " + e.message());
    }
  }

  prepare_out(g);
  write_text(g.out / "report.json", report_json(evals));
  write_text(g.out / "attributes.csv", attribute_csv(evals));
  write_text(g.out / "attribute_table.csv", attribute_table_csv(evals));
  for (auto kind : {CurveKind::Precision, CurveKind::Success, CurveKind::NormPrecision})
    write_text(g.out / ("plot_" + std::string(name(kind)) + ".csv"), plot_csv(evals, kind));

  ordered_json opts;
  opts["manifest"] = o.manifest.string();
  ordered_json dirs = ordered_json::array();
  for (const auto& d : o.results) dirs.push_back(d.string());
  opts["results"] = dirs;
  opts["norm_mode"] = o.norm_mode;
  opts["split"] = o.split;
  write_snapshot(g, "eval", opts);
  for (const auto& e : evals)
    log << e.tracker << ": PR@20 " << e.ope.precision_at_20 << ", SR AUC " << e.ope.success.auc << ", NPR AUC "
        << e.ope.norm_precision.auc << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

int cmd_vote(const GlobalOptions& g, const VoteOptions& o, std::ostream& log) {
  const auto tables = parse_vote_csv(read_text(o.votes));
  if (tables.empty()) throw Error(ErrorCode::EmptyTable, o.votes.string() + ": no votes");
  ordered_json out;
  for (const auto& [video, table] : tables) {
    const auto frames = vote_frame_winners(table);
    const auto winner = vote_video_winner(frames);
    ordered_json v;
    v["frames"] = ordered_json::object();
    for (const auto& [frame, method] : frames) v["frames"][frame] = method;
    v["winner"] = winner.method;
    if (winner.warning) {
      v["warning"] = *winner.warning;
      log << "warning: video '" << video << "': " << *winner.warning << "\n";
    }
    out[video] = std::move(v);
  }
  prepare_out(g);
  write_text(g.out / "votes.json", out.dump(2) + "\n");
  ordered_json opts;
  opts["votes"] = o.votes.string();
  write_snapshot(g, "vote", opts);
  log << "voted " << tables.size() << " video(s)\n";
  return 0;
}

// ---------------------------------------------------------------------------

int cmd_validate(const GlobalOptions& g, const ValidateOptions& o, std::ostream& log) {
  const auto ds = load_manifest(o.manifest);
  ordered_json seqs = ordered_json::array();
  std::size_t violations = 0;
  for (const auto& s : ds.sequences) {
    ordered_json v = ordered_json::array();
    for (const auto& viol : validate_sequence(s)) {
      ordered_json item;
      item["kind"] = std::string(name(viol.kind));
      item["frame"] = viol.frame ? ordered_json(*viol.frame) : ordered_json(nullptr);
      v.push_back(std::move(item));
      log << s.name << ": " << viol.describe() << "\n";
      ++violations;
    }
    ordered_json entry;
    entry["name"] = s.name;
    entry["frames"] = s.frame_paths.empty() ? s.frame_count : s.frame_paths.size();
    entry["violations"] = std::move(v);
    seqs.push_back(std::move(entry));
  }
  prepare_out(g);
  ordered_json report;
  report["dataset"] = ds.name;
  report["valid"] = violations == 0;
  report["violation_count"] = violations;
  report["sequences"] = std::move(seqs);
  write_text(g.out / "validation.json", report.dump(2) + "\n");

  if (o.split_ratio) {
    const auto split = split_dataset(ds.sequences, *o.split_ratio, g.seed);
    ordered_json sj = ordered_json::object();
    for (const auto& [seq, s] : split.assignment) sj[seq] = std::string(name(s));
    write_text(g.out / "split.json", sj.dump(2) + "\n");
    for (const auto& w : split.warnings) log << "warning: " << w << "\n";
    log << "split: " << split.train << " train / " << split.test << " test\n";
  }

  ordered_json opts;
  opts["manifest"] = o.manifest.string();
  opts["split_ratio"] = o.split_ratio ? ordered_json(*o.split_ratio) : ordered_json(nullptr);
  write_snapshot(g, "validate", opts);
  log << ds.sequences.size() << " sequence(s), " << violations << " violation(s)\n";
  return violations == 0 ? 0 : 1;
}

}  // namespace uwt::cli
