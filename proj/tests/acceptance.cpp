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

// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <string>

#include "support.hpp"
#include "uwtrack/commands.hpp"
#include "uwtrack/dataset.hpp"
#include "uwtrack/enhance.hpp"
#include "uwtrack/image_io.hpp"
#include "uwtrack/model.hpp"
#include "uwtrack/tracking.hpp"
#include "uwtrack/train.hpp"
#include "uwtrack/voting.hpp"

using namespace uwt;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Outcome gradient_fidelity() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto cfg = testing::tiny_config(16, 1);
  const auto params = init_params<double>(cfg);
  const auto x = testing::random_image(16, 16, 11), y = testing::random_image(16, 16, 12);
  const auto rep = finite_diff_check(params, x, y, cfg);
  const double t = seconds_since(t0);
  return {rep.max_relative_error < 1e-4 && t < 60.0,
          fmt("max rel err %.3g over %zu coords (worst %s[%ld]), %.1f s", rep.max_relative_error, rep.coordinates,
              rep.worst_tensor.c_str(), long(rep.worst_index), t)};
}

Outcome overfit() {
  const auto t0 = std::chrono::steady_clock::now();
  auto cfg = testing::tiny_config(32, 0);
  const auto [raw, target] = testing::color_cast_pair(32, 32);
  const std::vector<TrainingPair<double>> batch{{raw, target}};
  auto params = init_params<double>(cfg);
  double initial = 0;
  for (int s = 0; s < 200; ++s) {
    auto [next, lb] = train_step(params, batch, 1e-2, cfg);
    if (s == 0) initial = lb.total;
    params = std::move(next);
    round_to_storage_precision(params);
  }
  const double final_loss = evaluate_objective(raw, target, params, cfg).total;
  const double reduction = 1.0 - final_loss / initial;
  const double t = seconds_since(t0);
  return {reduction >= 0.9 && t < 120.0,
          fmt("loss %.4g -> %.4g (%.1f%% drop), %.1f s", initial, final_loss, 100 * reduction, t)};
}

Outcome fusion_identity() {
  bool ok = true;
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto cfg = testing::tiny_config(16, s);
    auto p = init_params<double>(cfg);
    p.alpha = p.beta = p.gamma = 0.0;
    const auto x = testing::random_image(16, 16, 40 + s);
    const auto single = decode(encode(windowize(extract_features(x, p), cfg.window), p, cfg), p, cfg);
    ok = ok && forward(x, p, cfg).output == single;
  }
  return {ok, "5 seeds, output bit-equal to the raw-only pipeline"};
}

Outcome windowing() {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> n(0.0, 1.0);
  bool roundtrip = true;
  for (int i = 0; i < 100; ++i) {
    const int p = 1 + int(rng() % 6), h = p * (1 + int(rng() % 5)), w = p * (1 + int(rng() % 5)), c = 1 + int(rng() % 8);
    FeatureMap f(h, w, c);
    for (Eigen::Index k = 0; k < f.data().size(); ++k) f.data().data()[k] = n(rng);
    roundtrip = roundtrip && dewindowize(windowize(f, p), h, w, p, c) == f;
  }
  auto cfg = testing::tiny_config();
  cfg.layers = 0;
  const auto p0 = init_params<double>(cfg);
  Matrix<double> tokens(cfg.tokens(), cfg.token_dim());
  for (Eigen::Index k = 0; k < tokens.size(); ++k) tokens.data()[k] = n(rng);
  const bool empty_encoder = encode(tokens, p0, cfg) == Matrix<double>(tokens + p0.pos_encoding);

  cfg.layers = 2;
  const auto p2 = init_params<double>(cfg);
  EncoderCache<double> cache;
  encode(tokens, p2, cfg, &cache);
  double worst = 0;
  for (const auto& layer : cache.layers)
    for (const auto& a : layer.attention) worst = std::max(worst, (a.rowwise().sum().array() - 1.0).abs().maxCoeff());
  return {roundtrip && empty_encoder && worst <= 1e-6,
          fmt("roundtrip %s, L=0 %s, attention row-sum dev %.2g", roundtrip ? "exact" : "BROKEN",
              empty_encoder ? "exact" : "BROKEN", worst)};
}

double raster_iou(const Box& a, const Box& b) {
  long inter = 0, uni = 0;
  auto inside = [](const Box& r, int x, int y) { return x >= r.x && x < r.x + r.w && y >= r.y && y < r.y + r.h; };
  for (int y = -1; y < 64; ++y)
    for (int x = -1; x < 64; ++x) {
      const bool ia = inside(a, x, y), ib = inside(b, x, y);
      inter += ia && ib;
      uni += ia || ib;
    }
  return uni == 0 ? 0.0 : double(inter) / double(uni);
}

Outcome iou_oracle() {
  std::mt19937_64 rng(1234);
  std::uniform_int_distribution<int> pos(0, 30), ext(0, 20);
  int mismatches = 0;
  for (int i = 0; i < 1000; ++i) {
    const Box a{double(pos(rng)), double(pos(rng)), double(ext(rng)), double(ext(rng))};
    const Box b{double(pos(rng)), double(pos(rng)), double(ext(rng)), double(ext(rng))};
    mismatches += iou(a, b) != raster_iou(a, b);
  }
  const bool seventh = iou(Box{0, 0, 2, 2}, Box{1, 1, 2, 2}) == 1.0 / 7.0;
  return {mismatches == 0 && seventh, fmt("%d/1000 mismatches, 1/7 case %s", mismatches, seventh ? "exact" : "off")};
}

Outcome perfect_tracker() {
  std::vector<SequenceRecord> seqs;
  Predictions preds;
  std::mt19937_64 rng(3);
  for (int s = 0; s < 4; ++s) {
    auto rec = testing::make_sequence("seq" + std::to_string(s), 40 + 10 * std::size_t(s), Box{});
    for (auto& b : rec.boxes) b = Box{double(rng() % 300), double(rng() % 200), 5.0 + double(rng() % 80), 5.0 + double(rng() % 80)};
    preds[rec.name] = rec.boxes;
    seqs.push_back(std::move(rec));
  }
  const auto ope = ope_evaluate(seqs, preds);
  bool ok = true;
  double worst = 0;
  for (const auto& m : ope.sequences) {
    ok = ok && m.precision.precision_at_20 == 1.0 && m.success.success_at_05 == 1.0;
    worst = std::max(worst, std::abs(m.success.curve.auc - 20.0 / 21.0));
  }
  worst = std::max(worst, std::abs(ope.success.auc - 20.0 / 21.0));
  return {ok && worst <= 1e-12, fmt("%zu sequences at PR@20 = SR@0.5 = 1, |AUC - 20/21| = %.2g", ope.sequences.size(), worst)};
}

// Per-sequence numbers computed the way a spreadsheet would: one column per
// frame, one COUNTIF per threshold.
struct SheetRow {
  double pr, sr, npr;
};

SheetRow sheet_metrics(const std::vector<MaybeBox>& pred, const std::vector<MaybeBox>& gt) {
  std::vector<double> err, nerr, ov;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const Box& g = *gt[i];
    const Box& p = *pred[i];
    const double dx = (p.x + p.w / 2) - (g.x + g.w / 2), dy = (p.y + p.h / 2) - (g.y + g.h / 2);
    err.push_back(std::sqrt(dx * dx + dy * dy));
    nerr.push_back(err.back() / std::sqrt(g.w * g.w + g.h * g.h));
    const double iw = std::max(0.0, std::min(p.x + p.w, g.x + g.w) - std::max(p.x, g.x));
    const double ih = std::max(0.0, std::min(p.y + p.h, g.y + g.h) - std::max(p.y, g.y));
    ov.push_back(iw * ih / (p.w * p.h + g.w * g.h - iw * ih));
  }
  auto frac = [](const std::vector<double>& v, auto pred) {
    return double(std::count_if(v.begin(), v.end(), pred)) / double(v.size());
  };
  SheetRow r{};
  r.pr = frac(err, [](double e) { return e <= 20.0; });
  for (int k = 0; k <= 20; ++k) r.sr += frac(ov, [k](double o) { return o > k / 20.0; }) / 21.0;
  for (int k = 0; k <= 50; ++k) r.npr += frac(nerr, [k](double e) { return e <= k / 100.0; }) / 51.0;
  return r;
}

Outcome attribute_table() {
  std::vector<SequenceRecord> seqs;
  Predictions preds;
  std::map<std::string, SheetRow> sheet;
  const double shifts[3] = {3.0, 9.0, 17.0};
  for (int s = 0; s < 3; ++s) {
    auto rec = testing::make_sequence(std::string(1, char('a' + s)), 40, Box{});
    std::vector<MaybeBox> pred(40);
    for (std::size_t i = 0; i < 40; ++i) {
      const double w = 20.0 + double((i * 7 + std::size_t(s) * 5) % 30);
      rec.boxes[i] = Box{100.0 + double(i), 80.0, w, 30.0 + double(s) * 4};
      const double jitter = shifts[s] * double((i % 5)) / 2.0;
      pred[i] = Box{rec.boxes[i]->x + jitter, 80.0 - jitter / 2, w + double(i % 3), rec.boxes[i]->h};
    }
    preds[rec.name] = pred;
    sheet[rec.name] = sheet_metrics(pred, rec.boxes);
    seqs.push_back(std::move(rec));
  }
  seqs[0].attributes.uwv = Visibility::Low;
  seqs[1].attributes.uwv = Visibility::Low;
  seqs[2].attributes.uwv = Visibility::High;
  seqs[0].attributes.wcv = WaterColor::Green;
  seqs[0].attributes.set(Attribute::Camouflage);
  seqs[2].attributes.set(Attribute::Camouflage);
  seqs[1].attributes.set(Attribute::FastMotion);

  const auto rows = attribute_report(seqs, ope_evaluate(seqs, preds));
  auto expected = [&](std::vector<std::string> members) {
    SheetRow m{};
    for (const auto& n : members) {
      m.pr += sheet[n].pr / double(members.size());
      m.sr += sheet[n].sr / double(members.size());
      m.npr += sheet[n].npr / double(members.size());
    }
    return m;
  };
  const std::map<std::string, std::vector<std::string>> groups = {
      {"UWV-Low", {"a", "b"}}, {"UWV-High", {"c"}}, {"WCV-Green", {"a"}}, {"WCV-Blue", {"b", "c"}},
      {"Cam", {"a", "c"}},     {"FM", {"b"}},
  };
  double worst = 0;
  bool ok = rows.size() == 33;
  std::string low_label;
  for (const auto& row : rows) {
    if (row.label == "UWV-Low") low_label = row.display_label();
    const auto g = groups.find(row.label);
    if (g == groups.end()) {
      ok = ok && row.count == 0 && !row.pr && row.cell() == "-|-|-";
      continue;
    }
    const auto e = expected(g->second);
    ok = ok && row.count == g->second.size() && row.pr && row.sr && row.npr;
    if (!row.pr) continue;
    worst = std::max({worst, std::abs(*row.pr - e.pr), std::abs(*row.sr - e.sr), std::abs(*row.npr - e.npr)});
  }
  ok = ok && low_label == "UWV-Low (2)" && worst <= 1e-9;
  return {ok, fmt("33 rows, max |diff| %.2g vs spreadsheet, label '%s'", worst, low_label.c_str())};
}

Outcome dataset_rules() {
  const Box box{10, 10, 20, 20};
  auto kinds = [](const SequenceRecord& r) {
    std::string s;
    for (const auto& v : validate_sequence(r)) s += std::string(name(v.kind)) + " ";
    return s;
  };
  const bool bounds = kinds(testing::make_sequence("a", 39, box)) == "TooShort " &&
                      kinds(testing::make_sequence("b", 40, box)).empty() &&
                      kinds(testing::make_sequence("c", 3300, box)).empty() &&
                      kinds(testing::make_sequence("d", 3301, box)) == "TooLong ";

  auto moving = [&](double step) {
    auto r = testing::make_sequence("m", 40, box);
    for (std::size_t i = 0; i < r.boxes.size(); ++i) r.boxes[i]->x = 10 + step * double(i);
    return detect_fast_motion(r);
  };
  const bool fm = !moving(20.0) && moving(21.0);

  const bool rts = compute_rts(testing::make_sequence("r", 40, Box{0, 0, 100, 100}, 1000, 1000)).min == 0.01;

  std::vector<SequenceRecord> recs;
  std::mt19937_64 rng(400);
  for (int i = 0; i < 400; ++i) {
    auto r = testing::make_sequence(fmt("s%03d", i), 40, box);
    r.attributes.uwv = Visibility(rng() % 3);
    r.attributes.wcv = WaterColor(rng() % kWaterColors);
    for (int f = 0; f < kFlagAttributes; ++f)
      if (rng() % 4 == 0) r.attributes.set(Attribute(f));
    recs.push_back(std::move(r));
  }
  const auto split = split_dataset(recs, 0.7, 0);
  const bool split_ok = split.train == 280 && split.test == 120;
  return {bounds && fm && rts && split_ok,
          fmt("bounds %s, FM 20/21 px %s, RTS %s, 400-sequence split %zu/%zu", bounds ? "ok" : "wrong",
              fm ? "ok" : "wrong", rts ? "ok" : "wrong", split.train, split.test)};
}

Outcome voting() {
  std::mt19937_64 rng(77);
  const std::vector<std::string> pool = {"dive", "funie", "mlfc", "sgu", "ufo", "uwcnn", "waternet"};
  int mismatches = 0;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t m = 2 + rng() % 4, experts = 1 + rng() % 12;
    std::vector<std::string> methods = pool;
    std::shuffle(methods.begin(), methods.end(), rng);
    methods.resize(m);
    VoteTable table;
    table.methods = methods;
    for (std::size_t e = 0; e < experts; ++e) table.experts.push_back(fmt("e%02zu", e));
    std::vector<std::string> oracle_frames;
    for (std::size_t f = 0; f < kFramesPerVideo; ++f) {
      const auto frame = fmt("v/f%zu", f);
      table.frames.push_back(frame);
      std::map<std::string, int> counts;
      for (const auto& e : table.experts) {
        const auto& pick = methods[rng() % m];
        table.votes[{frame, e}] = pick;
        ++counts[pick];
      }
      // Exhaustive oracle: scan every method, keep the highest count, break
      // ties toward the lexicographically smaller name.
      std::string best;
      int best_count = -1;
      for (const auto& meth : pool) {
        const int c = counts.count(meth) ? counts[meth] : 0;
        if (c > best_count || (c == best_count && meth < best)) {
          best = meth;
          best_count = c;
        }
      }
      oracle_frames.push_back(best);
    }
    std::map<std::string, int> fc;
    for (const auto& w : oracle_frames) ++fc[w];
    std::string video_best;
    int video_count = -1;
    for (const auto& meth : pool)
      if (fc.count(meth) && fc[meth] > video_count) {
        video_best = meth;
        video_count = fc[meth];
      }

    const auto winners = vote_frame_winners(table);
    std::vector<std::string> got;
    for (const auto& f : table.frames) got.push_back(winners.at(f));
    std::reverse(table.experts.begin(), table.experts.end());
    std::reverse(table.frames.begin(), table.frames.end());
    const bool stable = vote_frame_winners(table) == winners;
    mismatches += got != oracle_frames || vote_video_winner(winners).method != video_best || !stable;
  }
  return {mismatches == 0, fmt("%d/1000 tables disagree with the counting oracle", mismatches)};
}

Outcome classical_ops() {
  std::mt19937_64 rng(55);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  bool gamma_id = true, mono = true;
  double wb_dev = 0;
  for (int t = 0; t < 50; ++t) {
    const auto img = testing::random_image(9 + t % 7, 11, 1000 + std::uint64_t(t));
    gamma_id = gamma_id && gamma_correct(img, 1.0) == img;

    RowMatrix<double> tinted = img.pixels();
    for (int c = 0; c < 3; ++c) tinted.col(c) *= 0.3 + 0.2 * c + 0.1 * u(rng);
    const auto wb = white_balance(Image(img.height(), img.width(), tinted)).image;
    const auto means = wb.pixels().colwise().mean();
    wb_dev = std::max(wb_dev, means.maxCoeff() - means.minCoeff());

    const auto he = hist_equalize(img);
    for (int c = 0; c < 3; ++c)
      for (Eigen::Index i = 0; i < img.pixels().rows(); ++i)
        for (Eigen::Index j = 0; j < img.pixels().rows(); ++j)
          if (img.pixels()(i, c) < img.pixels()(j, c) && he.pixels()(i, c) > he.pixels()(j, c)) mono = false;
  }
  return {gamma_id && wb_dev <= 1e-6 && mono, fmt("gamma 1 identity %s, WB mean spread %.2g, HE order %s",
                                                  gamma_id ? "ok" : "broken", wb_dev, mono ? "kept" : "broken")};
}

int cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  if (!err.str().empty()) std::fprintf(stderr, "%s", err.str().c_str());
  return code;
}

Outcome determinism() {
  testing::TempDir dir;
  auto [raw, target] = testing::color_cast_pair(16, 16);
  io::write_image(dir / "raw.uwimg", raw);
  io::write_image(dir / "target.uwimg", target);
  testing::write_file(dir / "pairs.json", R"({"pairs": [{"raw": "raw.uwimg", "target": "target.uwimg"}]})");

  std::vector<MaybeBox> gt(45, Box{50, 60, 40, 30}), pred = gt;
  for (std::size_t i = 0; i < gt.size(); ++i) pred[i]->x += double(i % 9) * 1.7;
  pred[20].reset();
  testing::write_file(dir / "gt.txt", serialize_annotations(gt));
  testing::write_file(dir / "trk/s1.txt", serialize_annotations(pred));
  testing::write_file(dir / "trk/s2.txt", serialize_annotations(gt));
  std::string manifest = R"({"name": "d", "sequences": [)";
  for (int i = 1; i <= 6; ++i)
    manifest += fmt(R"(%s{"name": "s%d", "width": 640, "height": 480, "annotation": "gt.txt",
                     "attributes": {"uwv": "%s", "flags": ["Cam"]}})",
                    i > 1 ? "," : "", i, i % 2 ? "Low" : "High");
  testing::write_file(dir / "manifest.json", manifest + "]}");
  testing::write_file(dir / "two.json", R"({"sequences": [
    {"name": "s1", "width": 640, "height": 480, "annotation": "gt.txt"},
    {"name": "s2", "width": 640, "height": 480, "annotation": "gt.txt"}]})");
  std::string votes;
  for (int f = 0; f < 10; ++f)
    for (int e = 0; e < 5; ++e) votes += fmt("v/f%d,e%d,%s\n", f, e, (f * e) % 3 ? "dive" : "ufo");
  testing::write_file(dir / "votes.csv", votes);

  const std::vector<std::string> files = {"model.uwtr",      "train_log.jsonl", "report.json",
                                          "attributes.csv",  "attribute_table.csv", "plot_success.csv",
                                          "votes.json",      "validation.json", "split.json"};
  auto run_all = [&](const std::string& tag) {
    const auto out = (dir / tag).string();
    int rc = cli({"--seed", "5", "--out", out, "train", "--pairs", (dir / "pairs.json").string(), "--steps", "3"});
    rc |= cli({"--out", out, "eval", "--manifest", (dir / "two.json").string(), "--results", (dir / "trk").string()});
    rc |= cli({"--out", out, "vote", "--votes", (dir / "votes.csv").string()});
    rc |= cli({"--seed", "5", "--out", out, "validate", "--manifest", (dir / "manifest.json").string(),
               "--split-ratio", "0.5"});
    std::map<std::string, std::string> contents;
    for (const auto& f : files) contents[f] = testing::read_file(dir / tag / f);
    return std::pair(rc, contents);
  };
  const auto [rc1, first] = run_all("run1");
  const auto [rc2, second] = run_all("run2");
  std::size_t identical = 0, non_empty = 0;
  for (const auto& f : files) {
    identical += first.at(f) == second.at(f);
    non_empty += !first.at(f).empty();
  }
  return {rc1 == 0 && rc2 == 0 && identical == files.size() && non_empty == files.size(),
          fmt("%zu/%zu outputs byte-identical across two seeded runs", identical, files.size())};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"gradient fidelity", gradient_fidelity},
      {"overfit", overfit},
      {"fusion identity", fusion_identity},
      {"windowing and encoder", windowing},
      {"iou oracle", iou_oracle},
      {"perfect tracker", perfect_tracker},
      {"attribute table", attribute_table},
      {"dataset rules", dataset_rules},
      {"voting", voting},
      {"classical ops", classical_ops},
      {"determinism", determinism},
  };
  int failed = 0;
  for (const auto& [label, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("[%s] %s: %s\n", o.pass ? "PASS" : "FAIL", label.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", int(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
