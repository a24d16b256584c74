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

#include "uwtrack/tracking.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include "uwtrack/parallel.hpp"

namespace uwt {

namespace {

const Box& require(const MaybeBox& b, const char* which) {
  if (!b) throw Error(ErrorCode::AbsentBox, std::string(which) + " box is absent");
  return *b;
}

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<double> grid(int points, double denominator) {
  std::vector<double> t(points);
  for (int i = 0; i < points; ++i) t[i] = double(i) / denominator;
  return t;
}

double mean(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / double(v.size());
}

// Fraction of `values` satisfying `pass(value, threshold)` at every threshold.
template <typename Pass>
EvalCurve curve_from(const std::vector<double>& values, std::vector<double> thresholds, Pass pass) {
  EvalCurve c;
  c.scores.resize(thresholds.size());
  for (std::size_t i = 0; i < thresholds.size(); ++i) {
    std::size_t hits = 0;
    for (double v : values) hits += pass(v, thresholds[i]);
    c.scores[i] = double(hits) / double(values.size());
  }
  c.thresholds = std::move(thresholds);
  c.auc = mean(c.scores);
  return c;
}

// Per-frame errors over frames with a present ground truth; a missing
// prediction is an infinite error.
template <typename Measure>
std::vector<double> counted_errors(std::span<const FramePair> frames, Measure measure) {
  std::vector<double> errors;
  errors.reserve(frames.size());
  for (const auto& f : frames) {
    if (!f.gt) continue;
    errors.push_back(f.pred ? measure(*f.pred, *f.gt) : kInf);
  }
  if (errors.empty()) throw Error(ErrorCode::EmptySequence, "no frame with a present ground truth");
  return errors;
}

}  // namespace

double iou(const Box& a, const Box& b) {
  const double iw = std::max(0.0, std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x));
  const double ih = std::max(0.0, std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y));
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  if (uni <= 0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

double iou(const MaybeBox& a, const MaybeBox& b) { return iou(require(a, "first"), require(b, "second")); }

double center_error(const Box& a, const Box& b) {
  return std::hypot(a.center_x() - b.center_x(), a.center_y() - b.center_y());
}

double center_error(const MaybeBox& a, const MaybeBox& b) {
  return center_error(require(a, "first"), require(b, "second"));
}

double norm_center_error(const Box& pred, const Box& gt, NormMode mode) {
  if (mode == NormMode::PerAxis) {
    if (gt.w <= 0 || gt.h <= 0) throw Error(ErrorCode::DegenerateGT, "ground-truth box has zero width or height");
    return std::hypot((pred.center_x() - gt.center_x()) / gt.w, (pred.center_y() - gt.center_y()) / gt.h);
  }
  const double diag = gt.diagonal();
  if (diag <= 0) throw Error(ErrorCode::DegenerateGT, "ground-truth box has zero diagonal");
  return center_error(pred, gt) / diag;
}

double norm_center_error(const MaybeBox& pred, const MaybeBox& gt, NormMode mode) {
  return norm_center_error(require(pred, "predicted"), require(gt, "ground-truth"), mode);
}

std::vector<FramePair> zip_frames(const std::vector<MaybeBox>& pred, const std::vector<MaybeBox>& gt) {
  if (pred.size() != gt.size())
    throw Error(ErrorCode::FrameCountMismatch,
                std::to_string(pred.size()) + " predictions for " + std::to_string(gt.size()) + " frames");
  std::vector<FramePair> out(gt.size());
  for (std::size_t i = 0; i < gt.size(); ++i) out[i] = {pred[i], gt[i]};
  return out;
}

std::vector<double> precision_thresholds() { return grid(kPrecisionPoints, 1.0); }
std::vector<double> success_thresholds() { return grid(kSuccessPoints, 20.0); }
std::vector<double> norm_precision_thresholds() { return grid(kNormPrecisionPoints, 100.0); }

PrecisionResult precision_curve(std::span<const FramePair> frames) {
  const auto errors = counted_errors(frames, [](const Box& p, const Box& g) { return center_error(p, g); });
  PrecisionResult r;
  r.curve = curve_from(errors, precision_thresholds(), [](double e, double t) { return e <= t; });
  r.precision_at_20 = r.curve.scores[kPrecisionReportIndex];
  return r;
}

SuccessResult success_curve(std::span<const FramePair> frames) {
  if (frames.empty()) throw Error(ErrorCode::EmptySequence, "no frames");
  std::vector<double> overlaps;
  overlaps.reserve(frames.size());
  for (const auto& f : frames) {
    if (!f.gt)
      overlaps.push_back(f.pred ? 0.0 : 1.0);
    else
      overlaps.push_back(f.pred ? iou(*f.pred, *f.gt) : 0.0);
  }
  SuccessResult r;
  r.curve = curve_from(overlaps, success_thresholds(), [](double o, double t) { return o > t; });
  r.success_at_05 = r.curve.scores[kSuccessReportIndex];
  return r;
}

EvalCurve norm_precision_curve(std::span<const FramePair> frames, NormMode mode) {
  const auto errors =
      counted_errors(frames, [mode](const Box& p, const Box& g) { return norm_center_error(p, g, mode); });
  return curve_from(errors, norm_precision_thresholds(), [](double e, double t) { return e <= t; });
}

// ---------------------------------------------------------------------------

const SequenceMetrics* OpeResult::find(const std::string& name) const {
  auto it = std::lower_bound(sequences.begin(), sequences.end(), name,
                             [](const SequenceMetrics& m, const std::string& n) { return m.name < n; });
  return it != sequences.end() && it->name == name ? &*it : nullptr;
}

namespace {

EvalCurve mean_curve(const std::vector<const EvalCurve*>& curves) {
  EvalCurve out;
  out.thresholds = curves.front()->thresholds;
  out.scores.assign(out.thresholds.size(), 0.0);
  double auc = 0;
  for (const auto* c : curves) {
    for (std::size_t i = 0; i < out.scores.size(); ++i) out.scores[i] += c->scores[i];
    auc += c->auc;
  }
  const double n = double(curves.size());
  for (auto& s : out.scores) s /= n;
  out.auc = auc / n;
  return out;
}

}  // namespace

OpeResult ope_evaluate(const std::vector<SequenceRecord>& sequences, const Predictions& results,
                       const EvalOptions& opts) {
  if (sequences.empty()) throw Error(ErrorCode::EmptySequence, "no sequences to evaluate");
  std::vector<const SequenceRecord*> order;
  for (const auto& s : sequences) order.push_back(&s);
  std::sort(order.begin(), order.end(), [](auto* a, auto* b) { return a->name < b->name; });

  for (const auto* s : order) {
    auto it = results.find(s->name);
    if (it == results.end()) throw Error(ErrorCode::MissingSequence, "no predictions for sequence '" + s->name + "'");
    if (it->second.size() != s->boxes.size())
      throw Error(ErrorCode::FrameCountMismatch, "sequence '" + s->name + "': " + std::to_string(it->second.size()) +
                                                     " predictions for " + std::to_string(s->boxes.size()) + " frames");
  }

  OpeResult out;
  out.sequences.resize(order.size());
  parallel_for(order.size(), opts.threads, [&](std::size_t i) {
    const auto& rec = *order[i];
    const auto frames = zip_frames(results.at(rec.name), rec.boxes);
    auto& m = out.sequences[i];
    m.name = rec.name;
    try {
      m.precision = precision_curve(frames);
      m.success = success_curve(frames);
      m.norm_precision = norm_precision_curve(frames, opts.norm_mode);
    } catch (const Error& e) {
      throw Error(e.code(), "sequence '" + rec.name + "': " + e.message());
    }
  });

  std::vector<const EvalCurve*> pr, sr, npr;
  double p20 = 0, s05 = 0;
  for (const auto& m : out.sequences) {
    pr.push_back(&m.precision.curve);
    sr.push_back(&m.success.curve);
    npr.push_back(&m.norm_precision);
    p20 += m.precision.precision_at_20;
    s05 += m.success.success_at_05;
  }
  out.precision = mean_curve(pr);
  out.success = mean_curve(sr);
  out.norm_precision = mean_curve(npr);
  out.precision_at_20 = p20 / double(out.sequences.size());
  out.success_at_05 = s05 / double(out.sequences.size());
  return out;
}

OpeResult ope_evaluate(const Dataset& dataset, const Predictions& results, const EvalOptions& opts) {
  return ope_evaluate(dataset.sequences, results, opts);
}

// ---------------------------------------------------------------------------

std::string AttributeRow::display_label() const { return label + " (" + std::to_string(count) + ")"; }

std::string AttributeRow::cell(int digits) const {
  if (!pr || !sr || !npr) return "-|-|-";
  char buf[96];
  std::snprintf(buf, sizeof buf, "%.*f|%.*f|%.*f", digits, *pr, digits, *sr, digits, *npr);
  return buf;
}

std::vector<std::string> attribute_row_labels() {
  std::vector<std::string> labels;
  for (int i = 0; i < kVisibilityLevels; ++i) labels.push_back("UWV-" + std::string(name(Visibility(i))));
  for (int i = 0; i < kWaterColors; ++i) labels.push_back("WCV-" + std::string(name(WaterColor(i))));
  for (int i = 0; i < kFlagAttributes; ++i) labels.emplace_back(short_name(Attribute(i)));
  return labels;
}

std::vector<AttributeRow> attribute_report(const std::vector<SequenceRecord>& sequences, const OpeResult& result) {
  const auto labels = attribute_row_labels();
  std::vector<AttributeRow> rows(labels.size());
  std::vector<double> pr(labels.size(), 0.0), sr(labels.size(), 0.0), npr(labels.size(), 0.0);
  for (std::size_t r = 0; r < labels.size(); ++r) rows[r].label = labels[r];

  std::vector<const SequenceRecord*> order;
  for (const auto& s : sequences) order.push_back(&s);
  std::sort(order.begin(), order.end(), [](auto* a, auto* b) { return a->name < b->name; });

  for (const auto* rec : order) {
    const auto* m = result.find(rec->name);
    if (!m) throw Error(ErrorCode::MissingSequence, "no evaluation for sequence '" + rec->name + "'");
    std::vector<std::size_t> hit;
    hit.push_back(std::size_t(rec->attributes.uwv));
    hit.push_back(kVisibilityLevels + std::size_t(rec->attributes.wcv));
    for (int i = 0; i < kFlagAttributes; ++i)
      if (rec->attributes.has(Attribute(i))) hit.push_back(kVisibilityLevels + kWaterColors + i);
    for (auto r : hit) {
      rows[r].count++;
      pr[r] += m->precision.precision_at_20;
      sr[r] += m->success.curve.auc;
      npr[r] += m->norm_precision.auc;
    }
  }
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].count == 0) continue;
    const double n = double(rows[r].count);
    rows[r].pr = pr[r] / n;
    rows[r].sr = sr[r] / n;
    rows[r].npr = npr[r] / n;
  }
  return rows;
}

std::vector<AttributeRow> attribute_report(const Dataset& dataset, const OpeResult& result) {
  return attribute_report(dataset.sequences, result);
}

}  // namespace uwt
