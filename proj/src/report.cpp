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

#include "uwtrack/report.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace uwt {

using nlohmann::ordered_json;

std::string format_number(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

Predictions read_predictions(const std::filesystem::path& dir, const std::vector<SequenceRecord>& sequences) {
  Predictions out;
  for (const auto& s : sequences) {
    const auto path = dir / (s.name + ".txt");
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::MissingSequence, "missing prediction file " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    try {
      out[s.name] = parse_annotations(ss.str());
    } catch (const Error& e) {
      throw Error(e.code(), path.string() + ": " + e.message());
    }
  }
  return out;
}

TrackerEvaluation evaluate_tracker(std::string tracker, const std::vector<SequenceRecord>& sequences,
                                   const Predictions& results, const EvalOptions& opts) {
  TrackerEvaluation e;
  e.tracker = std::move(tracker);
  e.ope = ope_evaluate(sequences, results, opts);
  e.attributes = attribute_report(sequences, e.ope);
  return e;
}

namespace {

ordered_json curve_json(const EvalCurve& c) {
  ordered_json j;
  j["thresholds"] = c.thresholds;
  j["scores"] = c.scores;
  j["auc"] = c.auc;
  return j;
}

ordered_json optional_json(const std::optional<double>& v) { return v ? ordered_json(*v) : ordered_json(nullptr); }

const EvalCurve& pick(const OpeResult& r, CurveKind k) {
  switch (k) {
    case CurveKind::Precision: return r.precision;
    case CurveKind::Success: return r.success;
    default: return r.norm_precision;
  }
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + "\"";
}

}  // namespace

std::string report_json(const std::vector<TrackerEvaluation>& evals) {
  ordered_json root;
  root["trackers"] = ordered_json::array();
  for (const auto& e : evals) {
    ordered_json t;
    t["tracker"] = e.tracker;
    ordered_json overall;
    overall["precision_at_20"] = e.ope.precision_at_20;
    overall["success_at_05"] = e.ope.success_at_05;
    overall["success_auc"] = e.ope.success.auc;
    overall["norm_precision_auc"] = e.ope.norm_precision.auc;
    overall["precision"] = curve_json(e.ope.precision);
    overall["success"] = curve_json(e.ope.success);
    overall["norm_precision"] = curve_json(e.ope.norm_precision);
    t["overall"] = std::move(overall);

    ordered_json seqs = ordered_json::array();
    for (const auto& m : e.ope.sequences) {
      ordered_json s;
      s["name"] = m.name;
      s["precision_at_20"] = m.precision.precision_at_20;
      s["success_at_05"] = m.success.success_at_05;
      s["success_auc"] = m.success.curve.auc;
      s["norm_precision_auc"] = m.norm_precision.auc;
      s["precision_auc"] = m.precision.curve.auc;
      seqs.push_back(std::move(s));
    }
    t["sequences"] = std::move(seqs);

    ordered_json attrs = ordered_json::array();
    for (const auto& r : e.attributes) {
      ordered_json a;
      a["attribute"] = r.label;
      a["label"] = r.display_label();
      a["count"] = r.count;
      a["pr"] = optional_json(r.pr);
      a["sr"] = optional_json(r.sr);
      a["npr"] = optional_json(r.npr);
      a["cell"] = r.cell();
      attrs.push_back(std::move(a));
    }
    t["attributes"] = std::move(attrs);
    root["trackers"].push_back(std::move(t));
  }
  return root.dump(2) + "\n";
}

std::string attribute_csv(const std::vector<TrackerEvaluation>& evals) {
  std::string out = "tracker,attribute,count,pr,sr,npr\n";
  auto opt = [](const std::optional<double>& v) { return v ? format_number(*v) : std::string(); };
  for (const auto& e : evals)
    for (const auto& r : e.attributes)
      out += csv_field(e.tracker) + "," + r.label + "," + std::to_string(r.count) + "," + opt(r.pr) + "," +
             opt(r.sr) + "," + opt(r.npr) + "\n";
  return out;
}

std::string attribute_table_csv(const std::vector<TrackerEvaluation>& evals) {
  std::string out = "Trackers";
  for (const auto& e : evals) out += "," + csv_field(e.tracker);
  out += "\n";
  if (evals.empty()) return out;
  for (std::size_t r = 0; r < evals.front().attributes.size(); ++r) {
    out += csv_field(evals.front().attributes[r].display_label());
    for (const auto& e : evals) out += "," + e.attributes[r].cell();
    out += "\n";
  }
  return out;
}

std::string_view name(CurveKind k) {
  switch (k) {
    case CurveKind::Precision: return "precision";
    case CurveKind::Success: return "success";
    default: return "norm_precision";
  }
}

std::string plot_csv(const std::vector<TrackerEvaluation>& evals, CurveKind kind) {
  std::string out = "threshold";
  for (const auto& e : evals) out += "," + csv_field(e.tracker);
  out += "\n";
  if (evals.empty()) return out;
  const auto& thresholds = pick(evals.front().ope, kind).thresholds;
  for (std::size_t i = 0; i < thresholds.size(); ++i) {
    out += format_number(thresholds[i]);
    for (const auto& e : evals) out += "," + format_number(pick(e.ope, kind).scores[i]);
    out += "\n";
  }
  return out;
}

}  // namespace uwt
