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

// Evaluation report writers: JSON document, attribute tables as CSV and
// plot-ready curve CSVs.

#include <filesystem>
#include <string>
#include <vector>

#include "uwtrack/tracking.hpp"

namespace uwt {

struct TrackerEvaluation {
  std::string tracker;
  OpeResult ope;
  std::vector<AttributeRow> attributes;
};

/// Reads "<dir>/<sequence>.txt" for every sequence. Throws MissingSequence
/// naming the first absent file.
Predictions read_predictions(const std::filesystem::path& dir, const std::vector<SequenceRecord>& sequences);

/// Evaluates one tracker and builds its attribute table.
TrackerEvaluation evaluate_tracker(std::string tracker, const std::vector<SequenceRecord>& sequences,
                                   const Predictions& results, const EvalOptions& opts = {});

/// {"trackers": [{"tracker", "overall", "sequences", "attributes"}]}.
std::string report_json(const std::vector<TrackerEvaluation>& evals);

/// One row per (tracker, attribute): tracker,attribute,count,pr,sr,npr. Empty
/// groups leave the metric fields blank.
std::string attribute_csv(const std::vector<TrackerEvaluation>& evals);

/// Table layout: one row per attribute labelled "UWV-Low (42)" and one
/// "PR|SR|NPR" column per tracker.
std::string attribute_table_csv(const std::vector<TrackerEvaluation>& evals);

enum class CurveKind { Precision, Success, NormPrecision };
std::string_view name(CurveKind k);

/// threshold,<tracker 1>,<tracker 2>,... using the dataset-level mean curves.
std::string plot_csv(const std::vector<TrackerEvaluation>& evals, CurveKind kind);

/// Shortest decimal text that reads back to the same double.
std::string format_number(double v);

}  // namespace uwt
