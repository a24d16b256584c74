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

// One-pass evaluation: per-frame box measures, precision / success /
// normalized-precision curves, dataset aggregation and attribute tables.

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "uwtrack/box.hpp"
#include "uwtrack/dataset.hpp"
#include "uwtrack/error.hpp"

namespace uwt {

/// Intersection over union; 0 when the union has zero area.
double iou(const Box& a, const Box& b);
double iou(const MaybeBox& a, const MaybeBox& b);

/// Euclidean distance between box centers.
double center_error(const Box& a, const Box& b);
double center_error(const MaybeBox& a, const MaybeBox& b);

/// Diagonal: center error over the ground-truth diagonal.
/// PerAxis: center offset divided by ground-truth width and height per axis,
/// then the Euclidean norm.
enum class NormMode { Diagonal, PerAxis };

double norm_center_error(const Box& pred, const Box& gt, NormMode mode = NormMode::Diagonal);
double norm_center_error(const MaybeBox& pred, const MaybeBox& gt, NormMode mode = NormMode::Diagonal);

struct FramePair {
  MaybeBox pred;
  MaybeBox gt;
};

std::vector<FramePair> zip_frames(const std::vector<MaybeBox>& pred, const std::vector<MaybeBox>& gt);

struct EvalCurve {
  std::vector<double> thresholds;
  std::vector<double> scores;
  double auc = 0;
};

inline constexpr int kPrecisionPoints = 51;       // 0..50 px
inline constexpr int kSuccessPoints = 21;         // 0..1 step 0.05
inline constexpr int kNormPrecisionPoints = 51;   // 0..0.5 step 0.01
inline constexpr int kPrecisionReportIndex = 20;  // 20 px
inline constexpr int kSuccessReportIndex = 10;    // IoU 0.5

std::vector<double> precision_thresholds();
std::vector<double> success_thresholds();
std::vector<double> norm_precision_thresholds();

struct PrecisionResult {
  EvalCurve curve;
  double precision_at_20 = 0;
};

struct SuccessResult {
  EvalCurve curve;
  double success_at_05 = 0;
};

/// Fraction of frames with a present ground truth whose center error is at
/// most each threshold. A missing prediction on such a frame never counts.
PrecisionResult precision_curve(std::span<const FramePair> frames);

/// Fraction of frames whose IoU strictly exceeds each threshold. A frame with
/// absent ground truth scores IoU 1 when the prediction is absent too, else 0.
SuccessResult success_curve(std::span<const FramePair> frames);

EvalCurve norm_precision_curve(std::span<const FramePair> frames, NormMode mode = NormMode::Diagonal);

// ---------------------------------------------------------------------------

using Predictions = std::map<std::string, std::vector<MaybeBox>>;

struct SequenceMetrics {
  std::string name;
  PrecisionResult precision;
  SuccessResult success;
  EvalCurve norm_precision;
};

struct OpeResult {
  std::vector<SequenceMetrics> sequences;  // sorted by name
  EvalCurve precision;                     // point-wise mean; auc = mean of sequence aucs
  EvalCurve success;
  EvalCurve norm_precision;
  double precision_at_20 = 0;
  double success_at_05 = 0;

  const SequenceMetrics* find(const std::string& name) const;
};

struct EvalOptions {
  NormMode norm_mode = NormMode::Diagonal;
  unsigned threads = 1;
};

/// Evaluates every sequence of `sequences`. Throws MissingSequence or
/// FrameCountMismatch naming the offending sequence.
OpeResult ope_evaluate(const std::vector<SequenceRecord>& sequences, const Predictions& results,
                       const EvalOptions& opts = {});
OpeResult ope_evaluate(const Dataset& dataset, const Predictions& results, const EvalOptions& opts = {});

// ---------------------------------------------------------------------------

struct AttributeRow {
  std::string label;  // "UWV-Low", "WCV-Blue", "SD", ...
  std::size_t count = 0;
  std::optional<double> pr;   // mean precision at 20 px
  std::optional<double> sr;   // mean success AUC
  std::optional<double> npr;  // mean normalized-precision AUC

  /// "UWV-Low (42)".
  std::string display_label() const;
  /// "0.486|0.443|0.511", or "-|-|-" for an empty group.
  std::string cell(int digits = 3) const;
};

/// Row order: UWV levels, WCV colors, then the binary attributes.
std::vector<std::string> attribute_row_labels();

/// One row per attribute value; groups without sequences are kept with count
/// 0 and no metrics.
std::vector<AttributeRow> attribute_report(const std::vector<SequenceRecord>& sequences, const OpeResult& result);
std::vector<AttributeRow> attribute_report(const Dataset& dataset, const OpeResult& result);

}  // namespace uwt
