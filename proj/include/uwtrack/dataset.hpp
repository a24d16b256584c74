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

// Sequence records, annotation parsing, suitability validation, computable
// attributes (fast motion, relative target size) and the stratified
// train/test split.

#include <array>
#include <bitset>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "uwtrack/box.hpp"
#include "uwtrack/error.hpp"

namespace uwt {

/// Binary per-sequence attributes. Visibility and water color are multi-valued
/// and stored separately in AttributeSet.
enum class Attribute : int {
  SwarmDistractors,        // SD
  Camouflage,              // Cam
  IntraTargetScale,        // ISV
  RelativeTargetSize,      // RTS
  OutOfView,               // OV
  PartialOcclusion,        // PO
  Deformation,             // Def
  FullOcclusion,           // FO
  LowResolution,           // LR
  FastMotion,              // FM
  MotionBlur,              // MB
  CameraMotion,            // CM
  IlluminationVariation,   // IV
  OutOfPlaneRotation,      // OPR
  PartialTargetInfo,       // PTI
};
inline constexpr int kFlagAttributes = 15;

enum class Visibility : int { Low, Mid, High };
inline constexpr int kVisibilityLevels = 3;

enum class WaterColor : int {
  Colorless, Ash, Green, LightBlue, Gray, LightGreen, DeepBlue, Dark,
  GrayBlue, PartlyBlue, LightYellow, LightBrown, Blue, Cyan, BlueBlack,
};
inline constexpr int kWaterColors = 15;

std::string_view short_name(Attribute a);
std::string_view name(Visibility v);
std::string_view name(WaterColor c);
std::optional<Attribute> parse_attribute(std::string_view s);
std::optional<Visibility> parse_visibility(std::string_view s);
std::optional<WaterColor> parse_water_color(std::string_view s);

struct AttributeSet {
  std::bitset<kFlagAttributes> flags;
  Visibility uwv = Visibility::Mid;
  WaterColor wcv = WaterColor::Blue;
  double rts_min = 0;
  double rts_max = 0;

  bool has(Attribute a) const { return flags.test(std::size_t(a)); }
  void set(Attribute a, bool on = true) { flags.set(std::size_t(a), on); }
};

enum class Split { Unassigned, Train, Test };
std::string_view name(Split s);

struct SequenceRecord {
  std::string name;
  std::string category;
  std::vector<std::string> frame_paths;  // may be empty when only a count is known
  std::size_t frame_count = 0;
  int width = 0;
  int height = 0;
  double fps = 30.0;
  std::vector<MaybeBox> boxes;
  AttributeSet attributes;
  Split split = Split::Unassigned;
};

struct Dataset {
  std::string name;
  std::vector<SequenceRecord> sequences;
};

// ---------------------------------------------------------------------------
// Annotations

/// One "x,y,w,h" line per frame, or the literal "absent". Whitespace around
/// fields is ignored; trailing blank lines are dropped.
std::vector<MaybeBox> parse_annotations(std::string_view text);
/// Inverse of parse_annotations using shortest round-trip decimal formatting.
std::string serialize_annotations(const std::vector<MaybeBox>& boxes);

// ---------------------------------------------------------------------------
// Validation

inline constexpr std::size_t kMinSequenceFrames = 40;
inline constexpr std::size_t kMaxSequenceFrames = 3300;

struct Violation {
  enum class Kind { TooShort, TooLong, OutOfBounds, CountMismatch };
  Kind kind;
  std::optional<std::size_t> frame;

  std::string describe() const;
  bool operator==(const Violation&) const = default;
};

std::string_view name(Violation::Kind k);

/// Empty result means the record is suitable.
std::vector<Violation> validate_sequence(const SequenceRecord& rec);

// ---------------------------------------------------------------------------
// Computable attributes

struct RelativeSizeRange {
  double min = 0;
  double max = 0;
};

/// Box area over frame area, min and max over frames with a present box.
RelativeSizeRange compute_rts(const SequenceRecord& rec);

inline constexpr double kFastMotionPixels = 20.0;

/// True iff the box center moves more than 20 px between two consecutive
/// frames that both carry a box.
bool detect_fast_motion(const SequenceRecord& rec);

/// Fills the computed attributes: RTS range always (when a box exists), FM
/// whenever two consecutive boxes exist.
void derive_attributes(SequenceRecord& rec);

// ---------------------------------------------------------------------------
// Manifest

/// Loads a dataset manifest (JSON). Relative annotation and frame paths are
/// resolved against the manifest directory.
Dataset load_manifest(const std::filesystem::path& path);
Dataset parse_manifest(std::string_view json_text, const std::filesystem::path& base_dir);

// ---------------------------------------------------------------------------
// Split

/// Label strings a sequence is stratified on: "UWV-<level>", "WCV-<color>",
/// each set flag's short name and "category:<name>" when a category is known.
std::vector<std::string> stratification_labels(const SequenceRecord& rec);

struct SplitResult {
  std::map<std::string, Split> assignment;
  std::vector<std::string> warnings;  // UnsatisfiableStratification and coverage notes
  std::size_t train = 0;
  std::size_t test = 0;
};

/// Greedy stratified split: the global train count is round(ratio * N); labels
/// are visited from rarest to most common and each unassigned sequence goes
/// where it brings its labels' train fractions closest to `ratio`. A label held
/// by a single sequence cannot appear in both splits; that sequence goes to
/// train and a warning is recorded.
SplitResult split_dataset(const std::vector<SequenceRecord>& records, double ratio, std::uint64_t seed);

}  // namespace uwt
