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

#include <stdexcept>
#include <string>
#include <string_view>

namespace uwt {

enum class ErrorCode {
  ShapeMismatch,
  OutOfRange,
  InvalidGamma,
  IndivisibleWindow,
  InvalidConfig,
  InvalidLR,
  AbsentBox,
  DegenerateGT,
  EmptySequence,
  MissingSequence,
  FrameCountMismatch,
  MalformedLine,
  NegativeExtent,
  NoPresentBoxes,
  InsufficientFrames,
  InvalidRatio,
  EmptyTable,
  TooFewFrames,
  MalformedVoteRow,
  MalformedManifest,
  MissingCheckpoint,
  BadCheckpoint,
  UnreadableInput,
  EmptyManifest,
  IoError,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::InvalidGamma: return "InvalidGamma";
    case ErrorCode::IndivisibleWindow: return "IndivisibleWindow";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::InvalidLR: return "InvalidLR";
    case ErrorCode::AbsentBox: return "AbsentBox";
    case ErrorCode::DegenerateGT: return "DegenerateGT";
    case ErrorCode::EmptySequence: return "EmptySequence";
    case ErrorCode::MissingSequence: return "MissingSequence";
    case ErrorCode::FrameCountMismatch: return "FrameCountMismatch";
    case ErrorCode::MalformedLine: return "MalformedLine";
    case ErrorCode::NegativeExtent: return "NegativeExtent";
    case ErrorCode::NoPresentBoxes: return "NoPresentBoxes";
    case ErrorCode::InsufficientFrames: return "InsufficientFrames";
    case ErrorCode::InvalidRatio: return "InvalidRatio";
    case ErrorCode::EmptyTable: return "EmptyTable";
    case ErrorCode::TooFewFrames: return "TooFewFrames";
    case ErrorCode::MalformedVoteRow: return "MalformedVoteRow";
    case ErrorCode::MalformedManifest: return "MalformedManifest";
    case ErrorCode::MissingCheckpoint: return "MissingCheckpoint";
    case ErrorCode::BadCheckpoint: return "BadCheckpoint";
    case ErrorCode::UnreadableInput: return "UnreadableInput";
    case ErrorCode::EmptyManifest: return "EmptyManifest";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

/// Every failure in the library is reported through this exception; `code()`
/// identifies the failure class and `what()` carries the human-readable context
/// (file names, line numbers, sequence names).
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code), message_(message) {}

  ErrorCode code() const noexcept { return code_; }
  /// The message without the code prefix.
  const std::string& message() const noexcept { return message_; }

 private:
  ErrorCode code_;
  std::string message_;
};

}  // namespace uwt
