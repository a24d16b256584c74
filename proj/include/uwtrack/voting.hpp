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

// Expert vote tables and the two-stage plurality used to pick one
// enhancement method per frame and per video.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "uwtrack/dataset.hpp"

namespace uwt {

inline constexpr std::size_t kFramesPerVideo = 10;

struct VoteTable {
  std::vector<std::string> methods;
  std::vector<std::string> frames;
  std::vector<std::string> experts;
  std::map<std::pair<std::string, std::string>, std::string> votes;  // (frame, expert) -> method
};

/// Plurality over `ballots`; ties go to the lexicographically smallest ID.
std::string plurality(const std::vector<std::string>& ballots);

/// Per-frame plurality over every expert's vote. Throws EmptyTable when there
/// is nothing to count and MalformedVoteRow for a missing cell or an
/// undeclared method.
std::map<std::string, std::string> vote_frame_winners(const VoteTable& table);

struct VideoWinner {
  std::string method;
  std::optional<std::string> warning;  // WrongFrameCount
};

VideoWinner vote_video_winner(const std::vector<std::string>& frame_winners);
VideoWinner vote_video_winner(const std::map<std::string, std::string>& frame_winners);

/// Parses "frame_id,expert_id,method_id" rows (optional header) into one table
/// per video. A frame id "video/frame" belongs to "video"; ids without a slash
/// form a single unnamed video "". Methods are the sorted set seen in the file.
std::map<std::string, VoteTable> parse_vote_csv(std::string_view text);

/// One seeded pick in each of k contiguous segments of near-equal length (the
/// first n mod k segments are one frame longer). Throws TooFewFrames if n < k.
std::vector<std::size_t> sample_frames(std::size_t frame_count, std::size_t k, std::uint64_t seed);
std::vector<std::size_t> sample_frames(const SequenceRecord& rec, std::size_t k = kFramesPerVideo,
                                       std::uint64_t seed = 0);

}  // namespace uwt
