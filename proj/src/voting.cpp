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

#include "uwtrack/voting.hpp"

#include <algorithm>
#include <cctype>
#include <random>
#include <set>

namespace uwt {

std::string plurality(const std::vector<std::string>& ballots) {
  if (ballots.empty()) throw Error(ErrorCode::EmptyTable, "no ballots");
  std::map<std::string, std::size_t> counts;
  for (const auto& b : ballots) ++counts[b];
  // std::map iterates in lexicographic order, so the first maximum wins ties.
  auto best = counts.begin();
  for (auto it = counts.begin(); it != counts.end(); ++it)
    if (it->second > best->second) best = it;
  return best->first;
}

std::map<std::string, std::string> vote_frame_winners(const VoteTable& table) {
  if (table.frames.empty() || table.experts.empty() || table.votes.empty())
    throw Error(ErrorCode::EmptyTable, "vote table has no votes");
  const std::set<std::string> declared(table.methods.begin(), table.methods.end());
  std::map<std::string, std::string> winners;
  for (const auto& frame : table.frames) {
    std::vector<std::string> ballots;
    ballots.reserve(table.experts.size());
    for (const auto& expert : table.experts) {
      auto it = table.votes.find({frame, expert});
      if (it == table.votes.end())
        throw Error(ErrorCode::MalformedVoteRow, "no vote from expert '" + expert + "' on frame '" + frame + "'");
      if (!declared.count(it->second))
        throw Error(ErrorCode::MalformedVoteRow, "undeclared method '" + it->second + "' on frame '" + frame + "'");
      ballots.push_back(it->second);
    }
    winners[frame] = plurality(ballots);
  }
  return winners;
}

VideoWinner vote_video_winner(const std::vector<std::string>& frame_winners) {
  if (frame_winners.empty()) throw Error(ErrorCode::EmptyTable, "no frame winners");
  VideoWinner w{plurality(frame_winners), std::nullopt};
  if (frame_winners.size() != kFramesPerVideo)
    w.warning = "WrongFrameCount: expected " + std::to_string(kFramesPerVideo) + " frame winners, got " +
                std::to_string(frame_winners.size());
  return w;
}

VideoWinner vote_video_winner(const std::map<std::string, std::string>& frame_winners) {
  std::vector<std::string> v;
  v.reserve(frame_winners.size());
  for (const auto& [frame, method] : frame_winners) v.push_back(method);
  return vote_video_winner(v);
}

namespace {

std::string trimmed(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return std::string(s);
}

}  // namespace

std::map<std::string, VoteTable> parse_vote_csv(std::string_view text) {
  std::map<std::string, VoteTable> tables;
  std::map<std::string, std::set<std::string>> methods, frames, experts;
  std::size_t line_no = 0;
  std::size_t start = 0;
  bool first_content = true;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    const auto line = trimmed(text.substr(start, end - start));
    start = end + 1;
    ++line_no;
    if (line.empty()) continue;

    std::vector<std::string> fields;
    std::size_t pos = 0;
    while (true) {
      const auto comma = line.find(',', pos);
      fields.push_back(trimmed(std::string_view(line).substr(pos, comma - pos)));
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
    if (first_content && fields.size() == 3 && fields[0] == "frame_id" && fields[1] == "expert_id") {
      first_content = false;
      continue;
    }
    first_content = false;
    if (fields.size() != 3 || fields[0].empty() || fields[1].empty() || fields[2].empty())
      throw Error(ErrorCode::MalformedVoteRow, "line " + std::to_string(line_no) + ": expected frame_id,expert_id,method_id");

    const auto slash = fields[0].rfind('/');
    const std::string video = slash == std::string::npos ? std::string() : fields[0].substr(0, slash);
    auto& t = tables[video];
    if (!t.votes.emplace(std::pair{fields[0], fields[1]}, fields[2]).second)
      throw Error(ErrorCode::MalformedVoteRow,
                  "line " + std::to_string(line_no) + ": duplicate vote for (" + fields[0] + ", " + fields[1] + ")");
    frames[video].insert(fields[0]);
    experts[video].insert(fields[1]);
    methods[video].insert(fields[2]);
  }
  std::set<std::string> all_methods;
  for (const auto& [video, m] : methods) all_methods.insert(m.begin(), m.end());
  for (auto& [video, t] : tables) {
    t.methods.assign(all_methods.begin(), all_methods.end());
    t.frames.assign(frames[video].begin(), frames[video].end());
    t.experts.assign(experts[video].begin(), experts[video].end());
  }
  return tables;
}

std::vector<std::size_t> sample_frames(std::size_t frame_count, std::size_t k, std::uint64_t seed) {
  if (k == 0 || frame_count < k)
    throw Error(ErrorCode::TooFewFrames,
                std::to_string(frame_count) + " frames cannot fill " + std::to_string(k) + " segments");
  std::mt19937_64 rng(seed);
  const std::size_t base = frame_count / k, extra = frame_count % k;
  std::vector<std::size_t> picks;
  picks.reserve(k);
  std::size_t begin = 0;
  for (std::size_t s = 0; s < k; ++s) {
    const std::size_t len = base + (s < extra ? 1 : 0);
    std::uniform_int_distribution<std::size_t> pick(0, len - 1);
    picks.push_back(begin + pick(rng));
    begin += len;
  }
  return picks;
}

std::vector<std::size_t> sample_frames(const SequenceRecord& rec, std::size_t k, std::uint64_t seed) {
  const std::size_t n = rec.frame_paths.empty() ? rec.frame_count : rec.frame_paths.size();
  try {
    return sample_frames(n, k, seed);
  } catch (const Error& e) {
    throw Error(e.code(), rec.name + ": " + e.message());
  }
}

}  // namespace uwt
