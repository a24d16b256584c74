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

#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>
#include <set>

#include "support.hpp"
#include "uwtrack/dataset.hpp"
#include "uwtrack/voting.hpp"

using namespace uwt;
using uwt::testing::make_sequence;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::IoError;
}

bool has_kind(const std::vector<Violation>& v, Violation::Kind k) {
  return std::any_of(v.begin(), v.end(), [k](const Violation& x) { return x.kind == k; });
}

}  // namespace

TEST_CASE("annotation parsing") {
  const auto boxes = parse_annotations("10,20,30,40\nabsent\n 1.5 , 2.25,3,4 \r\n\n");
  REQUIRE(boxes.size() == 3);
  CHECK(*boxes[0] == Box{10, 20, 30, 40});
  CHECK_FALSE(boxes[1].has_value());
  CHECK(*boxes[2] == Box{1.5, 2.25, 3, 4});
  CHECK(parse_annotations("").empty());

  CHECK(code_of([] { parse_annotations("10,20,-1,40"); }) == ErrorCode::NegativeExtent);
  CHECK(code_of([] { parse_annotations("1,2,3,4\n1,2,3\n"); }) == ErrorCode::MalformedLine);
  CHECK(code_of([] { parse_annotations("1,2,3,4,5"); }) == ErrorCode::MalformedLine);
  CHECK(code_of([] { parse_annotations("1,2,x,4"); }) == ErrorCode::MalformedLine);
  try {
    parse_annotations("1,2,3,4\n\nabsent");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
}

TEST_CASE("annotation roundtrip is bit-exact") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0, 1000);
  std::vector<MaybeBox> boxes;
  for (int i = 0; i < 500; ++i) {
    if (i % 17 == 0)
      boxes.emplace_back();
    else
      boxes.emplace_back(Box{u(rng), u(rng), u(rng), u(rng)});
  }
  const auto text = serialize_annotations(boxes);
  CHECK(parse_annotations(text) == boxes);
  CHECK(serialize_annotations(parse_annotations(text)) == text);
}

TEST_CASE("sequence validation") {
  const Box box{10, 10, 20, 20};
  CHECK(validate_sequence(make_sequence("ok", 40, box)).empty());
  CHECK(validate_sequence(make_sequence("ok", 3300, box)).empty());
  const auto short_seq = validate_sequence(make_sequence("s", 39, box));
  REQUIRE(short_seq.size() == 1);
  CHECK(short_seq[0].kind == Violation::Kind::TooShort);
  const auto long_seq = validate_sequence(make_sequence("l", 3301, box));
  REQUIRE(long_seq.size() == 1);
  CHECK(long_seq[0].kind == Violation::Kind::TooLong);

  auto oob = make_sequence("o", 50, box, 100, 100);
  oob.boxes[7] = Box{90, 10, 20, 20};
  const auto v = validate_sequence(oob);
  REQUIRE(v.size() == 1);
  CHECK(v[0] == Violation{Violation::Kind::OutOfBounds, 7});
  CHECK(v[0].describe() == "OutOfBounds(frame 7)");

  auto mismatch = make_sequence("m", 50, box);
  mismatch.boxes.pop_back();
  CHECK(has_kind(validate_sequence(mismatch), Violation::Kind::CountMismatch));

  std::mt19937_64 rng(4);
  std::uniform_int_distribution<std::size_t> len(30, 3310);
  for (int i = 0; i < 200; ++i) {
    const std::size_t n = i % 2 ? len(rng) : (i % 4 ? 39 + std::size_t(i % 3) : 3299 + std::size_t(i % 3));
    const bool ok = n >= 40 && n <= 3300;
    CHECK(validate_sequence(make_sequence("r", n, box)).empty() == ok);
  }
}

TEST_CASE("relative target size") {
  auto rec = make_sequence("r", 40, Box{0, 0, 100, 100}, 1000, 1000);
  auto r = compute_rts(rec);
  CHECK(r.min == 0.01);
  CHECK(r.max == 0.01);
  rec.boxes[3] = Box{0, 0, 10, 100};
  rec.boxes[4] = Box{0, 0, 700, 750};
  rec.boxes[5] = MaybeBox{};
  r = compute_rts(rec);
  CHECK(r.min == doctest::Approx(0.001));
  CHECK(r.max == doctest::Approx(0.525));
  rec.boxes.assign(40, MaybeBox{});
  CHECK(code_of([&] { compute_rts(rec); }) == ErrorCode::NoPresentBoxes);
}

TEST_CASE("fast motion") {
  auto rec = make_sequence("f", 40, Box{100, 100, 20, 20});
  CHECK_FALSE(detect_fast_motion(rec));
  rec.boxes[10]->x += 20;
  CHECK_FALSE(detect_fast_motion(rec));
  for (std::size_t i = 11; i < rec.boxes.size(); ++i) rec.boxes[i]->x += 20;
  CHECK_FALSE(detect_fast_motion(rec));
  rec.boxes[20]->x += 21;
  CHECK(detect_fast_motion(rec));

  auto sparse = make_sequence("s", 3, Box{0, 0, 5, 5});
  sparse.boxes[1] = MaybeBox{};
  CHECK(code_of([&] { detect_fast_motion(sparse); }) == ErrorCode::InsufficientFrames);
  sparse.boxes[2]->x += 100;  // the jump straddles an absent frame
  CHECK(code_of([&] { detect_fast_motion(sparse); }) == ErrorCode::InsufficientFrames);
}

TEST_CASE("manifest loading") {
  uwt::testing::TempDir dir;
  uwt::testing::write_file(dir / "ann/a.txt", "10,10,20,20\n" + std::string("30,10,20,20\n"));
  uwt::testing::write_file(dir / "manifest.json", R"({
    "name": "toy",
    "sequences": [
      {"name": "a", "category": "fish", "width": 100, "height": 80, "annotation": "ann/a.txt",
       "attributes": {"uwv": "Low", "wcv": "DeepBlue", "flags": ["Cam", "RTS"]}},
      {"name": "b", "width": 100, "height": 80, "frame_count": 3, "boxes": [[1,1,2,2], null, "absent"],
       "split": "test"}
    ]})");
  const auto ds = load_manifest(dir / "manifest.json");
  CHECK(ds.name == "toy");
  REQUIRE(ds.sequences.size() == 2);
  const auto& a = ds.sequences[0];
  CHECK(a.category == "fish");
  CHECK(a.fps == 30.0);
  CHECK(a.frame_count == 2);
  CHECK(a.attributes.uwv == Visibility::Low);
  CHECK(a.attributes.wcv == WaterColor::DeepBlue);
  CHECK(a.attributes.has(Attribute::Camouflage));
  CHECK(a.attributes.has(Attribute::RelativeTargetSize));
  CHECK_FALSE(a.attributes.has(Attribute::FastMotion));  // a 20 px step is not fast
  CHECK(a.attributes.rts_min == doctest::Approx(400.0 / 8000.0));
  CHECK(ds.sequences[1].boxes.size() == 3);
  CHECK(ds.sequences[1].split == Split::Test);

  uwt::testing::write_file(dir / "bad.json", R"({"sequences": [{"name": "x", "width": 1, "height": 1,
      "attributes": {"wcv": "Purple"}}]})");
  CHECK(code_of([&] { load_manifest(dir / "bad.json"); }) == ErrorCode::MalformedManifest);
  CHECK(code_of([&] { load_manifest(dir / "nope.json"); }) == ErrorCode::UnreadableInput);
}

TEST_CASE("stratified split") {
  SUBCASE("identical attributes") {
    std::vector<SequenceRecord> recs;
    for (int i = 0; i < 10; ++i) recs.push_back(make_sequence("s" + std::to_string(i), 40, Box{0, 0, 1, 1}));
    const auto r = split_dataset(recs, 0.7, 1);
    CHECK(r.train == 7);
    CHECK(r.test == 3);
    CHECK(r.warnings.empty());
  }
  SUBCASE("single-sequence label goes to train") {
    std::vector<SequenceRecord> recs;
    for (int i = 0; i < 10; ++i) recs.push_back(make_sequence("s" + std::to_string(i), 40, Box{0, 0, 1, 1}));
    recs[4].attributes.set(Attribute::MotionBlur);
    const auto r = split_dataset(recs, 0.7, 1);
    CHECK(r.assignment.at("s4") == Split::Train);
    REQUIRE_FALSE(r.warnings.empty());
    CHECK(r.warnings[0].find("UnsatisfiableStratification") != std::string::npos);
  }
  SUBCASE("random attributes stay balanced and reproducible") {
    std::mt19937_64 rng(2);
    std::vector<SequenceRecord> recs;
    for (int i = 0; i < 120; ++i) {
      auto s = make_sequence("q" + std::to_string(i), 40, Box{0, 0, 1, 1});
      s.attributes.uwv = Visibility(rng() % 3);
      s.attributes.wcv = WaterColor(rng() % 4);
      for (int f = 0; f < 4; ++f)
        if (rng() % 3 == 0) s.attributes.set(Attribute(f));
      recs.push_back(std::move(s));
    }
    const auto r = split_dataset(recs, 0.7, 9);
    CHECK(r.train == 84);
    CHECK(r.test == 36);
    CHECK(split_dataset(recs, 0.7, 9).assignment == r.assignment);
    std::map<std::string, std::pair<int, int>> per;
    for (const auto& s : recs)
      for (const auto& l : stratification_labels(s)) {
        per[l].first += r.assignment.at(s.name) == Split::Train;
        per[l].second += 1;
      }
    for (const auto& [label, c] : per) {
      CHECK_MESSAGE(std::abs(c.first - 0.7 * c.second) < 0.1 * c.second + 1.0, label);
      if (c.second >= 2) CHECK_MESSAGE((c.first > 0 && c.first < c.second), label);
    }
  }
  CHECK(code_of([] { split_dataset({}, 1.0, 0); }) == ErrorCode::InvalidRatio);
}

TEST_CASE("voting") {
  auto table = [](const std::vector<std::string>& votes) {
    VoteTable t;
    t.frames = {"v/f0"};
    std::set<std::string> methods(votes.begin(), votes.end());
    t.methods.assign(methods.begin(), methods.end());
    for (std::size_t e = 0; e < votes.size(); ++e) {
      t.experts.push_back("e" + std::to_string(e));
      t.votes[{"v/f0", "e" + std::to_string(e)}] = votes[e];
    }
    return t;
  };
  std::vector<std::string> seven(7, "waternet");
  seven.insert(seven.end(), {"dive", "funie", "dive"});
  CHECK(vote_frame_winners(table(seven)).at("v/f0") == "waternet");
  std::vector<std::string> tie(5, "waternet");
  tie.insert(tie.end(), 5, "dive");
  CHECK(vote_frame_winners(table(tie)).at("v/f0") == "dive");
  CHECK(vote_frame_winners(table(std::vector<std::string>(10, "ufo"))).at("v/f0") == "ufo");
  CHECK(code_of([] { vote_frame_winners(VoteTable{}); }) == ErrorCode::EmptyTable);

  std::vector<std::string> frames(6, "funie");
  frames.insert(frames.end(), 4, "dive");
  CHECK(vote_video_winner(frames).method == "funie");
  CHECK_FALSE(vote_video_winner(frames).warning.has_value());
  std::vector<std::string> split442 = {"b", "b", "b", "b", "a", "a", "a", "a", "c", "c"};
  CHECK(vote_video_winner(split442).method == "a");
  const auto few = vote_video_winner(std::vector<std::string>{"x", "y", "y"});
  CHECK(few.method == "y");
  REQUIRE(few.warning.has_value());
  CHECK(few.warning->starts_with("WrongFrameCount"));
}

TEST_CASE("vote CSV parsing") {
  const auto tables = parse_vote_csv("frame_id,expert_id,method_id\nv1/f1,e1,dive\nv1/f1,e2,ufo\nv1/f1,e3,ufo\n"
                                     "v2/f9,e1,dive\n");
  REQUIRE(tables.size() == 2);
  CHECK(vote_frame_winners(tables.at("v1")).at("v1/f1") == "ufo");
  CHECK(tables.at("v2").methods == std::vector<std::string>{"dive", "ufo"});
  CHECK(code_of([] { parse_vote_csv("a,b\n"); }) == ErrorCode::MalformedVoteRow);
  CHECK(code_of([] { parse_vote_csv("f,e,m\nf,e,n\n"); }) == ErrorCode::MalformedVoteRow);
  const auto incomplete = parse_vote_csv("v/f1,e1,a\nv/f2,e2,b\n");
  CHECK(code_of([&] { vote_frame_winners(incomplete.at("v")); }) == ErrorCode::MalformedVoteRow);
}

TEST_CASE("frame sampling") {
  const auto picks = sample_frames(100, 10, 3);
  REQUIRE(picks.size() == 10);
  for (std::size_t s = 0; s < 10; ++s) {
    CHECK(picks[s] >= s * 10);
    CHECK(picks[s] < (s + 1) * 10);
  }
  CHECK(sample_frames(100, 10, 3) == picks);
  std::vector<std::size_t> all(10);
  std::iota(all.begin(), all.end(), 0);
  CHECK(sample_frames(10, 10, 7) == all);
  const auto uneven = sample_frames(23, 10, 1);  // segments of 3,3,3,2,...
  CHECK(uneven[0] < 3);
  CHECK(uneven[3] >= 9);
  CHECK(uneven[3] < 11);
  CHECK(code_of([] { sample_frames(9, 10, 0); }) == ErrorCode::TooFewFrames);
}
