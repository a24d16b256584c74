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

#include "uwtrack/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "uwtrack/image_io.hpp"

namespace uwt {

namespace {

constexpr std::array<std::string_view, kFlagAttributes> kFlagNames = {
    "SD", "Cam", "ISV", "RTS", "OV", "PO", "Def", "FO", "LR", "FM", "MB", "CM", "IV", "OPR", "PTI"};
constexpr std::array<std::string_view, kVisibilityLevels> kVisibilityNames = {"Low", "Mid", "High"};
constexpr std::array<std::string_view, kWaterColors> kColorNames = {
    "Colorless", "Ash",        "Green",      "LightBlue", "Gray", "LightGreen", "DeepBlue", "Dark",
    "GrayBlue",  "PartlyBlue", "LightYellow", "LightBrown", "Blue", "Cyan",      "BlueBlack"};

bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::tolower(static_cast<unsigned char>(x)) == std::tolower(static_cast<unsigned char>(y));
         });
}

template <std::size_t N>
std::optional<int> lookup(const std::array<std::string_view, N>& names, std::string_view s) {
  for (std::size_t i = 0; i < N; ++i)
    if (iequals(names[i], s)) return int(i);
  return std::nullopt;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

}  // namespace

std::string_view short_name(Attribute a) { return kFlagNames[std::size_t(a)]; }
std::string_view name(Visibility v) { return kVisibilityNames[std::size_t(v)]; }
std::string_view name(WaterColor c) { return kColorNames[std::size_t(c)]; }

std::optional<Attribute> parse_attribute(std::string_view s) {
  if (auto i = lookup(kFlagNames, s)) return Attribute(*i);
  return std::nullopt;
}
std::optional<Visibility> parse_visibility(std::string_view s) {
  if (auto i = lookup(kVisibilityNames, s)) return Visibility(*i);
  return std::nullopt;
}
std::optional<WaterColor> parse_water_color(std::string_view s) {
  if (auto i = lookup(kColorNames, s)) return WaterColor(*i);
  return std::nullopt;
}

std::string_view name(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Test: return "test";
    default: return "unassigned";
  }
}

// ---------------------------------------------------------------------------

std::vector<MaybeBox> parse_annotations(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    lines.push_back(text.substr(start, end - start));
    start = end + 1;
  }
  while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();

  std::vector<MaybeBox> boxes;
  boxes.reserve(lines.size());
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto line = trim(lines[i]);
    const std::string where = "line " + std::to_string(i + 1);
    if (iequals(line, "absent")) {
      boxes.emplace_back(std::nullopt);
      continue;
    }
    std::array<double, 4> v{};
    std::size_t field = 0;
    std::string_view rest = line;
    for (; field < 4; ++field) {
      const auto comma = rest.find(',');
      const auto token = trim(rest.substr(0, comma));
      if (token.empty()) break;
      const char* first = token.data();
      const char* last = token.data() + token.size();
      if (*first == '+') ++first;
      auto [ptr, ec] = std::from_chars(first, last, v[field]);
      if (ec != std::errc() || ptr != last || !std::isfinite(v[field])) break;
      if (comma == std::string_view::npos) {
        rest = {};
        ++field;
        break;
      }
      rest = rest.substr(comma + 1);
    }
    if (field != 4 || !rest.empty())
      throw Error(ErrorCode::MalformedLine, where + ": expected \"x,y,w,h\" or \"absent\", got \"" + std::string(line) + "\"");
    if (v[2] < 0 || v[3] < 0) throw Error(ErrorCode::NegativeExtent, where + ": negative width or height");
    boxes.emplace_back(Box{v[0], v[1], v[2], v[3]});
  }
  return boxes;
}

namespace {
void append_number(std::string& out, double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, ptr);
}
}  // namespace

std::string serialize_annotations(const std::vector<MaybeBox>& boxes) {
  std::string out;
  for (const auto& b : boxes) {
    if (!b) {
      out += "absent\n";
      continue;
    }
    append_number(out, b->x);
    out += ',';
    append_number(out, b->y);
    out += ',';
    append_number(out, b->w);
    out += ',';
    append_number(out, b->h);
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------

std::string_view name(Violation::Kind k) {
  switch (k) {
    case Violation::Kind::TooShort: return "TooShort";
    case Violation::Kind::TooLong: return "TooLong";
    case Violation::Kind::OutOfBounds: return "OutOfBounds";
    default: return "CountMismatch";
  }
}

std::string Violation::describe() const {
  std::string s(name(kind));
  if (frame) s += "(frame " + std::to_string(*frame) + ")";
  return s;
}

std::vector<Violation> validate_sequence(const SequenceRecord& rec) {
  std::vector<Violation> out;
  const std::size_t frames = rec.frame_paths.empty() ? rec.frame_count : rec.frame_paths.size();
  if (frames < kMinSequenceFrames) out.push_back({Violation::Kind::TooShort, std::nullopt});
  if (frames > kMaxSequenceFrames) out.push_back({Violation::Kind::TooLong, std::nullopt});
  if (rec.boxes.size() != frames) out.push_back({Violation::Kind::CountMismatch, std::nullopt});
  for (std::size_t i = 0; i < rec.boxes.size(); ++i) {
    const auto& b = rec.boxes[i];
    if (!b) continue;
    if (b->x < 0 || b->y < 0 || b->x + b->w > rec.width || b->y + b->h > rec.height)
      out.push_back({Violation::Kind::OutOfBounds, i});
  }
  return out;
}

// ---------------------------------------------------------------------------

RelativeSizeRange compute_rts(const SequenceRecord& rec) {
  if (rec.width <= 0 || rec.height <= 0)
    throw Error(ErrorCode::InvalidConfig, rec.name + ": frame size must be positive");
  const double frame_area = double(rec.width) * double(rec.height);
  std::optional<RelativeSizeRange> r;
  for (const auto& b : rec.boxes) {
    if (!b) continue;
    const double ratio = b->area() / frame_area;
    if (!r)
      r = RelativeSizeRange{ratio, ratio};
    else {
      r->min = std::min(r->min, ratio);
      r->max = std::max(r->max, ratio);
    }
  }
  if (!r) throw Error(ErrorCode::NoPresentBoxes, rec.name + ": no present boxes");
  return *r;
}

bool detect_fast_motion(const SequenceRecord& rec) {
  bool any_pair = false;
  for (std::size_t i = 1; i < rec.boxes.size(); ++i) {
    const auto& a = rec.boxes[i - 1];
    const auto& b = rec.boxes[i];
    if (!a || !b) continue;
    any_pair = true;
    const double dx = b->center_x() - a->center_x(), dy = b->center_y() - a->center_y();
    if (std::hypot(dx, dy) > kFastMotionPixels) return true;
  }
  if (!any_pair)
    throw Error(ErrorCode::InsufficientFrames, rec.name + ": needs two consecutive present boxes");
  return false;
}

void derive_attributes(SequenceRecord& rec) {
  const bool any_box = std::any_of(rec.boxes.begin(), rec.boxes.end(), [](const MaybeBox& b) { return b.has_value(); });
  if (any_box && rec.width > 0 && rec.height > 0) {
    const auto r = compute_rts(rec);
    rec.attributes.rts_min = r.min;
    rec.attributes.rts_max = r.max;
  }
  try {
    rec.attributes.set(Attribute::FastMotion, detect_fast_motion(rec));
  } catch (const Error& e) {
    if (e.code() != ErrorCode::InsufficientFrames) throw;
  }
}

// ---------------------------------------------------------------------------

namespace {

using nlohmann::json;

[[noreturn]] void bad_manifest(const std::string& what) { throw Error(ErrorCode::MalformedManifest, what); }

std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorCode::UnreadableInput, "cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

SequenceRecord parse_sequence(const json& j, const std::filesystem::path& base) {
  if (!j.is_object()) bad_manifest("sequence entry must be an object");
  SequenceRecord rec;
  if (!j.contains("name") || !j["name"].is_string()) bad_manifest("sequence without a name");
  rec.name = j["name"].get<std::string>();
  const std::string where = "sequence '" + rec.name + "': ";
  try {
    rec.category = j.value("category", std::string{});
    rec.width = j.at("width").get<int>();
    rec.height = j.at("height").get<int>();
    rec.fps = j.value("fps", 30.0);

    if (j.contains("frame_paths")) {
      for (const auto& f : j["frame_paths"]) rec.frame_paths.push_back(resolve(base, f.get<std::string>()).string());
    } else if (j.contains("frames_dir")) {
      const auto dir = resolve(base, j["frames_dir"].get<std::string>());
      if (!std::filesystem::is_directory(dir)) throw Error(ErrorCode::UnreadableInput, where + "missing frames_dir " + dir.string());
      for (const auto& e : std::filesystem::directory_iterator(dir))
        if (e.is_regular_file() && io::is_supported_image(e.path())) rec.frame_paths.push_back(e.path().string());
      std::sort(rec.frame_paths.begin(), rec.frame_paths.end());
    }

    if (j.contains("annotation")) {
      rec.boxes = parse_annotations(read_text(resolve(base, j["annotation"].get<std::string>())));
    } else if (j.contains("boxes")) {
      for (const auto& b : j["boxes"]) {
        if (b.is_null() || (b.is_string() && b.get<std::string>() == "absent")) {
          rec.boxes.emplace_back(std::nullopt);
          continue;
        }
        if (!b.is_array() || b.size() != 4) bad_manifest(where + "box must be [x,y,w,h], null or \"absent\"");
        Box box{b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>()};
        if (box.w < 0 || box.h < 0) throw Error(ErrorCode::NegativeExtent, where + "negative box extent");
        rec.boxes.emplace_back(box);
      }
    }

    if (!rec.frame_paths.empty())
      rec.frame_count = rec.frame_paths.size();
    else if (j.contains("frame_count"))
      rec.frame_count = j["frame_count"].get<std::size_t>();
    else
      rec.frame_count = rec.boxes.size();

    if (j.contains("attributes")) {
      const auto& a = j["attributes"];
      if (a.contains("uwv")) {
        auto v = parse_visibility(a["uwv"].get<std::string>());
        if (!v) bad_manifest(where + "unknown UWV level " + a["uwv"].dump());
        rec.attributes.uwv = *v;
      }
      if (a.contains("wcv")) {
        auto c = parse_water_color(a["wcv"].get<std::string>());
        if (!c) bad_manifest(where + "unknown WCV category " + a["wcv"].dump());
        rec.attributes.wcv = *c;
      }
      for (const auto& f : a.value("flags", json::array())) {
        auto attr = parse_attribute(f.get<std::string>());
        if (!attr) bad_manifest(where + "unknown attribute " + f.dump());
        rec.attributes.set(*attr);
      }
    }
    const auto split = j.value("split", std::string("unassigned"));
    rec.split = split == "train" ? Split::Train : split == "test" ? Split::Test : Split::Unassigned;
  } catch (const json::exception& e) {
    bad_manifest(where + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::MalformedLine || e.code() == ErrorCode::NegativeExtent)
      throw Error(e.code(), where + e.message());
    throw;
  }
  derive_attributes(rec);
  return rec;
}

}  // namespace

Dataset parse_manifest(std::string_view json_text, const std::filesystem::path& base_dir) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    bad_manifest(e.what());
  }
  if (!j.is_object() || !j.contains("sequences") || !j["sequences"].is_array())
    bad_manifest("manifest needs a \"sequences\" array");
  Dataset ds;
  ds.name = j.value("name", std::string("dataset"));
  std::set<std::string> seen;
  for (const auto& s : j["sequences"]) {
    ds.sequences.push_back(parse_sequence(s, base_dir));
    if (!seen.insert(ds.sequences.back().name).second)
      bad_manifest("duplicate sequence name '" + ds.sequences.back().name + "'");
  }
  return ds;
}

Dataset load_manifest(const std::filesystem::path& path) {
  return parse_manifest(read_text(path), path.parent_path());
}

// ---------------------------------------------------------------------------

std::vector<std::string> stratification_labels(const SequenceRecord& rec) {
  std::vector<std::string> labels;
  labels.push_back("UWV-" + std::string(name(rec.attributes.uwv)));
  labels.push_back("WCV-" + std::string(name(rec.attributes.wcv)));
  for (int i = 0; i < kFlagAttributes; ++i)
    if (rec.attributes.has(Attribute(i))) labels.emplace_back(short_name(Attribute(i)));
  if (!rec.category.empty()) labels.push_back("category:" + rec.category);
  return labels;
}

SplitResult split_dataset(const std::vector<SequenceRecord>& records, double ratio, std::uint64_t seed) {
  if (!(ratio > 0 && ratio < 1)) throw Error(ErrorCode::InvalidRatio, "ratio must lie in (0, 1)");
  const std::size_t n = records.size();
  const std::size_t train_quota = std::size_t(std::llround(ratio * double(n)));
  const std::size_t test_quota = n - train_quota;

  std::map<std::string, std::vector<std::size_t>> members;
  std::vector<std::vector<std::string>> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    labels[i] = stratification_labels(records[i]);
    for (const auto& l : labels[i]) members[l].push_back(i);
  }

  std::vector<const std::pair<const std::string, std::vector<std::size_t>>*> order;
  for (const auto& kv : members) order.push_back(&kv);
  std::stable_sort(order.begin(), order.end(), [](auto* a, auto* b) { return a->second.size() < b->second.size(); });

  std::vector<Split> split(n, Split::Unassigned);
  std::map<std::string, std::pair<std::size_t, std::size_t>> tally;  // label -> (train, assigned)
  SplitResult result;
  std::mt19937_64 rng(seed);

  auto assign = [&](std::size_t i, Split s) {
    split[i] = s;
    (s == Split::Train ? result.train : result.test)++;
    for (const auto& l : labels[i]) {
      auto& t = tally[l];
      t.first += s == Split::Train;
      t.second += 1;
    }
  };
  auto cost = [&](std::size_t i, Split s) {
    double c = 0;
    for (const auto& l : labels[i]) {
      const auto [tr, as] = tally[l];
      c += std::abs(double(tr + (s == Split::Train)) / double(as + 1) - ratio);
    }
    return c;
  };
  auto choose = [&](std::size_t i) {
    if (result.train >= train_quota) return Split::Test;
    if (result.test >= test_quota) return Split::Train;
    return cost(i, Split::Train) <= cost(i, Split::Test) ? Split::Train : Split::Test;
  };

  for (const auto* group : order) {
    auto seqs = group->second;
    std::shuffle(seqs.begin(), seqs.end(), rng);
    if (seqs.size() == 1) {
      result.warnings.push_back("UnsatisfiableStratification: '" + group->first + "' has a single sequence (" +
                                records[seqs[0]].name + "), kept in train");
      if (split[seqs[0]] == Split::Unassigned) assign(seqs[0], Split::Train);
      continue;
    }
    for (auto i : seqs)
      if (split[i] == Split::Unassigned) assign(i, choose(i));
  }
  for (std::size_t i = 0; i < n; ++i)
    if (split[i] == Split::Unassigned) assign(i, choose(i));

  for (const auto& [label, seqs] : members) {
    if (seqs.size() < 2) continue;
    const auto [tr, as] = tally[label];
    if (tr == 0 || tr == as)
      result.warnings.push_back("label '" + label + "' appears only in " + (tr == 0 ? "test" : "train"));
  }
  for (std::size_t i = 0; i < n; ++i) result.assignment[records[i].name] = split[i];
  return result;
}

}  // namespace uwt
