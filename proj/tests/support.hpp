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

// Fixtures shared by the unit and acceptance tests.

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <unistd.h>

#include "uwtrack/dataset.hpp"
#include "uwtrack/image.hpp"
#include "uwtrack/model.hpp"

namespace uwt::testing {

inline Image random_image(int h, int w, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  RowMatrix<double> p(Eigen::Index(h) * w, 3);
  for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = u(rng);
  return Image(h, w, std::move(p));
}

/// Warm, lightly textured target and its darker blue-green cast version.
inline std::pair<Image, Image> color_cast_pair(int h, int w, double texture = 0.05) {
  RowMatrix<double> target(Eigen::Index(h) * w, 3), raw(Eigen::Index(h) * w, 3);
  const double mean[3] = {0.75, 0.6, 0.45};
  const double cast[3] = {0.05, 0.25, 0.35};
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) {
        const double v = mean[c] + texture * std::sin(0.35 * x + 0.25 * y + 1.3 * c) * std::cos(0.2 * x - 0.3 * y);
        target(y * w + x, c) = v;
        raw(y * w + x, c) = 0.6 * v + cast[c];
      }
  return {Image(h, w, std::move(raw)), Image(h, w, std::move(target))};
}

inline ModelConfig tiny_config(int size = 16, std::uint64_t seed = 1) {
  ModelConfig cfg;
  cfg.height = cfg.width = size;
  cfg.window = 4;
  cfg.channels = 8;
  cfg.layers = 1;
  cfg.heads = 4;
  cfg.seed = seed;
  return cfg;
}

inline SequenceRecord make_sequence(std::string name, std::size_t frames, Box box, int width = 640,
                                    int height = 480) {
  SequenceRecord r;
  r.name = std::move(name);
  r.frame_count = frames;
  r.width = width;
  r.height = height;
  r.boxes.assign(frames, box);
  return r;
}

/// Scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("uwtrack-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& p) const { return path_ / p; }

 private:
  std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::filesystem::create_directories(p.parent_path());
  std::ofstream(p, std::ios::binary) << text;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace uwt::testing
