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
#include <bit>
#include <sstream>

#include "support.hpp"
#include "uwtrack/enhance.hpp"
#include "uwtrack/image_io.hpp"

using namespace uwt;
using uwt::testing::random_image;

namespace {

Image constant_image(int h, int w, double r, double g, double b) {
  RowMatrix<double> p(Eigen::Index(h) * w, 3);
  p.col(0).setConstant(r);
  p.col(1).setConstant(g);
  p.col(2).setConstant(b);
  return Image(h, w, std::move(p));
}

// Histogram equalization recomputed from scratch for one channel of levels.
std::vector<int> equalize_levels(const std::vector<int>& levels) {
  const long n = long(levels.size());
  auto cdf = [&](int v) { return long(std::count_if(levels.begin(), levels.end(), [v](int l) { return l <= v; })); };
  long cdf_min = n;
  for (int l : levels) cdf_min = std::min(cdf_min, cdf(l));
  std::vector<int> out;
  for (int l : levels) {
    if (cdf_min == n) {
      out.push_back(l);
      continue;
    }
    out.push_back(int(std::lround(255.0 * double(cdf(l) - cdf_min) / double(n - cdf_min))));
  }
  return out;
}

Image from_levels(int h, int w, const std::vector<int>& levels_per_channel) {
  RowMatrix<double> p(Eigen::Index(h) * w, 3);
  for (Eigen::Index i = 0; i < p.rows(); ++i)
    for (int c = 0; c < 3; ++c) p(i, c) = levels_per_channel[std::size_t(i)] / 255.0;
  return Image(h, w, std::move(p));
}

}  // namespace

TEST_CASE("image rejects values outside the unit interval") {
  RowMatrix<double> p = RowMatrix<double>::Constant(4, 3, 0.5);
  p(2, 1) = 1.5;
  CHECK_THROWS_AS(Image(2, 2, p), Error);
  try {
    Image(2, 2, p);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::OutOfRange);
  }
  CHECK(Image::clamped(2, 2, p).pixels()(2, 1) == 1.0);
}

TEST_CASE("white balance") {
  SUBCASE("equal channel means leave the image untouched") {
    const auto img = constant_image(3, 5, 0.3, 0.3, 0.3);
    CHECK((white_balance(img).image.pixels() - img.pixels()).cwiseAbs().maxCoeff() <= 1e-15);
  }
  SUBCASE("constant color maps to its gray level") {
    const auto out = white_balance(constant_image(2, 2, 0.2, 0.4, 0.6)).image;
    for (Eigen::Index i = 0; i < out.pixels().size(); ++i) CHECK(out.pixels().data()[i] == doctest::Approx(0.4).epsilon(1e-12));
  }
  SUBCASE("zero channel is kept and flagged") {
    auto img = constant_image(2, 2, 0.0, 0.4, 0.6);
    const auto r = white_balance(img);
    CHECK(r.warning());
    CHECK(r.zero_channel[0]);
    CHECK(r.image.pixels().col(0).isZero());
  }
  SUBCASE("channel means equalize and a second pass is a no-op") {
    RowMatrix<double> p(64, 3);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.2, 0.4);
    for (Eigen::Index i = 0; i < p.rows(); ++i) p.row(i) << u(rng), u(rng) * 0.8, u(rng) * 1.2;
    const Image img(8, 8, p);
    const double global = p.mean();
    const auto once = white_balance(img).image;
    for (int c = 0; c < 3; ++c) CHECK(std::abs(once.pixels().col(c).mean() - global) < 1e-6);
    const auto twice = white_balance(once).image;
    CHECK((twice.pixels() - once.pixels()).cwiseAbs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("gamma correction") {
  const auto img = random_image(7, 9, 3);
  CHECK(gamma_correct(img, 1.0) == img);
  const auto quarter = constant_image(1, 1, 0.25, 0.0, 1.0);
  const auto out = gamma_correct(quarter, 0.5);
  CHECK(out.pixels()(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(out.pixels()(0, 1) == 0.0);
  CHECK(out.pixels()(0, 2) == 1.0);
  CHECK(gamma_correct(img, 0.7).pixels().mean() > img.pixels().mean());
  CHECK(gamma_correct(img, 1.5).pixels().mean() < img.pixels().mean());
  for (double bad : {0.0, -1.0, std::numeric_limits<double>::infinity(), std::nan("")}) {
    try {
      gamma_correct(img, bad);
      FAIL("expected InvalidGamma");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::InvalidGamma);
    }
  }
}

TEST_CASE("histogram equalization") {
  SUBCASE("constant image is unchanged") {
    const auto img = constant_image(4, 4, 0.3, 0.7, 0.1);
    CHECK(hist_equalize(img) == img);
  }
  SUBCASE("two extreme levels stay put") {
    const auto out = hist_equalize(from_levels(1, 2, {0, 255}));
    CHECK(out.pixels()(0, 0) == 0.0);
    CHECK(out.pixels()(1, 0) == 1.0);
  }
  SUBCASE("four-pixel example") {
    // cdf = (2, 3, 4), cdf_min = 2: level 20 maps to round(255 / 2) = 128.
    const auto out = hist_equalize(from_levels(1, 4, {10, 10, 20, 30}));
    const std::vector<int> expected = {0, 0, 128, 255};
    for (int i = 0; i < 4; ++i) CHECK(quantize_level(out.pixels()(i, 0)) == expected[std::size_t(i)]);
    CHECK(equalize_levels({10, 10, 20, 30}) == expected);
  }
  SUBCASE("matches a brute-force CDF recomputation and preserves order") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto img = random_image(6, 7, seed);
      const auto out = hist_equalize(img);
      for (int c = 0; c < 3; ++c) {
        std::vector<int> levels;
        for (Eigen::Index i = 0; i < img.pixels().rows(); ++i) levels.push_back(quantize_level(img.pixels()(i, c)));
        const auto expected = equalize_levels(levels);
        for (Eigen::Index i = 0; i < img.pixels().rows(); ++i) {
          CHECK(quantize_level(out.pixels()(i, c)) == expected[std::size_t(i)]);
          for (Eigen::Index j = 0; j < img.pixels().rows(); ++j)
            if (img.pixels()(i, c) <= img.pixels()(j, c)) CHECK(out.pixels()(i, c) <= out.pixels()(j, c));
        }
      }
    }
  }
}

TEST_CASE("psnr") {
  const auto zeros = constant_image(4, 4, 0, 0, 0);
  CHECK(std::isinf(psnr(zeros, zeros)));
  CHECK(psnr(zeros, constant_image(4, 4, 1, 1, 1)) == doctest::Approx(0.0));
  CHECK(psnr(zeros, constant_image(4, 4, 0.5, 0.5, 0.5)) == doctest::Approx(10 * std::log10(4.0)).epsilon(1e-12));
  CHECK_THROWS_AS(psnr(zeros, constant_image(4, 5, 0, 0, 0)), Error);
}

TEST_CASE("operators keep shape and range") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto img = random_image(5 + int(seed), 3 + int(seed), seed);
    for (const auto& out : {white_balance(img).image, gamma_correct(img, 0.7), hist_equalize(img)}) {
      CHECK(out.same_shape(img));
      CHECK(out.pixels().minCoeff() >= 0.0);
      CHECK(out.pixels().maxCoeff() <= 1.0);
    }
  }
}

TEST_CASE("raw image format roundtrips float32 values") {
  const auto img = random_image(5, 6, 11);
  std::stringstream ss;
  io::write_raw(ss, img);
  const std::string bytes = ss.str();
  CHECK(bytes.substr(0, 6) == "UWIMG1");
  CHECK(bytes.size() == 6 + 8 + 5 * 6 * 3 * 4);
  auto value_at = [&](std::size_t k) {
    std::uint32_t u = 0;
    for (int b = 0; b < 4; ++b) u |= std::uint32_t(std::uint8_t(bytes[14 + 4 * k + std::size_t(b)])) << (8 * b);
    return std::bit_cast<float>(u);
  };
  // Planar layout: the second value is pixel 1 of channel 0.
  CHECK(value_at(1) == float(img.pixels()(1, 0)));
  CHECK(value_at(30) == float(img.pixels()(0, 1)));
  const auto back = io::read_raw(ss);
  CHECK(back.height() == 5);
  CHECK(back.width() == 6);
  for (Eigen::Index i = 0; i < img.pixels().size(); ++i)
    CHECK(back.pixels().data()[i] == double(float(img.pixels().data()[i])));
}

TEST_CASE("8-bit codecs roundtrip quantized images") {
  uwt::testing::TempDir dir;
  RowMatrix<double> p(12, 3);
  for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = double((i * 37) % 256) / 255.0;
  const Image img(3, 4, p);
  for (const char* name : {"a.png", "a.ppm"}) {
    io::write_image(dir / name, img);
    CHECK(io::read_image(dir / name) == img);
  }
  CHECK_THROWS_AS(io::read_image(dir / "missing.png"), Error);
}
