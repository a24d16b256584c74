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

// Classical pre-enhancement operators applied to every raw frame before it
// enters the learned model: gray-world white balance, power-law gamma and
// per-channel histogram equalization.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "uwtrack/image.hpp"

namespace uwt {

/// Channels whose mean falls below this are left unscaled by white balance.
inline constexpr double kZeroChannelEpsilon = 1e-6;

template <typename Scalar>
struct WhiteBalanceScales {
  std::array<Scalar, 3> channel_mean{};
  Scalar global_mean{};
  std::array<Scalar, 3> scale{};
  std::array<bool, 3> zero_channel{};
};

template <typename Scalar>
WhiteBalanceScales<Scalar> white_balance_scales(const BasicImage<Scalar>& img) {
  WhiteBalanceScales<Scalar> s;
  const auto means = img.pixels().colwise().mean();
  s.global_mean = means.mean();
  for (int c = 0; c < 3; ++c) {
    s.channel_mean[c] = means(c);
    s.zero_channel[c] = means(c) < Scalar(kZeroChannelEpsilon);
    s.scale[c] = s.zero_channel[c] ? Scalar(1) : s.global_mean / means(c);
  }
  return s;
}

template <typename Scalar>
struct WhiteBalanceResult {
  BasicImage<Scalar> image;
  std::array<bool, 3> zero_channel{};

  bool warning() const { return zero_channel[0] || zero_channel[1] || zero_channel[2]; }
};

/// Gray-world correction: channel c is multiplied by global_mean / mean_c and the
/// result is clamped to [0, 1]. A channel with (near) zero mean is returned
/// unscaled and reported in `zero_channel`.
template <typename Scalar>
WhiteBalanceResult<Scalar> white_balance(const BasicImage<Scalar>& img) {
  const auto s = white_balance_scales(img);
  RowMatrix<Scalar> out = img.pixels();
  for (int c = 0; c < 3; ++c)
    if (s.scale[c] != Scalar(1)) out.col(c) *= s.scale[c];
  return {BasicImage<Scalar>::clamped(img.height(), img.width(), std::move(out)), s.zero_channel};
}

/// out = in^gamma element-wise. gamma < 1 brightens, gamma > 1 darkens.
template <typename Scalar>
BasicImage<Scalar> gamma_correct(const BasicImage<Scalar>& img, Scalar gamma) {
  if (!(gamma > Scalar(0)) || !std::isfinite(double(gamma)))
    throw Error(ErrorCode::InvalidGamma, "gamma must be positive and finite");
  if (gamma == Scalar(1)) return img;
  RowMatrix<Scalar> out = img.pixels().unaryExpr([gamma](Scalar v) { return Scalar(std::pow(v, gamma)); });
  return BasicImage<Scalar>(img.height(), img.width(), std::move(out));
}

inline constexpr int kHistogramLevels = 256;

inline int quantize_level(double v) {
  const long q = std::lround(v * (kHistogramLevels - 1));
  return int(std::clamp<long>(q, 0, kHistogramLevels - 1));
}

/// Level lookup table of classical histogram equalization for one channel.
/// Returns false for a degenerate (single-level) channel.
template <typename Derived>
bool equalization_table(const Eigen::DenseBase<Derived>& channel, std::array<int, kHistogramLevels>& table) {
  std::array<long, kHistogramLevels> hist{};
  for (Eigen::Index i = 0; i < channel.size(); ++i) ++hist[quantize_level(double(channel(i)))];
  const long n = channel.size();
  long cdf = 0, cdf_min = 0;
  for (int l = 0; l < kHistogramLevels; ++l) {
    cdf += hist[l];
    if (cdf_min == 0 && cdf > 0) cdf_min = cdf;
  }
  if (cdf_min == n) return false;
  cdf = 0;
  for (int l = 0; l < kHistogramLevels; ++l) {
    cdf += hist[l];
    const double mapped = double(kHistogramLevels - 1) * double(cdf - cdf_min) / double(n - cdf_min);
    table[l] = cdf < cdf_min ? 0 : int(std::lround(mapped));
  }
  return true;
}

/// Independent per-channel equalization over 256 quantized levels.
template <typename Scalar>
BasicImage<Scalar> hist_equalize(const BasicImage<Scalar>& img) {
  RowMatrix<Scalar> out = img.pixels();
  std::array<int, kHistogramLevels> table{};
  for (int c = 0; c < 3; ++c) {
    if (!equalization_table(img.pixels().col(c), table)) continue;
    for (Eigen::Index i = 0; i < out.rows(); ++i)
      out(i, c) = Scalar(table[quantize_level(double(img.pixels()(i, c)))]) / Scalar(kHistogramLevels - 1);
  }
  return BasicImage<Scalar>(img.height(), img.width(), std::move(out));
}

/// Peak signal-to-noise ratio in dB for unit-range images; +infinity when the
/// images are identical.
template <typename Scalar>
double psnr(const BasicImage<Scalar>& a, const BasicImage<Scalar>& b) {
  if (!a.same_shape(b)) throw Error(ErrorCode::ShapeMismatch, "psnr needs images of equal size");
  const double mse = double((a.pixels() - b.pixels()).squaredNorm()) / double(a.pixels().size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

}  // namespace uwt
