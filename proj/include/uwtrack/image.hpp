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

#include <Eigen/Core>

#include <cmath>
#include <string>

#include "uwtrack/error.hpp"

namespace uwt {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Spatial map of `channels` values per pixel. Storage is an (h*w) x c row-major
/// matrix, so the underlying buffer is exactly the row-major h x w x c layout and
/// pixel (y, x) is row y*w + x.
template <typename Scalar>
class BasicFeatureMap {
 public:
  BasicFeatureMap() = default;
  BasicFeatureMap(int height, int width, int channels)
      : height_(height), width_(width), data_(RowMatrix<Scalar>::Zero(Eigen::Index(height) * width, channels)) {
    if (height <= 0 || width <= 0 || channels <= 0)
      throw Error(ErrorCode::ShapeMismatch, "feature map dimensions must be positive");
  }
  BasicFeatureMap(int height, int width, RowMatrix<Scalar> data)
      : height_(height), width_(width), data_(std::move(data)) {
    if (height <= 0 || width <= 0 || data_.cols() <= 0 || data_.rows() != Eigen::Index(height) * width)
      throw Error(ErrorCode::ShapeMismatch, "buffer does not match " + std::to_string(height) + "x" +
                                                std::to_string(width) + " feature map");
  }

  int height() const { return height_; }
  int width() const { return width_; }
  int channels() const { return int(data_.cols()); }

  const RowMatrix<Scalar>& data() const { return data_; }
  RowMatrix<Scalar>& data() { return data_; }

  Scalar operator()(int y, int x, int c) const { return data_(Eigen::Index(y) * width_ + x, c); }
  Scalar& operator()(int y, int x, int c) { return data_(Eigen::Index(y) * width_ + x, c); }

  bool same_shape(const BasicFeatureMap& o) const {
    return height_ == o.height_ && width_ == o.width_ && channels() == o.channels();
  }
  bool operator==(const BasicFeatureMap& o) const { return same_shape(o) && data_ == o.data_; }

 private:
  int height_ = 0;
  int width_ = 0;
  RowMatrix<Scalar> data_;
};

/// Three-channel image with every value in [0, 1].
template <typename Scalar>
class BasicImage {
 public:
  BasicImage() = default;
  BasicImage(int height, int width) : map_(height, width, 3) {}
  BasicImage(int height, int width, RowMatrix<Scalar> pixels) : map_(height, width, std::move(pixels)) {
    if (map_.channels() != 3) throw Error(ErrorCode::ShapeMismatch, "an image has exactly 3 channels");
    const auto& d = map_.data();
    for (Eigen::Index i = 0; i < d.size(); ++i) {
      const Scalar v = d.data()[i];
      if (!(v >= Scalar(0) && v <= Scalar(1)))
        throw Error(ErrorCode::OutOfRange, "pixel value outside [0,1] at buffer index " + std::to_string(i));
    }
  }

  /// Saturates every value into [0, 1] instead of rejecting it.
  static BasicImage clamped(int height, int width, RowMatrix<Scalar> pixels) {
    pixels = pixels.cwiseMax(Scalar(0)).cwiseMin(Scalar(1));
    return BasicImage(height, width, std::move(pixels));
  }

  int height() const { return map_.height(); }
  int width() const { return map_.width(); }
  Eigen::Index pixel_count() const { return Eigen::Index(height()) * width(); }

  const RowMatrix<Scalar>& pixels() const { return map_.data(); }
  const BasicFeatureMap<Scalar>& as_map() const { return map_; }

  Scalar operator()(int y, int x, int c) const { return map_(y, x, c); }

  bool same_shape(const BasicImage& o) const { return map_.same_shape(o.map_); }
  bool operator==(const BasicImage& o) const { return map_ == o.map_; }

 private:
  BasicFeatureMap<Scalar> map_;
};

using FeatureMap = BasicFeatureMap<double>;
using Image = BasicImage<double>;

/// n tokens by d features.
template <typename Scalar>
using TokenSequence = Matrix<Scalar>;

}  // namespace uwt
