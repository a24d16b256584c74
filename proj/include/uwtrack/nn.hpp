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

// Dense neural-network kernels with hand-written reverse passes. Every forward
// routine returns what its backward counterpart needs; backward routines
// accumulate parameter gradients (+=) and return the input gradient.

#include <cmath>

#include "uwtrack/image.hpp"

namespace uwt::nn {

/// 3x3 same-padded convolution. `weight` is cout x (9*cin); column
/// (ky*3 + kx)*cin + ci multiplies input channel ci at offset (ky-1, kx-1).
template <typename Scalar>
struct Conv3x3 {
  Matrix<Scalar> weight;
  Vector<Scalar> bias;

  int in_channels() const { return int(weight.cols() / 9); }
  int out_channels() const { return int(weight.rows()); }
};

template <typename Scalar>
RowMatrix<Scalar> im2col3x3(const BasicFeatureMap<Scalar>& in) {
  const int h = in.height(), w = in.width(), c = in.channels();
  RowMatrix<Scalar> cols = RowMatrix<Scalar>::Zero(Eigen::Index(h) * w, 9 * c);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const Eigen::Index row = Eigen::Index(y) * w + x;
      for (int ky = 0; ky < 3; ++ky) {
        const int sy = y + ky - 1;
        if (sy < 0 || sy >= h) continue;
        for (int kx = 0; kx < 3; ++kx) {
          const int sx = x + kx - 1;
          if (sx < 0 || sx >= w) continue;
          cols.row(row).segment((ky * 3 + kx) * c, c) = in.data().row(Eigen::Index(sy) * w + sx);
        }
      }
    }
  return cols;
}

template <typename Scalar>
BasicFeatureMap<Scalar> col2im3x3(const RowMatrix<Scalar>& cols, int h, int w, int c) {
  BasicFeatureMap<Scalar> out(h, w, c);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const Eigen::Index row = Eigen::Index(y) * w + x;
      for (int ky = 0; ky < 3; ++ky) {
        const int sy = y + ky - 1;
        if (sy < 0 || sy >= h) continue;
        for (int kx = 0; kx < 3; ++kx) {
          const int sx = x + kx - 1;
          if (sx < 0 || sx >= w) continue;
          out.data().row(Eigen::Index(sy) * w + sx) += cols.row(row).segment((ky * 3 + kx) * c, c);
        }
      }
    }
  return out;
}

template <typename Scalar>
struct ConvCache {
  RowMatrix<Scalar> cols;
  int height = 0, width = 0, in_channels = 0;
};

template <typename Scalar>
BasicFeatureMap<Scalar> conv_forward(const Conv3x3<Scalar>& conv, const BasicFeatureMap<Scalar>& in,
                                     ConvCache<Scalar>* cache = nullptr) {
  if (in.channels() != conv.in_channels())
    throw Error(ErrorCode::ShapeMismatch, "convolution expects " + std::to_string(conv.in_channels()) +
                                              " input channels, got " + std::to_string(in.channels()));
  RowMatrix<Scalar> cols = im2col3x3(in);
  RowMatrix<Scalar> out = cols * conv.weight.transpose();
  out.rowwise() += conv.bias.transpose();
  if (cache) *cache = {std::move(cols), in.height(), in.width(), in.channels()};
  return BasicFeatureMap<Scalar>(in.height(), in.width(), std::move(out));
}

template <typename Scalar>
BasicFeatureMap<Scalar> conv_backward(const Conv3x3<Scalar>& conv, const ConvCache<Scalar>& cache,
                                      const RowMatrix<Scalar>& grad_out, Conv3x3<Scalar>& grad) {
  grad.weight.noalias() += grad_out.transpose() * cache.cols;
  grad.bias += grad_out.colwise().sum().transpose();
  RowMatrix<Scalar> grad_cols = grad_out * conv.weight;
  return col2im3x3(grad_cols, cache.height, cache.width, cache.in_channels);
}

template <typename Derived>
auto relu(const Eigen::MatrixBase<Derived>& x) {
  return x.cwiseMax(typename Derived::Scalar(0));
}

/// Zeroes the gradient wherever the post-activation value is not positive.
template <typename Scalar>
void relu_backward_inplace(const RowMatrix<Scalar>& activated, RowMatrix<Scalar>& grad) {
  grad = (activated.array() > Scalar(0)).select(grad, Scalar(0));
}

// Layer normalization over the feature dimension of each token (row).
inline constexpr double kLayerNormEpsilon = 1e-5;

template <typename Scalar>
struct LayerNormCache {
  Matrix<Scalar> normalized;  // (x - mean) / sigma
  Vector<Scalar> inv_sigma;
};

template <typename Scalar>
Matrix<Scalar> layer_norm_forward(const Matrix<Scalar>& x, const Vector<Scalar>& gain, const Vector<Scalar>& bias,
                                  LayerNormCache<Scalar>* cache = nullptr) {
  const Eigen::Index n = x.rows(), d = x.cols();
  Matrix<Scalar> xhat(n, d);
  Vector<Scalar> inv_sigma(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Scalar mean = x.row(i).mean();
    const Scalar var = (x.row(i).array() - mean).square().mean();
    inv_sigma(i) = Scalar(1) / std::sqrt(var + Scalar(kLayerNormEpsilon));
    xhat.row(i) = (x.row(i).array() - mean) * inv_sigma(i);
  }
  Matrix<Scalar> y = (xhat.array().rowwise() * gain.transpose().array()).rowwise() + bias.transpose().array();
  if (cache) *cache = {std::move(xhat), std::move(inv_sigma)};
  return y;
}

template <typename Scalar>
Matrix<Scalar> layer_norm_backward(const LayerNormCache<Scalar>& cache, const Vector<Scalar>& gain,
                                   const Matrix<Scalar>& grad_out, Vector<Scalar>& grad_gain,
                                   Vector<Scalar>& grad_bias) {
  grad_gain += (grad_out.array() * cache.normalized.array()).colwise().sum().transpose().matrix();
  grad_bias += grad_out.colwise().sum().transpose();
  const Matrix<Scalar> gxhat = grad_out.array().rowwise() * gain.transpose().array();
  Matrix<Scalar> grad_in(gxhat.rows(), gxhat.cols());
  for (Eigen::Index i = 0; i < gxhat.rows(); ++i) {
    const Scalar mean_g = gxhat.row(i).mean();
    const Scalar mean_gx = gxhat.row(i).dot(cache.normalized.row(i)) / Scalar(gxhat.cols());
    grad_in.row(i) =
        cache.inv_sigma(i) * (gxhat.row(i).array() - mean_g - cache.normalized.row(i).array() * mean_gx);
  }
  return grad_in;
}

/// Exact (erf-based) GELU and its derivative.
template <typename Scalar>
Scalar gelu(Scalar x) {
  return Scalar(0.5) * x * (Scalar(1) + std::erf(x / std::sqrt(Scalar(2))));
}

template <typename Scalar>
Scalar gelu_derivative(Scalar x) {
  const Scalar cdf = Scalar(0.5) * (Scalar(1) + std::erf(x / std::sqrt(Scalar(2))));
  const Scalar pdf = std::exp(Scalar(-0.5) * x * x) / std::sqrt(Scalar(2) * Scalar(M_PI));
  return cdf + x * pdf;
}

/// Row-wise softmax, max-shifted.
template <typename Scalar>
Matrix<Scalar> softmax_rows(const Matrix<Scalar>& logits) {
  Matrix<Scalar> out(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const Scalar m = logits.row(i).maxCoeff();
    out.row(i) = (logits.row(i).array() - m).exp();
    out.row(i) /= out.row(i).sum();
  }
  return out;
}

template <typename Scalar>
Matrix<Scalar> softmax_rows_backward(const Matrix<Scalar>& probs, const Matrix<Scalar>& grad_probs) {
  const Vector<Scalar> inner = (probs.array() * grad_probs.array()).rowwise().sum();
  return probs.array() * (grad_probs.colwise() - inner).array();
}

}  // namespace uwt::nn
