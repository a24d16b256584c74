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

// Transformer-based underwater enhancement model: a shared convolutional
// feature head, window tokenization with a learnable positional encoding, a
// pre-norm self-attention encoder shared across the four input branches,
// linear latent fusion and a convolutional decoder.

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <type_traits>
#include <vector>

#include "uwtrack/enhance.hpp"
#include "uwtrack/nn.hpp"

namespace uwt {

struct ModelConfig {
  int height = 64;
  int width = 64;
  int window = 8;    // side p of a square token window
  int channels = 64;
  int layers = 4;
  int heads = 4;
  int mlp_hidden = 0;  // 0 selects 2 * token_dim()
  double pre_gamma = 0.7;  // exponent of the gamma-corrected branch
  std::uint64_t seed = 0;

  int tokens() const { return (height / window) * (width / window); }
  int token_dim() const { return window * window * channels; }
  int hidden() const { return mlp_hidden > 0 ? mlp_hidden : 2 * token_dim(); }
  int head_dim() const { return token_dim() / heads; }

  void validate() const {
    if (height <= 0 || width <= 0 || window <= 0)
      throw Error(ErrorCode::InvalidConfig, "image and window sizes must be positive");
    if (height % window != 0 || width % window != 0)
      throw Error(ErrorCode::IndivisibleWindow, "window " + std::to_string(window) + " does not divide " +
                                                    std::to_string(height) + "x" + std::to_string(width));
    if (channels < 1 || layers < 0 || heads < 1 || mlp_hidden < 0)
      throw Error(ErrorCode::InvalidConfig, "channels >= 1, layers >= 0, heads >= 1 required");
    if (token_dim() % heads != 0)
      throw Error(ErrorCode::InvalidConfig, "token dimension " + std::to_string(token_dim()) +
                                                " is not divisible by " + std::to_string(heads) + " heads");
    if (!(pre_gamma > 0.0) || !std::isfinite(pre_gamma))
      throw Error(ErrorCode::InvalidGamma, "branch gamma must be positive");
  }

  bool operator==(const ModelConfig&) const = default;
};

template <typename Scalar>
struct ResidualBlock {
  nn::Conv3x3<Scalar> first;
  nn::Conv3x3<Scalar> second;
};

/// conv -> ReLU -> two residual blocks [conv -> ReLU -> conv, + skip, ReLU].
template <typename Scalar>
struct ConvTrunk {
  nn::Conv3x3<Scalar> stem;
  std::array<ResidualBlock<Scalar>, 2> blocks;
};

template <typename Scalar>
struct EncoderLayer {
  Vector<Scalar> ln1_gain, ln1_bias;
  Matrix<Scalar> wq, wk, wv, wo;  // d x d, applied as tokens * W
  Vector<Scalar> ln2_gain, ln2_bias;
  Matrix<Scalar> mlp_w1;  // d x hidden
  Vector<Scalar> mlp_b1;
  Matrix<Scalar> mlp_w2;  // hidden x d
  Vector<Scalar> mlp_b2;
};

/// Named view of one parameter tensor (rank 0, 1 or 2).
template <typename Scalar>
struct TensorRef {
  std::string name;
  std::vector<std::int64_t> shape;
  Scalar* data;
  Eigen::Index size;

  using Plain = Vector<std::remove_const_t<Scalar>>;
  using Mapped = std::conditional_t<std::is_const_v<Scalar>, const Plain, Plain>;

  Eigen::Map<Mapped> values() const { return {data, size}; }
};

template <typename Scalar>
struct ModelParams {
  ConvTrunk<Scalar> head;
  Matrix<Scalar> pos_encoding;  // n x d
  std::vector<EncoderLayer<Scalar>> layers;
  Scalar alpha{}, beta{}, gamma{};
  ConvTrunk<Scalar> decoder;
  nn::Conv3x3<Scalar> output;

  /// Every tensor in a fixed order; the order defines the checkpoint layout.
  std::vector<TensorRef<Scalar>> tensors() {
    std::vector<TensorRef<Scalar>> out;
    auto mat = [&](std::string name, Matrix<Scalar>& m) {
      out.push_back({std::move(name), {m.rows(), m.cols()}, m.data(), m.size()});
    };
    auto vec = [&](std::string name, Vector<Scalar>& v) {
      out.push_back({std::move(name), {v.size()}, v.data(), v.size()});
    };
    auto conv = [&](const std::string& name, nn::Conv3x3<Scalar>& c) {
      mat(name + ".weight", c.weight);
      vec(name + ".bias", c.bias);
    };
    auto trunk = [&](const std::string& name, ConvTrunk<Scalar>& t) {
      conv(name + ".stem", t.stem);
      for (int b = 0; b < 2; ++b) {
        conv(name + ".block" + std::to_string(b) + ".first", t.blocks[b].first);
        conv(name + ".block" + std::to_string(b) + ".second", t.blocks[b].second);
      }
    };
    trunk("head", head);
    mat("pos_encoding", pos_encoding);
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const std::string p = "encoder" + std::to_string(i) + ".";
      auto& l = layers[i];
      vec(p + "ln1_gain", l.ln1_gain);
      vec(p + "ln1_bias", l.ln1_bias);
      mat(p + "wq", l.wq);
      mat(p + "wk", l.wk);
      mat(p + "wv", l.wv);
      mat(p + "wo", l.wo);
      vec(p + "ln2_gain", l.ln2_gain);
      vec(p + "ln2_bias", l.ln2_bias);
      mat(p + "mlp_w1", l.mlp_w1);
      vec(p + "mlp_b1", l.mlp_b1);
      mat(p + "mlp_w2", l.mlp_w2);
      vec(p + "mlp_b2", l.mlp_b2);
    }
    out.push_back({"fusion.alpha", {}, &alpha, 1});
    out.push_back({"fusion.beta", {}, &beta, 1});
    out.push_back({"fusion.gamma", {}, &gamma, 1});
    trunk("decoder", decoder);
    conv("decoder.output", output);
    return out;
  }

  std::vector<TensorRef<const Scalar>> tensors() const {
    std::vector<TensorRef<const Scalar>> out;
    for (auto& t : const_cast<ModelParams*>(this)->tensors()) out.push_back({t.name, t.shape, t.data, t.size});
    return out;
  }

  Eigen::Index parameter_count() const {
    Eigen::Index n = 0;
    for (const auto& t : tensors()) n += t.size;
    return n;
  }

  /// Same shapes, all values zero. Used as the gradient accumulator.
  ModelParams zeros_like() const {
    ModelParams z = *this;
    for (auto& t : z.tensors()) t.values().setZero();
    return z;
  }

  bool operator==(const ModelParams& o) const {
    const auto a = tensors(), b = o.tensors();
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
      if (a[i].shape != b[i].shape || a[i].values() != b[i].values()) return false;
    return true;
  }
};

/// Gradients share the parameter layout.
template <typename Scalar>
using GradientSet = ModelParams<Scalar>;

/// Rounds every parameter to the nearest float32 so a checkpoint (float32
/// payload) reproduces the in-memory model exactly.
template <typename Scalar>
void round_to_storage_precision(ModelParams<Scalar>& params) {
  for (auto& t : params.tensors())
    for (Eigen::Index i = 0; i < t.size; ++i) t.data[i] = Scalar(float(t.data[i]));
}

namespace detail {

template <typename Scalar>
nn::Conv3x3<Scalar> he_uniform_conv(int cin, int cout, std::mt19937_64& rng) {
  const double bound = std::sqrt(6.0 / (9.0 * cin));
  std::uniform_real_distribution<double> dist(-bound, bound);
  nn::Conv3x3<Scalar> c{Matrix<Scalar>(cout, 9 * cin), Vector<Scalar>::Zero(cout)};
  for (Eigen::Index i = 0; i < c.weight.size(); ++i) c.weight.data()[i] = Scalar(dist(rng));
  return c;
}

template <typename Scalar>
Matrix<Scalar> he_uniform_matrix(int fan_in, int fan_out, std::mt19937_64& rng) {
  const double bound = std::sqrt(6.0 / fan_in);
  std::uniform_real_distribution<double> dist(-bound, bound);
  Matrix<Scalar> m(fan_in, fan_out);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = Scalar(dist(rng));
  return m;
}

inline constexpr double kResidualInitScale = 0.3;
inline constexpr double kOutputInitScale = 0.3;
inline constexpr double kOutputInitBias = 0.5;

template <typename Scalar>
ConvTrunk<Scalar> make_trunk(int cin, int c, std::mt19937_64& rng) {
  ConvTrunk<Scalar> t;
  t.stem = he_uniform_conv<Scalar>(cin, c, rng);
  for (auto& b : t.blocks) {
    b.first = he_uniform_conv<Scalar>(c, c, rng);
    b.second = he_uniform_conv<Scalar>(c, c, rng);
    b.second.weight *= Scalar(kResidualInitScale);
  }
  return t;
}

}  // namespace detail

/// Seeded initialization: He-uniform convolutions and projections, zero biases,
/// unit layer-norm gains, N(0, 0.02^2) positional encoding and fusion weights
/// of 1/3 each. The last projection of every residual branch is damped by
/// kResidualInitScale and the output convolution starts at mid-gray (bias 0.5,
/// weights times kOutputInitScale) so the first outputs sit inside the clamp
/// range. Values are rounded to float32 precision.
template <typename Scalar = double>
ModelParams<Scalar> init_params(const ModelConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  const int c = cfg.channels, n = cfg.tokens(), d = cfg.token_dim(), hidden = cfg.hidden();
  ModelParams<Scalar> p;
  p.head = detail::make_trunk<Scalar>(3, c, rng);
  p.pos_encoding.resize(n, d);
  std::normal_distribution<double> normal(0.0, 0.02);
  for (Eigen::Index i = 0; i < p.pos_encoding.size(); ++i) p.pos_encoding.data()[i] = Scalar(normal(rng));
  for (int l = 0; l < cfg.layers; ++l) {
    EncoderLayer<Scalar> layer;
    layer.ln1_gain = Vector<Scalar>::Ones(d);
    layer.ln1_bias = Vector<Scalar>::Zero(d);
    layer.wq = detail::he_uniform_matrix<Scalar>(d, d, rng);
    layer.wk = detail::he_uniform_matrix<Scalar>(d, d, rng);
    layer.wv = detail::he_uniform_matrix<Scalar>(d, d, rng);
    layer.wo = detail::he_uniform_matrix<Scalar>(d, d, rng) * Scalar(detail::kResidualInitScale);
    layer.ln2_gain = Vector<Scalar>::Ones(d);
    layer.ln2_bias = Vector<Scalar>::Zero(d);
    layer.mlp_w1 = detail::he_uniform_matrix<Scalar>(d, hidden, rng);
    layer.mlp_b1 = Vector<Scalar>::Zero(hidden);
    layer.mlp_w2 = detail::he_uniform_matrix<Scalar>(hidden, d, rng) * Scalar(detail::kResidualInitScale);
    layer.mlp_b2 = Vector<Scalar>::Zero(d);
    p.layers.push_back(std::move(layer));
  }
  p.alpha = p.beta = p.gamma = Scalar(1) / Scalar(3);
  p.decoder = detail::make_trunk<Scalar>(c, c, rng);
  p.output = detail::he_uniform_conv<Scalar>(c, 3, rng);
  p.output.weight *= Scalar(detail::kOutputInitScale);
  p.output.bias.setConstant(Scalar(detail::kOutputInitBias));
  round_to_storage_precision(p);
  return p;
}

template <typename Scalar>
void check_params(const ModelParams<Scalar>& p, const ModelConfig& cfg) {
  const int c = cfg.channels, d = cfg.token_dim();
  auto conv_ok = [](const nn::Conv3x3<Scalar>& conv, int cin, int cout) {
    return conv.weight.rows() == cout && conv.weight.cols() == 9 * cin && conv.bias.size() == cout;
  };
  auto trunk_ok = [&](const ConvTrunk<Scalar>& t, int cin) {
    bool ok = conv_ok(t.stem, cin, c);
    for (const auto& b : t.blocks) ok = ok && conv_ok(b.first, c, c) && conv_ok(b.second, c, c);
    return ok;
  };
  bool ok = trunk_ok(p.head, 3) && trunk_ok(p.decoder, c) && conv_ok(p.output, c, 3) &&
            p.pos_encoding.rows() == cfg.tokens() && p.pos_encoding.cols() == d &&
            int(p.layers.size()) == cfg.layers;
  for (const auto& l : p.layers)
    ok = ok && l.wq.rows() == d && l.wq.cols() == d && l.mlp_w1.rows() == d && l.mlp_w1.cols() == cfg.hidden() &&
         l.mlp_w2.cols() == d && l.ln1_gain.size() == d;
  if (!ok) throw Error(ErrorCode::ShapeMismatch, "parameters do not match the model configuration");
}

// ---------------------------------------------------------------------------
// Window tokenization

/// Splits a feature map into non-overlapping window x window tiles (row-major
/// tile order); each tile is flattened row-major (y, x, channel) into one token.
template <typename Scalar>
TokenSequence<Scalar> windowize(const BasicFeatureMap<Scalar>& f, int window) {
  if (window <= 0 || f.height() % window != 0 || f.width() % window != 0)
    throw Error(ErrorCode::IndivisibleWindow, "window " + std::to_string(window) + " does not divide " +
                                                  std::to_string(f.height()) + "x" + std::to_string(f.width()));
  const int c = f.channels(), tiles_x = f.width() / window;
  const int n = (f.height() / window) * tiles_x;
  TokenSequence<Scalar> tokens(n, window * window * c);
  for (int t = 0; t < n; ++t) {
    const int y0 = (t / tiles_x) * window, x0 = (t % tiles_x) * window;
    for (int py = 0; py < window; ++py)
      for (int px = 0; px < window; ++px)
        tokens.row(t).segment((py * window + px) * c, c) =
            f.data().row(Eigen::Index(y0 + py) * f.width() + x0 + px);
  }
  return tokens;
}

template <typename Scalar>
BasicFeatureMap<Scalar> dewindowize(const TokenSequence<Scalar>& tokens, int height, int width, int window,
                                    int channels) {
  if (window <= 0 || height % window != 0 || width % window != 0)
    throw Error(ErrorCode::IndivisibleWindow, "window does not divide the target map");
  const int tiles_x = width / window;
  if (tokens.rows() != (height / window) * tiles_x || tokens.cols() != window * window * channels)
    throw Error(ErrorCode::ShapeMismatch, "token sequence does not match the target map");
  BasicFeatureMap<Scalar> f(height, width, channels);
  for (int t = 0; t < tokens.rows(); ++t) {
    const int y0 = (t / tiles_x) * window, x0 = (t % tiles_x) * window;
    for (int py = 0; py < window; ++py)
      for (int px = 0; px < window; ++px)
        f.data().row(Eigen::Index(y0 + py) * width + x0 + px) =
            tokens.row(t).segment((py * window + px) * channels, channels);
  }
  return f;
}

template <typename Scalar>
BasicFeatureMap<Scalar> dewindowize(const TokenSequence<Scalar>& tokens, const ModelConfig& cfg) {
  return dewindowize(tokens, cfg.height, cfg.width, cfg.window, cfg.channels);
}

// ---------------------------------------------------------------------------
// Convolutional trunk (feature head and decoder body)

template <typename Scalar>
struct TrunkCache {
  nn::ConvCache<Scalar> stem;
  RowMatrix<Scalar> stem_act;
  struct Block {
    nn::ConvCache<Scalar> first, second;
    RowMatrix<Scalar> first_act, out_act;
  };
  std::array<Block, 2> blocks;
};

template <typename Scalar>
BasicFeatureMap<Scalar> trunk_forward(const ConvTrunk<Scalar>& t, const BasicFeatureMap<Scalar>& in,
                                      TrunkCache<Scalar>* cache = nullptr) {
  auto stem = nn::conv_forward(t.stem, in, cache ? &cache->stem : nullptr);
  BasicFeatureMap<Scalar> x(in.height(), in.width(), RowMatrix<Scalar>(nn::relu(stem.data())));
  if (cache) cache->stem_act = x.data();
  for (int b = 0; b < 2; ++b) {
    auto* bc = cache ? &cache->blocks[b] : nullptr;
    auto first = nn::conv_forward(t.blocks[b].first, x, bc ? &bc->first : nullptr);
    first.data() = nn::relu(first.data());
    if (bc) bc->first_act = first.data();
    auto second = nn::conv_forward(t.blocks[b].second, first, bc ? &bc->second : nullptr);
    x.data() = nn::relu(second.data() + x.data());
    if (bc) bc->out_act = x.data();
  }
  return x;
}

/// Returns the gradient w.r.t. the trunk input (empty when `need_input_grad` is false).
template <typename Scalar>
RowMatrix<Scalar> trunk_backward(const ConvTrunk<Scalar>& t, const TrunkCache<Scalar>& cache, RowMatrix<Scalar> grad,
                                 ConvTrunk<Scalar>& g, bool need_input_grad) {
  for (int b = 1; b >= 0; --b) {
    const auto& bc = cache.blocks[b];
    nn::relu_backward_inplace(bc.out_act, grad);
    RowMatrix<Scalar> grad_first = nn::conv_backward(t.blocks[b].second, bc.second, grad, g.blocks[b].second).data();
    nn::relu_backward_inplace(bc.first_act, grad_first);
    grad += nn::conv_backward(t.blocks[b].first, bc.first, grad_first, g.blocks[b].first).data();
  }
  nn::relu_backward_inplace(cache.stem_act, grad);
  if (!need_input_grad) {
    g.stem.weight.noalias() += grad.transpose() * cache.stem.cols;
    g.stem.bias += grad.colwise().sum().transpose();
    return {};
  }
  return nn::conv_backward(t.stem, cache.stem, grad, g.stem).data();
}

template <typename Scalar>
BasicFeatureMap<Scalar> extract_features(const BasicImage<Scalar>& img, const ModelParams<Scalar>& params,
                                         TrunkCache<Scalar>* cache = nullptr) {
  return trunk_forward(params.head, img.as_map(), cache);
}

template <typename Scalar>
BasicFeatureMap<Scalar> extract_features(const BasicImage<Scalar>& img, const ModelParams<Scalar>& params,
                                         const ModelConfig& cfg, TrunkCache<Scalar>* cache = nullptr) {
  if (img.height() != cfg.height || img.width() != cfg.width)
    throw Error(ErrorCode::ShapeMismatch, "image is " + std::to_string(img.height()) + "x" +
                                              std::to_string(img.width()) + ", model expects " +
                                              std::to_string(cfg.height) + "x" + std::to_string(cfg.width));
  return extract_features(img, params, cache);
}

// ---------------------------------------------------------------------------
// Encoder

template <typename Scalar>
struct EncoderLayerCache {
  nn::LayerNormCache<Scalar> ln1, ln2;
  Matrix<Scalar> normed, q, k, v;
  std::vector<Matrix<Scalar>> attention;  // one n x n matrix per head
  Matrix<Scalar> heads_out, normed2, hidden_pre, hidden_act;
};

template <typename Scalar>
struct EncoderCache {
  std::vector<EncoderLayerCache<Scalar>> layers;
};

template <typename Scalar>
Matrix<Scalar> encoder_layer_forward(const EncoderLayer<Scalar>& layer, int heads, const Matrix<Scalar>& p,
                                     EncoderLayerCache<Scalar>& c) {
  const Eigen::Index d = p.cols(), dh = d / heads;
  const Scalar scale = Scalar(1) / std::sqrt(Scalar(dh));
  c.normed = nn::layer_norm_forward(p, layer.ln1_gain, layer.ln1_bias, &c.ln1);
  c.q.noalias() = c.normed * layer.wq;
  c.k.noalias() = c.normed * layer.wk;
  c.v.noalias() = c.normed * layer.wv;
  c.heads_out.resize(p.rows(), d);
  c.attention.resize(heads);
  for (int h = 0; h < heads; ++h) {
    const auto q = c.q.middleCols(h * dh, dh);
    const auto k = c.k.middleCols(h * dh, dh);
    c.attention[h] = nn::softmax_rows<Scalar>((q * k.transpose()) * scale);
    c.heads_out.middleCols(h * dh, dh).noalias() = c.attention[h] * c.v.middleCols(h * dh, dh);
  }
  Matrix<Scalar> p_hat = p;
  p_hat.noalias() += c.heads_out * layer.wo;
  c.normed2 = nn::layer_norm_forward(p_hat, layer.ln2_gain, layer.ln2_bias, &c.ln2);
  c.hidden_pre = c.normed2 * layer.mlp_w1;
  c.hidden_pre.rowwise() += layer.mlp_b1.transpose();
  c.hidden_act = c.hidden_pre.unaryExpr([](Scalar x) { return nn::gelu(x); });
  Matrix<Scalar> out = p_hat;
  out.noalias() += c.hidden_act * layer.mlp_w2;
  out.rowwise() += layer.mlp_b2.transpose();
  return out;
}

template <typename Scalar>
Matrix<Scalar> encoder_layer_backward(const EncoderLayer<Scalar>& layer, int heads, const EncoderLayerCache<Scalar>& c,
                                      const Matrix<Scalar>& grad_out, EncoderLayer<Scalar>& g) {
  const Eigen::Index d = grad_out.cols(), dh = d / heads;
  const Scalar scale = Scalar(1) / std::sqrt(Scalar(dh));
  // MLP sub-layer
  g.mlp_w2.noalias() += c.hidden_act.transpose() * grad_out;
  g.mlp_b2 += grad_out.colwise().sum().transpose();
  Matrix<Scalar> grad_hidden = grad_out * layer.mlp_w2.transpose();
  grad_hidden.array() *= c.hidden_pre.unaryExpr([](Scalar x) { return nn::gelu_derivative(x); }).array();
  g.mlp_w1.noalias() += c.normed2.transpose() * grad_hidden;
  g.mlp_b1 += grad_hidden.colwise().sum().transpose();
  const Matrix<Scalar> grad_normed2 = grad_hidden * layer.mlp_w1.transpose();
  Matrix<Scalar> grad_p_hat = grad_out + nn::layer_norm_backward(c.ln2, layer.ln2_gain, grad_normed2, g.ln2_gain, g.ln2_bias);
  // attention sub-layer
  g.wo.noalias() += c.heads_out.transpose() * grad_p_hat;
  const Matrix<Scalar> grad_heads = grad_p_hat * layer.wo.transpose();
  Matrix<Scalar> gq(c.q.rows(), d), gk(c.k.rows(), d), gv(c.v.rows(), d);
  for (int h = 0; h < heads; ++h) {
    const auto go = grad_heads.middleCols(h * dh, dh);
    const Matrix<Scalar>& a = c.attention[h];
    gv.middleCols(h * dh, dh).noalias() = a.transpose() * go;
    const Matrix<Scalar> grad_a = go * c.v.middleCols(h * dh, dh).transpose();
    const Matrix<Scalar> grad_logits = nn::softmax_rows_backward(a, grad_a) * scale;
    gq.middleCols(h * dh, dh).noalias() = grad_logits * c.k.middleCols(h * dh, dh);
    gk.middleCols(h * dh, dh).noalias() = grad_logits.transpose() * c.q.middleCols(h * dh, dh);
  }
  g.wq.noalias() += c.normed.transpose() * gq;
  g.wk.noalias() += c.normed.transpose() * gk;
  g.wv.noalias() += c.normed.transpose() * gv;
  Matrix<Scalar> grad_normed = gq * layer.wq.transpose();
  grad_normed.noalias() += gk * layer.wk.transpose();
  grad_normed.noalias() += gv * layer.wv.transpose();
  return grad_p_hat + nn::layer_norm_backward(c.ln1, layer.ln1_gain, grad_normed, g.ln1_gain, g.ln1_bias);
}

/// p_0 = tokens + positional encoding, followed by the pre-norm layers
/// p^ = MSA(LN(p)) + p, p' = MLP(LN(p^)) + p^. Returns p_L with no trailing norm.
template <typename Scalar>
TokenSequence<Scalar> encode(const TokenSequence<Scalar>& tokens, const ModelParams<Scalar>& params, int heads,
                             EncoderCache<Scalar>* cache = nullptr) {
  if (tokens.rows() != params.pos_encoding.rows() || tokens.cols() != params.pos_encoding.cols())
    throw Error(ErrorCode::ShapeMismatch, "token sequence is " + std::to_string(tokens.rows()) + "x" +
                                              std::to_string(tokens.cols()) + ", positional encoding is " +
                                              std::to_string(params.pos_encoding.rows()) + "x" +
                                              std::to_string(params.pos_encoding.cols()));
  TokenSequence<Scalar> p = tokens + params.pos_encoding;
  EncoderCache<Scalar> local;
  EncoderCache<Scalar>& c = cache ? *cache : local;
  c.layers.resize(params.layers.size());
  for (std::size_t l = 0; l < params.layers.size(); ++l) p = encoder_layer_forward(params.layers[l], heads, p, c.layers[l]);
  return p;
}

template <typename Scalar>
TokenSequence<Scalar> encode(const TokenSequence<Scalar>& tokens, const ModelParams<Scalar>& params,
                             const ModelConfig& cfg, EncoderCache<Scalar>* cache = nullptr) {
  return encode(tokens, params, cfg.heads, cache);
}

/// Returns the gradient w.r.t. the encoder input tokens and accumulates the
/// positional-encoding gradient.
template <typename Scalar>
TokenSequence<Scalar> encode_backward(const ModelParams<Scalar>& params, int heads, const EncoderCache<Scalar>& cache,
                                      TokenSequence<Scalar> grad, ModelParams<Scalar>& g) {
  for (std::size_t l = params.layers.size(); l-- > 0;)
    grad = encoder_layer_backward(params.layers[l], heads, cache.layers[l], grad, g.layers[l]);
  g.pos_encoding += grad;
  return grad;
}

// ---------------------------------------------------------------------------
// Fusion and decoding

/// U + alpha*U_wb + beta*U_gc + gamma*U_he. Zero weights leave U untouched.
template <typename Scalar>
TokenSequence<Scalar> fuse_latents(const TokenSequence<Scalar>& u, const TokenSequence<Scalar>& u_wb,
                                   const TokenSequence<Scalar>& u_gc, const TokenSequence<Scalar>& u_he, Scalar alpha,
                                   Scalar beta, Scalar gamma) {
  for (const auto* t : {&u_wb, &u_gc, &u_he})
    if (t->rows() != u.rows() || t->cols() != u.cols())
      throw Error(ErrorCode::ShapeMismatch, "fused latents must share one shape");
  TokenSequence<Scalar> out = u;
  if (alpha != Scalar(0)) out += alpha * u_wb;
  if (beta != Scalar(0)) out += beta * u_gc;
  if (gamma != Scalar(0)) out += gamma * u_he;
  return out;
}

template <typename Scalar>
struct DecoderCache {
  TrunkCache<Scalar> trunk;
  nn::ConvCache<Scalar> output;
  RowMatrix<Scalar> pre_clamp;
};

/// Re-spatializes the latent, runs the decoder trunk and the 3-channel output
/// convolution, then saturates into [0, 1].
template <typename Scalar>
BasicImage<Scalar> decode(const TokenSequence<Scalar>& latent, const ModelParams<Scalar>& params,
                          const ModelConfig& cfg, DecoderCache<Scalar>* cache = nullptr) {
  const auto f = dewindowize(latent, cfg);
  const auto body = trunk_forward(params.decoder, f, cache ? &cache->trunk : nullptr);
  auto out = nn::conv_forward(params.output, body, cache ? &cache->output : nullptr);
  if (cache) cache->pre_clamp = out.data();
  return BasicImage<Scalar>::clamped(cfg.height, cfg.width, std::move(out.data()));
}

/// Gradient of the decoder input latent. Saturated outputs pass no gradient.
template <typename Scalar>
TokenSequence<Scalar> decode_backward(const ModelParams<Scalar>& params, const ModelConfig& cfg,
                                      const DecoderCache<Scalar>& cache, RowMatrix<Scalar> grad, ModelParams<Scalar>& g) {
  grad = (cache.pre_clamp.array() >= Scalar(0) && cache.pre_clamp.array() <= Scalar(1)).select(grad, Scalar(0));
  RowMatrix<Scalar> grad_body = nn::conv_backward(params.output, cache.output, grad, g.output).data();
  RowMatrix<Scalar> grad_in = trunk_backward(params.decoder, cache.trunk, std::move(grad_body), g.decoder, true);
  return windowize(BasicFeatureMap<Scalar>(cfg.height, cfg.width, std::move(grad_in)), cfg.window);
}

// ---------------------------------------------------------------------------
// Full pipeline

enum Branch : int { kRaw = 0, kWhiteBalance = 1, kGamma = 2, kEqualized = 3 };
inline constexpr int kBranches = 4;

template <typename Scalar>
using BranchImages = std::array<BasicImage<Scalar>, kBranches>;

template <typename Scalar>
BranchImages<Scalar> preprocess(const BasicImage<Scalar>& x, const ModelConfig& cfg) {
  return {x, white_balance(x).image, gamma_correct(x, Scalar(cfg.pre_gamma)), hist_equalize(x)};
}

/// One image routed through the shared head and encoder.
template <typename Scalar>
struct Embedding {
  BasicFeatureMap<Scalar> features;
  TokenSequence<Scalar> latent;
  TrunkCache<Scalar> head_cache;
  EncoderCache<Scalar> encoder_cache;
};

template <typename Scalar>
Embedding<Scalar> embed(const BasicImage<Scalar>& img, const ModelParams<Scalar>& params, const ModelConfig& cfg) {
  Embedding<Scalar> e;
  e.features = extract_features(img, params, cfg, &e.head_cache);
  e.latent = encode(windowize(e.features, cfg.window), params, cfg.heads, &e.encoder_cache);
  return e;
}

/// Backpropagates a latent gradient (plus an optional direct feature-map
/// gradient) through the encoder and head. Returns the image gradient when
/// requested.
template <typename Scalar>
RowMatrix<Scalar> embed_backward(const Embedding<Scalar>& e, const ModelParams<Scalar>& params, const ModelConfig& cfg,
                                 const TokenSequence<Scalar>& grad_latent, const std::type_identity_t<RowMatrix<Scalar>>* grad_features,
                                 ModelParams<Scalar>& g, bool need_input_grad) {
  const auto grad_tokens = encode_backward(params, cfg.heads, e.encoder_cache, grad_latent, g);
  RowMatrix<Scalar> grad_f = dewindowize(grad_tokens, cfg).data();
  if (grad_features) grad_f += *grad_features;
  return trunk_backward(params.head, e.head_cache, std::move(grad_f), g.head, need_input_grad);
}

template <typename Scalar>
struct ForwardResult {
  BasicImage<Scalar> output;
  std::array<TokenSequence<Scalar>, kBranches> latents;
  TokenSequence<Scalar> fused;
};

/// Intermediates kept for the reverse pass.
template <typename Scalar>
struct ForwardTrace {
  std::array<Embedding<Scalar>, kBranches> branches;
  TokenSequence<Scalar> fused;
  DecoderCache<Scalar> decoder;
  BasicImage<Scalar> output;
};

template <typename Scalar>
ForwardTrace<Scalar> forward_trace(const BasicImage<Scalar>& x, const ModelParams<Scalar>& params,
                                   const ModelConfig& cfg) {
  cfg.validate();
  check_params(params, cfg);
  const auto inputs = preprocess(x, cfg);
  ForwardTrace<Scalar> t;
  for (int b = 0; b < kBranches; ++b) t.branches[b] = embed(inputs[b], params, cfg);
  t.fused = fuse_latents(t.branches[0].latent, t.branches[1].latent, t.branches[2].latent, t.branches[3].latent,
                         params.alpha, params.beta, params.gamma);
  t.output = decode(t.fused, params, cfg, &t.decoder);
  return t;
}

template <typename Scalar>
ForwardResult<Scalar> forward(const BasicImage<Scalar>& x, const ModelParams<Scalar>& params, const ModelConfig& cfg) {
  auto t = forward_trace(x, params, cfg);
  ForwardResult<Scalar> r{std::move(t.output), {}, std::move(t.fused)};
  for (int b = 0; b < kBranches; ++b) r.latents[b] = std::move(t.branches[b].latent);
  return r;
}

/// Inference-only convenience.
template <typename Scalar>
BasicImage<Scalar> enhance(const BasicImage<Scalar>& x, const ModelParams<Scalar>& params, const ModelConfig& cfg) {
  return forward(x, params, cfg).output;
}

}  // namespace uwt
