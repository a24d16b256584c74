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

// Composite l1 training objective (appearance + perceptual + latent), its exact
// reverse-mode gradient, a central-difference gradient checker and plain
// gradient-descent training.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "uwtrack/model.hpp"
#include "uwtrack/parallel.hpp"

namespace uwt {

/// Raw l1 sums and the weights that combine them.
struct LossBreakdown {
  double total = 0;
  double appearance = 0;
  double perceptual = 0;
  double latent = 0;
  double lambda_appearance = 0;
  double lambda_perceptual = 0;
  double lambda_latent = 0;
};

enum class LatentLossMode {
  AllBranches,  // compare each of the four branch latents
  FusedOnly,    // compare the fused latents only
};

template <typename Scalar>
struct LossOptions {
  LatentLossMode latent_mode = LatentLossMode::AllBranches;
  /// Replaces the default weights 1/(element count) of each compared tensor.
  std::optional<std::array<double, 3>> lambdas;
  /// Equalized branch of the enhanced output, held fixed (stop-gradient). When
  /// unset it is recomputed from the current output.
  const BasicImage<Scalar>* frozen_output_equalized = nullptr;
};

/// Default weights: the reciprocal element count of the image, the feature map
/// and the stack of compared latents.
inline std::array<double, 3> default_lambdas(const ModelConfig& cfg, LatentLossMode mode) {
  const double hw = double(cfg.height) * cfg.width;
  const double latents = (mode == LatentLossMode::AllBranches ? kBranches : 1) * double(cfg.tokens()) * cfg.token_dim();
  return {1.0 / (hw * 3.0), 1.0 / (hw * cfg.channels), 1.0 / latents};
}

namespace detail {

template <typename Scalar>
Scalar l1_sign(Scalar v) {
  return v > Scalar(0) ? Scalar(1) : (v < Scalar(0) ? Scalar(-1) : Scalar(0));
}

template <typename A, typename B>
auto signed_difference(const A& a, const B& b) {
  using Scalar = typename A::Scalar;
  return (a - b).unaryExpr([](Scalar v) { return l1_sign(v); });
}

/// Vector-Jacobian product of gray-world white balance w.r.t. its input.
template <typename Scalar>
RowMatrix<Scalar> white_balance_vjp(const BasicImage<Scalar>& in, const RowMatrix<Scalar>& grad_out) {
  const auto s = white_balance_scales(in);
  const RowMatrix<Scalar>& v = in.pixels();
  const Scalar n = Scalar(v.rows());
  RowMatrix<Scalar> grad(v.rows(), 3);
  std::array<Scalar, 3> grad_scale{};
  for (int c = 0; c < 3; ++c) {
    for (Eigen::Index i = 0; i < v.rows(); ++i) {
      const Scalar z = v(i, c) * s.scale[c];
      const Scalar gz = (z >= Scalar(0) && z <= Scalar(1)) ? grad_out(i, c) : Scalar(0);
      grad(i, c) = gz * s.scale[c];
      grad_scale[c] += gz * v(i, c);
    }
  }
  std::array<Scalar, 3> grad_mean{};
  for (int c = 0; c < 3; ++c) {
    if (s.zero_channel[c]) continue;
    const Scalar m = s.channel_mean[c];
    for (int k = 0; k < 3; ++k) grad_mean[k] += grad_scale[c] / (Scalar(3) * m);
    grad_mean[c] -= grad_scale[c] * s.global_mean / (m * m);
  }
  for (int k = 0; k < 3; ++k) grad.col(k).array() += grad_mean[k] / n;
  return grad;
}

template <typename Scalar>
RowMatrix<Scalar> gamma_vjp(const BasicImage<Scalar>& in, Scalar gamma, const RowMatrix<Scalar>& grad_out) {
  if (gamma == Scalar(1)) return grad_out;
  return in.pixels().binaryExpr(grad_out, [gamma](Scalar v, Scalar g) {
    return v > Scalar(0) ? g * gamma * Scalar(std::pow(v, gamma - Scalar(1))) : Scalar(0);
  });
}

}  // namespace detail

/// Evaluates the objective for one (raw, target) pair and, when `grads` is
/// given, accumulates its exact gradient into it. The target is routed through
/// the same four-branch pipeline as the enhanced output.
template <typename Scalar>
LossBreakdown evaluate_objective(const BasicImage<Scalar>& x, const BasicImage<Scalar>& y,
                                 const ModelParams<Scalar>& params, const ModelConfig& cfg,
                                 const std::type_identity_t<LossOptions<Scalar>>& opts = {},
                                 std::type_identity_t<ModelParams<Scalar>>* grads = nullptr,
                                 std::type_identity_t<BasicImage<Scalar>>* output = nullptr) {
  if (!x.same_shape(y)) throw Error(ErrorCode::ShapeMismatch, "raw and target images differ in size");
  auto trace = forward_trace(x, params, cfg);
  const BasicImage<Scalar>& y_hat = trace.output;
  if (output) *output = y_hat;

  BranchImages<Scalar> y_hat_in{y_hat, white_balance(y_hat).image, gamma_correct(y_hat, Scalar(cfg.pre_gamma)),
                                opts.frozen_output_equalized ? *opts.frozen_output_equalized : hist_equalize(y_hat)};
  const auto y_in = preprocess(y, cfg);
  const bool all = opts.latent_mode == LatentLossMode::AllBranches;
  std::array<Embedding<Scalar>, kBranches> e_y, e_hat;
  for (int b = 0; b < kBranches; ++b) {
    e_y[b] = embed(y_in[b], params, cfg);
    e_hat[b] = embed(y_hat_in[b], params, cfg);
  }

  const std::array<Scalar, kBranches> coef{Scalar(1), params.alpha, params.beta, params.gamma};
  auto fuse_of = [&](const std::array<Embedding<Scalar>, kBranches>& e) {
    return fuse_latents(e[0].latent, e[1].latent, e[2].latent, e[3].latent, params.alpha, params.beta, params.gamma);
  };

  LossBreakdown lb;
  const auto lambdas = opts.lambdas.value_or(default_lambdas(cfg, opts.latent_mode));
  lb.lambda_appearance = lambdas[0];
  lb.lambda_perceptual = lambdas[1];
  lb.lambda_latent = lambdas[2];
  lb.appearance = double((y.pixels() - y_hat.pixels()).cwiseAbs().sum());
  lb.perceptual = double((e_y[0].features.data() - e_hat[0].features.data()).cwiseAbs().sum());
  TokenSequence<Scalar> fused_y, fused_hat;
  if (all) {
    for (int b = 0; b < kBranches; ++b) lb.latent += double((e_y[b].latent - e_hat[b].latent).cwiseAbs().sum());
  } else {
    fused_y = fuse_of(e_y);
    fused_hat = fuse_of(e_hat);
    lb.latent = double((fused_y - fused_hat).cwiseAbs().sum());
  }
  lb.total = lb.lambda_appearance * lb.appearance + lb.lambda_perceptual * lb.perceptual + lb.lambda_latent * lb.latent;
  if (!grads) return lb;

  ModelParams<Scalar>& g = *grads;
  const Scalar l1 = Scalar(lambdas[0]), l2 = Scalar(lambdas[1]), l3 = Scalar(lambdas[2]);

  // Latent gradients per branch, for the target and for the output embeddings.
  std::array<TokenSequence<Scalar>, kBranches> g_lat_hat, g_lat_y;
  if (all) {
    for (int b = 0; b < kBranches; ++b) {
      g_lat_hat[b] = l3 * detail::signed_difference(e_hat[b].latent, e_y[b].latent);
      g_lat_y[b] = -g_lat_hat[b];
    }
  } else {
    const TokenSequence<Scalar> gf = l3 * detail::signed_difference(fused_hat, fused_y);
    for (int b = 0; b < kBranches; ++b) {
      g_lat_hat[b] = coef[b] * gf;
      g_lat_y[b] = -g_lat_hat[b];
    }
    auto dot = [&](int b) { return (gf.array() * (e_hat[b].latent - e_y[b].latent).array()).sum(); };
    g.alpha += dot(1);
    g.beta += dot(2);
    g.gamma += dot(3);
  }
  const RowMatrix<Scalar> g_feat_hat = l2 * detail::signed_difference(e_hat[0].features.data(), e_y[0].features.data());
  const RowMatrix<Scalar> g_feat_y = -g_feat_hat;

  for (int b = 0; b < kBranches; ++b)
    embed_backward(e_y[b], params, cfg, g_lat_y[b], b == 0 ? &g_feat_y : nullptr, g, false);

  RowMatrix<Scalar> g_out = l1 * detail::signed_difference(y_hat.pixels(), y.pixels());
  g_out += embed_backward(e_hat[kRaw], params, cfg, g_lat_hat[kRaw], &g_feat_hat, g, true);
  g_out += detail::white_balance_vjp(
      y_hat, embed_backward(e_hat[kWhiteBalance], params, cfg, g_lat_hat[kWhiteBalance], nullptr, g, true));
  g_out += detail::gamma_vjp(y_hat, Scalar(cfg.pre_gamma),
                             embed_backward(e_hat[kGamma], params, cfg, g_lat_hat[kGamma], nullptr, g, true));
  // The equalized branch is a stop-gradient transform of the output.
  embed_backward(e_hat[kEqualized], params, cfg, g_lat_hat[kEqualized], nullptr, g, false);

  const TokenSequence<Scalar> g_fused = decode_backward(params, cfg, trace.decoder, std::move(g_out), g);
  g.alpha += (g_fused.array() * trace.branches[1].latent.array()).sum();
  g.beta += (g_fused.array() * trace.branches[2].latent.array()).sum();
  g.gamma += (g_fused.array() * trace.branches[3].latent.array()).sum();
  for (int b = 0; b < kBranches; ++b)
    embed_backward(trace.branches[b], params, cfg, TokenSequence<Scalar>(coef[b] * g_fused), nullptr, g, false);
  return lb;
}

/// Objective of an already enhanced image against its target.
template <typename Scalar>
LossBreakdown loss(const BasicImage<Scalar>& y_hat, const BasicImage<Scalar>& y, const ModelParams<Scalar>& params,
                   const ModelConfig& cfg, LatentLossMode mode = LatentLossMode::AllBranches) {
  if (!y_hat.same_shape(y)) throw Error(ErrorCode::ShapeMismatch, "enhanced and target images differ in size");
  cfg.validate();
  check_params(params, cfg);
  const auto y_hat_in = preprocess(y_hat, cfg);
  const auto y_in = preprocess(y, cfg);
  LossBreakdown lb;
  const auto lambdas = default_lambdas(cfg, mode);
  lb.lambda_appearance = lambdas[0];
  lb.lambda_perceptual = lambdas[1];
  lb.lambda_latent = lambdas[2];
  lb.appearance = double((y.pixels() - y_hat.pixels()).cwiseAbs().sum());
  std::array<TokenSequence<Scalar>, kBranches> u_y, u_hat;
  for (int b = 0; b < kBranches; ++b) {
    const auto f_y = extract_features(y_in[b], params, cfg);
    const auto f_hat = extract_features(y_hat_in[b], params, cfg);
    if (b == 0) lb.perceptual = double((f_y.data() - f_hat.data()).cwiseAbs().sum());
    u_y[b] = encode(windowize(f_y, cfg.window), params, cfg.heads);
    u_hat[b] = encode(windowize(f_hat, cfg.window), params, cfg.heads);
  }
  if (mode == LatentLossMode::AllBranches) {
    for (int b = 0; b < kBranches; ++b) lb.latent += double((u_y[b] - u_hat[b]).cwiseAbs().sum());
  } else {
    const auto fy = fuse_latents(u_y[0], u_y[1], u_y[2], u_y[3], params.alpha, params.beta, params.gamma);
    const auto fh = fuse_latents(u_hat[0], u_hat[1], u_hat[2], u_hat[3], params.alpha, params.beta, params.gamma);
    lb.latent = double((fy - fh).cwiseAbs().sum());
  }
  lb.total = lb.lambda_appearance * lb.appearance + lb.lambda_perceptual * lb.perceptual + lb.lambda_latent * lb.latent;
  return lb;
}

/// Loss and exact gradient of the objective for the pair (x, y).
template <typename Scalar>
std::pair<LossBreakdown, GradientSet<Scalar>> backward(const BasicImage<Scalar>& x, const BasicImage<Scalar>& y,
                                                       const ModelParams<Scalar>& params, const ModelConfig& cfg,
                                                       const LossOptions<Scalar>& opts = {}) {
  auto grads = params.zeros_like();
  const auto lb = evaluate_objective(x, y, params, cfg, opts, &grads);
  return {lb, std::move(grads)};
}

// ---------------------------------------------------------------------------
// Gradient checking

inline double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / (std::abs(analytic) + std::abs(numeric) + 1e-8);
}

/// Symmetric difference quotient of f along one coordinate; the coordinate is
/// restored afterwards.
template <typename Scalar, typename Fn>
double central_difference(Fn&& f, Scalar& coordinate, double eps) {
  const Scalar saved = coordinate;
  coordinate = Scalar(double(saved) + eps);
  const double plus = f();
  coordinate = Scalar(double(saved) - eps);
  const double minus = f();
  coordinate = saved;
  return (plus - minus) / (2.0 * eps);
}

/// Central difference that starts at `eps` and shrinks the step tenfold while
/// the quotients at h and h/2 disagree, which happens when the stencil straddles
/// a ReLU, clamp or l1 kink. Disagreement below the rounding noise of the
/// quotient is accepted. Stops at `min_eps`.
template <typename Scalar, typename Fn>
double refined_central_difference(Fn&& f, Scalar& coordinate, double eps, double min_eps = 1e-8,
                                  double agreement = 1e-6) {
  const double scale = std::abs(f());
  auto noise = [&](double step) { return 16.0 * std::numeric_limits<double>::epsilon() * scale / step; };
  double h = eps;
  double coarse = central_difference(f, coordinate, h);
  for (;;) {
    const double fine = central_difference(f, coordinate, h / 2);
    const double gap = std::abs(coarse - fine);
    if (gap <= agreement * std::max(std::abs(coarse), std::abs(fine)) + noise(h / 2) || h / 10 < min_eps) return fine;
    h /= 10;
    coarse = central_difference(f, coordinate, h);
  }
}

struct GradientCheckReport {
  double max_relative_error = 0;
  std::size_t coordinates = 0;
  std::string worst_tensor;
  Eigen::Index worst_index = -1;
  double worst_analytic = 0;
  double worst_numeric = 0;
};

/// Checks `grad` against central differences of f at the listed coordinates of x.
template <typename Fn>
GradientCheckReport check_gradient(Fn&& f, std::span<double> x, std::span<const double> grad,
                                   std::span<const std::size_t> coordinates, double eps) {
  GradientCheckReport r;
  for (std::size_t i : coordinates) {
    const double numeric = central_difference(f, x[i], eps);
    const double err = relative_error(grad[i], numeric);
    ++r.coordinates;
    if (err >= r.max_relative_error) {
      r.max_relative_error = err;
      r.worst_index = Eigen::Index(i);
      r.worst_analytic = grad[i];
      r.worst_numeric = numeric;
    }
  }
  return r;
}

struct FiniteDiffOptions {
  double eps = 1e-5;
  double min_eps = 1e-8;  // floor of the kink-avoiding step refinement
  std::size_t general_coordinates = 200;  // spread over every tensor except fusion and positions
  std::size_t positional_coordinates = 20;
  std::uint64_t seed = 1234;
};

/// Deterministic coordinate sample: `general_coordinates` drawn round-robin over
/// all tensors other than the fusion scalars and the positional encoding, then
/// `positional_coordinates` positional-encoding entries, then alpha, beta, gamma.
template <typename Scalar>
std::vector<std::pair<std::size_t, Eigen::Index>> sample_check_coordinates(const ModelParams<Scalar>& params,
                                                                          const FiniteDiffOptions& opts) {
  const auto tensors = params.tensors();
  std::vector<std::size_t> general;
  std::size_t pos = 0;
  std::vector<std::size_t> fusion;
  for (std::size_t t = 0; t < tensors.size(); ++t) {
    if (tensors[t].name == "pos_encoding")
      pos = t;
    else if (tensors[t].name.starts_with("fusion."))
      fusion.push_back(t);
    else
      general.push_back(t);
  }
  std::mt19937_64 rng(opts.seed);
  std::vector<std::pair<std::size_t, Eigen::Index>> coords;
  auto pick = [&](std::size_t t) {
    std::uniform_int_distribution<Eigen::Index> dist(0, tensors[t].size - 1);
    coords.emplace_back(t, dist(rng));
  };
  for (std::size_t k = 0; k < opts.general_coordinates; ++k) pick(general[k % general.size()]);
  for (std::size_t k = 0; k < opts.positional_coordinates; ++k) pick(pos);
  for (std::size_t t : fusion) coords.emplace_back(t, 0);
  return coords;
}

/// Compares `analytic` against central differences of the objective. The
/// equalized branch of the output is frozen at its unperturbed value, matching
/// the stop-gradient used by the analytic pass.
template <typename Scalar>
GradientCheckReport finite_diff_check(const ModelParams<Scalar>& params, const GradientSet<Scalar>& analytic,
                                      const BasicImage<Scalar>& x, const BasicImage<Scalar>& y,
                                      const ModelConfig& cfg, const FiniteDiffOptions& fd = {},
                                      LossOptions<Scalar> opts = {}) {
  if (!(fd.eps > 0)) throw Error(ErrorCode::InvalidConfig, "finite-difference step must be positive");
  BasicImage<Scalar> y_hat;
  evaluate_objective(x, y, params, cfg, opts, nullptr, &y_hat);
  const BasicImage<Scalar> frozen = opts.frozen_output_equalized ? *opts.frozen_output_equalized : hist_equalize(y_hat);
  opts.frozen_output_equalized = &frozen;

  ModelParams<Scalar> probe = params;
  auto probe_tensors = probe.tensors();
  const auto grad_tensors = analytic.tensors();
  auto f = [&] { return evaluate_objective(x, y, probe, cfg, opts).total; };

  GradientCheckReport r;
  for (const auto& [t, i] : sample_check_coordinates(params, fd)) {
    const double numeric = refined_central_difference(f, probe_tensors[t].data[i], fd.eps, fd.min_eps);
    const double a = double(grad_tensors[t].data[i]);
    const double err = relative_error(a, numeric);
    ++r.coordinates;
    if (err >= r.max_relative_error) {
      r = {err, r.coordinates, probe_tensors[t].name, i, a, numeric};
    }
  }
  return r;
}

template <typename Scalar>
GradientCheckReport finite_diff_check(const ModelParams<Scalar>& params, const BasicImage<Scalar>& x,
                                      const BasicImage<Scalar>& y, const ModelConfig& cfg,
                                      const FiniteDiffOptions& fd = {}, const LossOptions<Scalar>& opts = {}) {
  const auto [lb, grads] = backward(x, y, params, cfg, opts);
  return finite_diff_check(params, grads, x, y, cfg, fd, opts);
}

// ---------------------------------------------------------------------------
// Training

template <typename Scalar>
struct TrainingPair {
  BasicImage<Scalar> raw;
  BasicImage<Scalar> target;
};

inline LossBreakdown mean_breakdown(const std::vector<LossBreakdown>& parts) {
  LossBreakdown m;
  if (parts.empty()) return m;
  for (const auto& p : parts) {
    m.total += p.total;
    m.appearance += p.appearance;
    m.perceptual += p.perceptual;
    m.latent += p.latent;
  }
  const double n = double(parts.size());
  m.total /= n;
  m.appearance /= n;
  m.perceptual /= n;
  m.latent /= n;
  m.lambda_appearance = parts.front().lambda_appearance;
  m.lambda_perceptual = parts.front().lambda_perceptual;
  m.lambda_latent = parts.front().lambda_latent;
  return m;
}

/// One plain gradient-descent step on the batch-mean gradient. Per-sample
/// gradients may be computed in parallel; they are reduced in sample order.
template <typename Scalar>
std::pair<ModelParams<Scalar>, LossBreakdown> train_step(const ModelParams<Scalar>& params,
                                                         const std::vector<TrainingPair<Scalar>>& batch, double lr,
                                                         const ModelConfig& cfg, const LossOptions<Scalar>& opts = {},
                                                         unsigned threads = 1) {
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw Error(ErrorCode::InvalidLR, "learning rate must be finite and >= 0");
  if (batch.empty()) throw Error(ErrorCode::EmptyManifest, "training batch is empty");
  std::vector<GradientSet<Scalar>> grads(batch.size());
  std::vector<LossBreakdown> parts(batch.size());
  parallel_for(batch.size(), threads, [&](std::size_t i) {
    std::tie(parts[i], grads[i]) = backward(batch[i].raw, batch[i].target, params, cfg, opts);
  });
  ModelParams<Scalar> next = params;
  if (lr > 0.0) {
    auto sum = grads.front();
    auto sum_t = sum.tensors();
    for (std::size_t s = 1; s < grads.size(); ++s) {
      const auto gt = grads[s].tensors();
      for (std::size_t t = 0; t < sum_t.size(); ++t) sum_t[t].values() += gt[t].values();
    }
    const Scalar step = Scalar(lr / double(batch.size()));
    auto nt = next.tensors();
    for (std::size_t t = 0; t < nt.size(); ++t) nt[t].values() -= step * sum_t[t].values();
  }
  return {std::move(next), mean_breakdown(parts)};
}

}  // namespace uwt
