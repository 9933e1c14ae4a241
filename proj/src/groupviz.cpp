#include "afglab/groupviz.hpp"

#include <Eigen/Core>

#include <cmath>

#include "afglab/error.hpp"
#include "afglab/prng.hpp"

namespace afg {

using RowMat =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;

Tensor flatten_nonneg(const Tensor& p) {
  if (p.rank() != 3)
    fail(ErrorKind::Input, "flatten expects a (H,W,C) tensor");
  if (!p.all_nonneg())
    fail(ErrorKind::Input,
         "negative activations; use post-activation feature maps");
  return p.reshaped({p.dim(0) * p.dim(1), p.dim(2)});
}

GroupFactorization nmf(const Tensor& matrix, int r, int iters, double tol,
                       std::uint64_t seed, std::vector<double>* error_trace) {
  if (matrix.rank() != 2)
    fail(ErrorKind::Input, "nmf expects a matrix");
  if (!matrix.all_nonneg())
    fail(ErrorKind::Input, "nmf input must be non-negative");
  const int rows = matrix.dim(0), cols = matrix.dim(1);
  if (r < 1 || r > std::min(rows, cols))
    fail(ErrorKind::Validation,
         "group count r=" + std::to_string(r) + " out of range [1," +
             std::to_string(std::min(rows, cols)) + "]");
  if (iters < 1) fail(ErrorKind::Validation, "nmf iterations must be >= 1");

  CMapMat m(matrix.data(), rows, cols);
  double m_norm = m.norm();
  if (m_norm == 0.0)
    fail(ErrorKind::Degenerate, "nmf input is all-zero");

  GroupFactorization fact;
  fact.spatial_weights = Tensor({rows, r});
  fact.channel_loadings = Tensor({r, cols});
  SplitMix64 rng(seed);
  for (std::int64_t i = 0; i < fact.spatial_weights.size(); ++i)
    fact.spatial_weights[i] = rng.uniform(0.01, 1.01);
  for (std::int64_t i = 0; i < fact.channel_loadings.size(); ++i)
    fact.channel_loadings[i] = rng.uniform(0.01, 1.01);

  MapMat u(fact.spatial_weights.data(), rows, r);
  MapMat v(fact.channel_loadings.data(), r, cols);
  constexpr double kGuard = 1e-12;  // keeps denominators strictly positive

  double prev_err = (m - u * v).norm() / m_norm;
  for (int it = 0; it < iters; ++it) {
    // U <- U .* (M V^T) ./ (U V V^T)
    RowMat num_u = m * v.transpose();
    RowMat den_u = u * (v * v.transpose());
    u.array() *= num_u.array() / (den_u.array() + kGuard);
    // V <- V .* (U^T M) ./ (U^T U V)
    RowMat num_v = u.transpose() * m;
    RowMat den_v = (u.transpose() * u) * v;
    v.array() *= num_v.array() / (den_v.array() + kGuard);

    double err = (m - u * v).norm() / m_norm;
    if (error_trace) error_trace->push_back(err);
    fact.iterations_run = it + 1;
    fact.reconstruction_error = err;
    if (prev_err - err < tol * std::max(1.0, prev_err) && it > 0) break;
    prev_err = err;
  }
  return fact;
}

double group_activation(const Tensor& layer_activations,
                        const GroupFactorization& fact, int group) {
  const Tensor& v = fact.channel_loadings;
  if (group < 0 || group >= v.dim(0))
    fail(ErrorKind::Input, "group index out of range");
  if (layer_activations.rank() != 3 ||
      layer_activations.dim(2) != v.dim(1) ||
      layer_activations.dim(0) * layer_activations.dim(1) !=
          fact.spatial_weights.dim(0))
    fail(ErrorKind::Input, "activations do not match factorization shape");
  const int c = v.dim(1);
  double l1 = 0.0;
  for (int j = 0; j < c; ++j) l1 += std::abs(v[group * c + j]);
  if (l1 <= 0.0) return 0.0;  // dead group
  std::vector<double> sums(static_cast<std::size_t>(c), 0.0);
  const double* d = layer_activations.data();
  std::int64_t pixels =
      std::int64_t(layer_activations.dim(0)) * layer_activations.dim(1);
  for (std::int64_t px = 0; px < pixels; ++px)
    for (int j = 0; j < c; ++j) sums[static_cast<std::size_t>(j)] += *d++;
  double h = 0.0;
  for (int j = 0; j < c; ++j)
    h += v[group * c + j] / l1 * sums[static_cast<std::size_t>(j)];
  return h;
}

namespace {

// Gradient of group_activation w.r.t. the captured layer output: constant
// per channel, loadings(j,c)/||loadings(j,.)||_1 at every pixel.
Tensor group_gradient_seed(const Tensor& captured,
                           const GroupFactorization& fact, int group) {
  const Tensor& v = fact.channel_loadings;
  const int c = v.dim(1);
  double l1 = 0.0;
  for (int j = 0; j < c; ++j) l1 += std::abs(v[group * c + j]);
  Tensor seed(captured.dims());
  if (l1 <= 0.0) return seed;
  std::int64_t pixels = std::int64_t(captured.dim(0)) * captured.dim(1);
  double* d = seed.data();
  for (std::int64_t px = 0; px < pixels; ++px)
    for (int j = 0; j < c; ++j) *d++ = v[group * c + j] / l1;
  return seed;
}

}  // namespace

GroupFeature activation_maximize(const ModelSnapshot& model, int layer_index,
                                 const GroupFactorization& fact, int group,
                                 const AscentOptions& opts) {
  if (layer_index < 0 || layer_index >= model.conv_layer_count())
    fail(ErrorKind::Input, "conv layer index out of range");
  if (opts.steps < 0)
    fail(ErrorKind::Validation, "ascent steps must be >= 0");
  const Shape3 in = model.input_shape();
  const int capture = model.capture_layer(layer_index);

  SplitMix64 rng(opts.seed);
  Tensor x({in.h, in.w, in.c});
  for (std::int64_t i = 0; i < x.size(); ++i)
    x[i] = rng.uniform(0.45, 0.55);

  auto objective_at = [&](const Tensor& img) {
    auto trace = model.forward_trace(img, capture);
    return group_activation(trace.back(), fact, group);
  };

  for (int step = 0; step < opts.steps; ++step) {
    Tensor probe = x;
    int dy = 0, dx = 0;
    if (opts.jitter > 0) {
      dy = static_cast<int>(rng.bounded(2 * opts.jitter + 1)) - opts.jitter;
      dx = static_cast<int>(rng.bounded(2 * opts.jitter + 1)) - opts.jitter;
      Tensor rolled(probe.dims());
      for (int y = 0; y < in.h; ++y)
        for (int xx = 0; xx < in.w; ++xx)
          for (int c = 0; c < in.c; ++c)
            rolled.at((y + dy + in.h) % in.h, (xx + dx + in.w) % in.w, c) =
                probe.at(y, xx, c);
      probe = std::move(rolled);
    }
    auto trace = model.forward_trace(probe, capture);
    Tensor seed = group_gradient_seed(trace.back(), fact, group);
    Tensor g = model.input_gradient_from(trace, capture, seed);
    if (!g.all_finite())
      fail(ErrorKind::Optimization, "non-finite ascent gradient");
    if (opts.jitter > 0 && (dy != 0 || dx != 0)) {
      Tensor unrolled(g.dims());
      for (int y = 0; y < in.h; ++y)
        for (int xx = 0; xx < in.w; ++xx)
          for (int c = 0; c < in.c; ++c)
            unrolled.at(y, xx, c) =
                g.at((y + dy + in.h) % in.h, (xx + dx + in.w) % in.w, c);
      g = std::move(unrolled);
    }
    double norm = g.norm();
    if (norm == 0.0) break;  // flat objective, nothing left to climb
    x.add_scaled(g, opts.step_size / norm);
    x.clamp(0.0, 1.0);
  }

  GroupFeature feat;
  feat.layer_index = layer_index;
  feat.group_index = group;
  feat.final_objective = objective_at(x);
  if (!std::isfinite(feat.final_objective))
    fail(ErrorKind::Optimization, "non-finite ascent objective");
  x.quantize_f32();
  feat.pixels = std::move(x);
  return feat;
}

std::vector<GroupFeature> group_features_for_layer(
    const ModelSnapshot& model, const ImageExample& image, int layer_index,
    const GroupVizOptions& opts) {
  auto cap = model.forward_with_features(image.pixels, image.id);
  if (layer_index < 0 ||
      layer_index >= static_cast<int>(cap.features.per_layer.size()))
    fail(ErrorKind::Input, "conv layer index out of range");
  const Tensor& p =
      cap.features.per_layer[static_cast<std::size_t>(layer_index)];
  if (p.max() <= 0.0)
    fail(ErrorKind::Degenerate,
         "all-zero activations at conv layer " + std::to_string(layer_index));
  Tensor m = flatten_nonneg(p);
  GroupFactorization fact =
      nmf(m, opts.groups, opts.nmf_iters, opts.nmf_tol,
          SplitMix64::derive(opts.seed, 0x17a0 + layer_index));
  fact.layer_index = layer_index;
  std::vector<GroupFeature> out;
  for (int j = 0; j < opts.groups; ++j) {
    AscentOptions a = opts.ascent;
    a.seed = SplitMix64::derive(opts.seed,
                                0x3c00 + layer_index * 64 + j);
    out.push_back(activation_maximize(model, layer_index, fact, j, a));
  }
  return out;
}

}  // namespace afg
