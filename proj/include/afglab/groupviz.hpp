#pragma once

#include <cstdint>
#include <vector>

#include "afglab/dataset.hpp"
#include "afglab/nn.hpp"

namespace afg {

// (H,W,C) post-activation map -> (H*W, C) matrix; column j is feature map j
// unrolled in row-major pixel order.
Tensor flatten_nonneg(const Tensor& p);

// Non-negative factorization of a layer matrix into r groups:
// matrix ~ spatial_weights * channel_loadings.
struct GroupFactorization {
  int layer_index = -1;
  Tensor spatial_weights;   // (H*W, r)
  Tensor channel_loadings;  // (r, C)
  double reconstruction_error = 0.0;  // relative Frobenius
  int iterations_run = 0;
};

// Multiplicative-update NMF minimizing Frobenius error. Stops after `iters`
// updates or when the relative error improves by less than `tol`.
// Deterministic given the seed. `error_trace` (optional) receives the error
// after every iteration.
GroupFactorization nmf(const Tensor& matrix, int r, int iters, double tol,
                       std::uint64_t seed,
                       std::vector<double>* error_trace = nullptr);

// Projection of a layer's activations onto group j's channel direction:
// sum_c loadings(j,c) * channel_sum_c / ||loadings(j,.)||_1.
double group_activation(const Tensor& layer_activations,
                        const GroupFactorization& fact, int group);

struct AscentOptions {
  int steps = 256;
  double step_size = 0.05;
  int jitter = 0;  // max pixel roll applied while sampling gradients
  std::uint64_t seed = 0;
};

struct GroupFeature {
  int layer_index = -1;
  int group_index = -1;
  Tensor pixels;  // (s, s, input channels) in [0,1]
  double final_objective = 0.0;
};

// Gradient ascent on a synthetic input maximizing group_activation, with
// L2-normalized gradient steps; the synthetic tile has the model's input
// resolution. Starts from uniform noise in [0.45, 0.55].
GroupFeature activation_maximize(const ModelSnapshot& model, int layer_index,
                                 const GroupFactorization& fact, int group,
                                 const AscentOptions& opts);

struct GroupVizOptions {
  int groups = 4;  // r
  int nmf_iters = 200;
  double nmf_tol = 1e-5;
  AscentOptions ascent;
  std::uint64_t seed = 0;
};

// Full per-layer pipeline: capture activations, factorize, synthesize one
// feature per group.
std::vector<GroupFeature> group_features_for_layer(const ModelSnapshot& model,
                                                   const ImageExample& image,
                                                   int layer_index,
                                                   const GroupVizOptions& opts);

}  // namespace afg
