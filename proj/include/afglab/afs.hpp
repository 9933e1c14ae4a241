#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "afglab/attacks.hpp"
#include "afglab/nn.hpp"

namespace afg {

// Relative feature-map distance ||p - p_hat|| / ||p||, Euclidean norms over
// all elements of the layer.
double layer_distance(const Tensor& p, const Tensor& p_hat);

// Per-channel activation mass: mass_j = (sum of channel j + delta) /
// (sum of all + C*delta). Requires non-negative (post-activation) maps.
struct ChannelDistribution {
  std::vector<double> mass;
};
ChannelDistribution channel_distribution(const Tensor& p, double delta = 1e-8);

// KL(mass(p) || mass(p_hat)) with natural log; direction fixed as
// original-first.
double kl_divergence(const Tensor& p, const Tensor& p_hat,
                     double delta = 1e-8);

struct LayerDistanceCurve {
  std::vector<std::string> layer_names;
  std::vector<double> mean_distance;
  std::vector<double> mean_kl;
  int n_pairs = 0;
  std::string attack;
};

// Mean per-layer distance and KL over the successful records' clean/adv
// feature stacks.
LayerDistanceCurve afs_curve(const ModelSnapshot& model,
                             const std::vector<AdversarialRecord>& records,
                             int jobs = 1);

// Same curve but each record's adversarial image is replaced by the original
// plus uniform noise matched to the record's perturbation L-inf norm.
LayerDistanceCurve noise_control_curve(
    const ModelSnapshot& model, const std::vector<AdversarialRecord>& records,
    std::uint64_t seed, int jobs = 1);

// CSV header: layer,mean_distance,mean_kl,n_pairs
void write_afs_csv(const LayerDistanceCurve& curve,
                   const std::filesystem::path& path);
LayerDistanceCurve read_afs_csv(const std::filesystem::path& path);

}  // namespace afg
