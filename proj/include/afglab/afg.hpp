#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "afglab/groupviz.hpp"
#include "afglab/nn.hpp"

namespace afg {

// Concatenated one-hot pair. The adversarial part is all-zero for clean
// samples and one-hot at the misclassified class otherwise.
struct MixedLabel {
  int k_orig = 0;
  int k_adv = 0;
  int original = -1;
  std::optional<int> adversarial;

  // k_adv < 0 means "same as k_orig".
  static MixedLabel encode(int y, std::optional<int> y_hat, int k_orig,
                           int k_adv = -1);
  std::vector<double> onehot() const;  // length k_orig + k_adv
  std::string code() const;            // e.g. "10100"
  bool is_clean() const { return !adversarial.has_value(); }
  bool operator==(const MixedLabel&) const = default;
};

struct DecodedPrediction {
  int original = -1;
  std::optional<int> adversarial;
};

// argmax over the first k_orig entries; argmax over the last k_adv entries
// if it reaches tau, else none. Ties break to the lowest index.
DecodedPrediction decode_prediction(const std::vector<double>& scores,
                                    int k_orig, int k_adv, double tau = 0.5);

// Row-major grid of the luminance-reduced group tiles; r must be a perfect
// square and every tile s x s. Output side is s * sqrt(r).
Tensor stitch(const std::vector<GroupFeature>& groups);

struct AfgProvenance {
  std::string source_image_id;
  std::string attack;  // "clean" or an attack name
  std::string model_id;
  bool operator==(const AfgProvenance&) const = default;
};

struct AfgSample {
  std::string id;
  Tensor tensor;  // (G, G, channels), float32-exact values in [0,1]
  MixedLabel label;
  AfgProvenance provenance;
};

struct AfgBuildOptions {
  GroupVizOptions viz;
  std::uint64_t seed = 0;  // stream base; per-image streams derive from it
};

// Stitch every conv layer's group features and stack them along the channel
// axis: (G, G, N) for a model with N conv layers.
Tensor build_afg_tensor(const ModelSnapshot& model, const ImageExample& image,
                        const AfgBuildOptions& opts);

enum class ChannelPolicyKind { ALL, F3, L3, F3L3, FML };

struct ChannelPolicy {
  ChannelPolicyKind kind = ChannelPolicyKind::ALL;
  static ChannelPolicy parse(const std::string& name);
  std::string name() const;
  // Resolved strictly-increasing layer indices; throws a configuration error
  // when the model is too shallow for the policy.
  std::vector<int> indices_for(int n_layers) const;
};

AfgSample select_channels(const AfgSample& sample, const ChannelPolicy& policy);

// Directory layout: manifest.json plus one AFG1 container per sample.
void write_afg_dataset(const std::filesystem::path& dir,
                       const std::vector<AfgSample>& items,
                       const std::string& generation_config_json = "{}");
std::vector<AfgSample> read_afg_dataset(const std::filesystem::path& dir);

}  // namespace afg
