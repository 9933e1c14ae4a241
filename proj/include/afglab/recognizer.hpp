#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "afglab/afg.hpp"
#include "afglab/nn.hpp"

namespace afg {

enum class Backend { DeepCnn, ShallowCnn, LinearMultilabel };
Backend backend_from_name(const std::string& name);
const char* backend_name(Backend b);

enum class HeadMode { Multilabel, Binary, SingleClass };
const char* head_mode_name(HeadMode m);
HeadMode head_mode_from_name(const std::string& name);

struct RecognitionResult {
  std::vector<double> scores;
  int original = -1;  // -1 when the head carries no class information
  std::optional<int> adversarial;
  bool is_adversarial = false;
};

// Second classifier trained on AFG tensors. Multilabel heads use independent
// sigmoids with summed binary cross-entropy; Binary is the same machinery at
// width 2 (clean, adversarial); SingleClass is plain softmax over k_orig.
struct RecognizerSnapshot {
  ModelSnapshot net;
  Backend backend = Backend::DeepCnn;
  HeadMode mode = HeadMode::Multilabel;
  int k_orig = 0;
  int k_adv = 0;
  double tau = 0.5;

  RecognitionResult recognize(const Tensor& afg_tensor) const;
  RecognitionResult recognize(const AfgSample& sample) const {
    return recognize(sample.tensor);
  }

  void save(const std::filesystem::path& path) const;
  static RecognizerSnapshot load(const std::filesystem::path& path);
};

std::string recognizer_arch_text(Backend backend, int g, int channels,
                                 int out_width);

RecognizerSnapshot train_recognizer(const std::vector<AfgSample>& dataset,
                                    Backend backend, const TrainOptions& opts,
                                    HeadMode mode = HeadMode::Multilabel,
                                    double tau = 0.5);

// Collapses mixed labels to {clean, adversarial} and trains a width-2 head.
RecognizerSnapshot binary_mode_train(const std::vector<AfgSample>& dataset,
                                     Backend backend, const TrainOptions& opts);

// Abstract recognizer so evaluation metrics accept either a trained snapshot
// or the ground-truth oracle used by the harness self-test.
class RecognizerLike {
 public:
  virtual ~RecognizerLike() = default;
  virtual RecognitionResult recognize(const AfgSample& sample) const = 0;
};

class SnapshotRecognizer final : public RecognizerLike {
 public:
  explicit SnapshotRecognizer(RecognizerSnapshot snapshot)
      : snapshot_(std::move(snapshot)) {}
  RecognitionResult recognize(const AfgSample& sample) const override {
    return snapshot_.recognize(sample);
  }
  const RecognizerSnapshot& snapshot() const { return snapshot_; }

 private:
  RecognizerSnapshot snapshot_;
};

// Emits the sample's own label as a perfect one-hot score vector.
class OracleRecognizer final : public RecognizerLike {
 public:
  RecognitionResult recognize(const AfgSample& sample) const override;
};

// --- Detector baseline (binary classifier on one layer's raw activations) ---

struct DetectorBaseline {
  ModelSnapshot net;
  int layer_index = -1;

  // true => flagged as adversarial
  bool flag(const Tensor& layer_activations) const;
};

DetectorBaseline detector_baseline_train(
    const std::vector<Tensor>& clean_activations,
    const std::vector<Tensor>& adversarial_activations, int layer_index,
    const TrainOptions& opts);

double detector_accuracy(const DetectorBaseline& detector,
                         const std::vector<Tensor>& clean_activations,
                         const std::vector<Tensor>& adversarial_activations);

}  // namespace afg
