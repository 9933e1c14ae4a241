#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "afglab/tensor.hpp"

namespace afg {

enum class LayerKind { Conv, Relu, MaxPool, Flatten, Dense };

struct LayerSpec {
  LayerKind kind = LayerKind::Relu;
  std::string name;
  // conv
  int in_ch = 0, out_ch = 0, kernel = 0, stride = 1, pad = 0;
  // pool (window == stride)
  int pool = 0;
  // dense
  int in_features = 0, out_features = 0;
};

// Architecture description. Text form, one layer per ';':
//   input 32x32x3; conv 3->12 k3 s1 p1; relu; pool 2; ...; flatten;
//   dense 768->64; relu; dense 64->10
struct ArchSpec {
  Shape3 input{};
  std::vector<LayerSpec> layers;

  static ArchSpec parse(const std::string& text);
  std::string to_text() const;
  // Checks that layer shapes chain from input to the final dense layer.
  // Throws a validation error naming both offending layers.
  void validate() const;
  int output_width() const;
  Shape3 shape_after(int layer_index) const;  // -1 == input
};

class Layer {
 public:
  explicit Layer(LayerSpec spec) : spec_(std::move(spec)) {}
  virtual ~Layer() = default;

  const LayerSpec& spec() const { return spec_; }
  virtual Tensor forward(const Tensor& x) const = 0;
  // Gradient of some scalar objective w.r.t. this layer's input, given the
  // gradient w.r.t. its output and the input it saw in forward.
  virtual Tensor backward(const Tensor& x, const Tensor& gout) const = 0;
  virtual void param_grad(const Tensor& /*x*/, const Tensor& /*gout*/,
                          Tensor* /*gw*/, Tensor* /*gb*/) const {}
  virtual Tensor* weights() { return nullptr; }
  virtual Tensor* bias() { return nullptr; }
  const Tensor* weights() const { return const_cast<Layer*>(this)->weights(); }
  const Tensor* bias() const { return const_cast<Layer*>(this)->bias(); }
  virtual std::unique_ptr<Layer> clone() const = 0;

 protected:
  LayerSpec spec_;
};

struct TrainingMeta {
  std::uint64_t seed = 0;
  int epochs = 0;
  double final_test_accuracy = -1.0;
  double final_train_loss = -1.0;
};

struct Prediction {
  int cls = -1;
  double confidence = 0.0;
};

// Ordered post-activation maps of every conv layer for one forward pass.
struct FeatureStack {
  std::vector<Tensor> per_layer;
  std::string input_ref;
};

struct ForwardCapture {
  Tensor logits;
  FeatureStack features;
};

// A CNN with immutable-after-training weights. Weight values are kept
// float32-representable at all times (init and every SGD step round through
// float32) so the on-disk float32 snapshot reproduces logits bit-for-bit.
// All arithmetic runs in double.
class ModelSnapshot {
 public:
  ModelSnapshot() = default;
  ModelSnapshot(const ModelSnapshot& o) { *this = o; }
  ModelSnapshot& operator=(const ModelSnapshot& o);
  ModelSnapshot(ModelSnapshot&&) = default;
  ModelSnapshot& operator=(ModelSnapshot&&) = default;

  static ModelSnapshot build(const ArchSpec& arch, std::uint64_t seed);
  static ModelSnapshot build(const std::string& arch_text, std::uint64_t seed);

  const ArchSpec& arch() const { return arch_; }
  Shape3 input_shape() const { return arch_.input; }
  int output_width() const { return arch_.output_width(); }
  int conv_layer_count() const { return static_cast<int>(capture_points_.size()); }
  const std::vector<std::string>& conv_layer_names() const { return conv_names_; }
  const std::vector<Layer*>& layers() const { return layer_ptrs_; }
  TrainingMeta& meta() { return meta_; }
  const TrainingMeta& meta() const { return meta_; }

  Tensor forward(const Tensor& image) const;  // logits
  ForwardCapture forward_with_features(const Tensor& image,
                                       const std::string& input_ref = "") const;
  Prediction predict(const Tensor& image) const;

  // Activations after every layer; trace[0] is the input, trace[i+1] the
  // output of layer i. `until_layer` < 0 runs the whole net.
  std::vector<Tensor> forward_trace(const Tensor& image,
                                    int until_layer = -1) const;

  // Backprop a gradient seeded at the output of `layer_index` down to the
  // input. The trace must cover at least that layer.
  Tensor input_gradient_from(const std::vector<Tensor>& trace, int layer_index,
                             const Tensor& grad_at_output) const;
  // Gradient of (logit[a] - logit[b]) w.r.t. the input.
  Tensor logit_diff_input_gradient(const std::vector<Tensor>& trace, int a,
                                   int b) const;
  // Gradient of cross-entropy(softmax(logits), label) w.r.t. the input.
  Tensor loss_input_gradient(const Tensor& image, int label,
                             double* loss_out = nullptr) const;

  // Continue the forward pass from the capture point of conv layer
  // `conv_index`, reproducing the logits the full pass would emit.
  Tensor replay_from_feature(int conv_index, const Tensor& feature) const;

  // Index into layers() of the tensor captured for conv layer i (the ReLU
  // directly after the conv when present, else the conv itself).
  int capture_layer(int conv_index) const { return capture_points_[conv_index]; }

  void save(const std::filesystem::path& path,
            const std::string& extra_json = "") const;
  static ModelSnapshot load(const std::filesystem::path& path,
                            std::string* extra_json = nullptr);
  std::vector<std::uint8_t> serialize(const std::string& extra_json = "") const;
  static ModelSnapshot deserialize(const std::vector<std::uint8_t>& bytes,
                                   const std::string& origin,
                                   std::string* extra_json = nullptr);
  // Stable identifier: sha256 of the serialized snapshot (no extra json).
  std::string content_id() const;

 private:
  void rebuild_pointers();
  void check_input(const Tensor& image) const;

  ArchSpec arch_;
  std::vector<std::unique_ptr<Layer>> layers_;
  std::vector<Layer*> layer_ptrs_;
  std::vector<int> capture_points_;
  std::vector<std::string> conv_names_;
  TrainingMeta meta_;
};

// ---- losses ----

struct LossGrad {
  double loss = 0.0;
  Tensor grad_logits;
};

Tensor softmax(const Tensor& logits);
LossGrad softmax_cross_entropy(const Tensor& logits, int label);
// Independent per-output sigmoids, summed binary cross-entropy.
LossGrad sigmoid_bce(const Tensor& logits, const std::vector<double>& targets);
std::vector<double> sigmoid_scores(const Tensor& logits);
int argmax_lowest(const Tensor& v);

// ---- training ----

struct TrainOptions {
  double lr = 0.001;
  double momentum = 0.9;
  int epochs = 10;
  int batch_size = 32;
  std::uint64_t seed = 1;
  bool shuffle = true;
};

struct EpochStats {
  int epoch = 0;
  double mean_loss = 0.0;
};

struct TrainReport {
  std::vector<EpochStats> epochs;
  double final_mean_loss = -1.0;
};

// Generic single-model SGD-with-momentum loop. `sample_loss` returns the
// loss/grad pair for sample `idx` given its logits. Throws a training error
// with the epoch index if the loss goes non-finite.
TrainReport train_model(
    ModelSnapshot& model, const std::vector<const Tensor*>& inputs,
    const std::function<LossGrad(const Tensor& logits, int idx)>& sample_loss,
    const TrainOptions& opts,
    const std::function<void(const EpochStats&)>& on_epoch = nullptr);

}  // namespace afg
