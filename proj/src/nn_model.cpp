#include <cmath>

#include "afglab/error.hpp"
#include "afglab/nn.hpp"
#include "afglab/prng.hpp"

namespace afg {

std::unique_ptr<Layer> make_layer(const LayerSpec& spec, SplitMix64* rng);

ModelSnapshot& ModelSnapshot::operator=(const ModelSnapshot& o) {
  if (this == &o) return *this;
  arch_ = o.arch_;
  layers_.clear();
  for (const auto& l : o.layers_) layers_.push_back(l->clone());
  capture_points_ = o.capture_points_;
  conv_names_ = o.conv_names_;
  meta_ = o.meta_;
  rebuild_pointers();
  return *this;
}

void ModelSnapshot::rebuild_pointers() {
  layer_ptrs_.clear();
  for (auto& l : layers_) layer_ptrs_.push_back(l.get());
}

ModelSnapshot ModelSnapshot::build(const ArchSpec& arch, std::uint64_t seed) {
  arch.validate();
  ModelSnapshot m;
  m.arch_ = arch;
  m.meta_.seed = seed;
  for (std::size_t i = 0; i < arch.layers.size(); ++i) {
    SplitMix64 rng(SplitMix64::derive(seed, i));
    m.layers_.push_back(make_layer(arch.layers[i], &rng));
  }
  // Capture points: the ReLU immediately after each conv, else the conv.
  for (std::size_t i = 0; i < arch.layers.size(); ++i) {
    if (arch.layers[i].kind != LayerKind::Conv) continue;
    int point = static_cast<int>(i);
    if (i + 1 < arch.layers.size() &&
        arch.layers[i + 1].kind == LayerKind::Relu)
      point = static_cast<int>(i + 1);
    m.capture_points_.push_back(point);
    m.conv_names_.push_back(arch.layers[i].name);
  }
  m.rebuild_pointers();
  return m;
}

ModelSnapshot ModelSnapshot::build(const std::string& arch_text,
                                   std::uint64_t seed) {
  return build(ArchSpec::parse(arch_text), seed);
}

void ModelSnapshot::check_input(const Tensor& image) const {
  if (image.rank() != 3 || image.dim(0) != arch_.input.h ||
      image.dim(1) != arch_.input.w || image.dim(2) != arch_.input.c)
    fail(ErrorKind::Input, "image shape " + image.shape_str() +
                               " does not match model input " +
                               arch_.input.str());
}

std::vector<Tensor> ModelSnapshot::forward_trace(const Tensor& image,
                                                 int until_layer) const {
  check_input(image);
  int last = until_layer < 0 ? static_cast<int>(layers_.size()) - 1 : until_layer;
  if (last >= static_cast<int>(layers_.size()))
    fail(ErrorKind::Input, "layer index out of range");
  std::vector<Tensor> trace;
  trace.reserve(static_cast<std::size_t>(last) + 2);
  trace.push_back(image);
  for (int i = 0; i <= last; ++i)
    trace.push_back(layers_[static_cast<std::size_t>(i)]->forward(trace.back()));
  return trace;
}

Tensor ModelSnapshot::forward(const Tensor& image) const {
  check_input(image);
  Tensor x = image;
  for (const auto& l : layers_) x = l->forward(x);
  return x;
}

ForwardCapture ModelSnapshot::forward_with_features(
    const Tensor& image, const std::string& input_ref) const {
  auto trace = forward_trace(image);
  ForwardCapture cap;
  cap.logits = trace.back();
  cap.features.input_ref = input_ref;
  for (int point : capture_points_)
    cap.features.per_layer.push_back(trace[static_cast<std::size_t>(point) + 1]);
  return cap;
}

Prediction ModelSnapshot::predict(const Tensor& image) const {
  Tensor probs = softmax(forward(image));
  int cls = argmax_lowest(probs);
  return {cls, probs[cls]};
}

Tensor ModelSnapshot::input_gradient_from(const std::vector<Tensor>& trace,
                                          int layer_index,
                                          const Tensor& grad_at_output) const {
  if (layer_index < 0 ||
      static_cast<std::size_t>(layer_index) + 2 > trace.size())
    fail(ErrorKind::Input, "trace does not cover requested layer");
  Tensor g = grad_at_output;
  for (int i = layer_index; i >= 0; --i)
    g = layers_[static_cast<std::size_t>(i)]->backward(
        trace[static_cast<std::size_t>(i)], g);
  return g;
}

Tensor ModelSnapshot::logit_diff_input_gradient(
    const std::vector<Tensor>& trace, int a, int b) const {
  const Tensor& logits = trace.back();
  Tensor seed(logits.dims());
  seed[a] += 1.0;
  seed[b] -= 1.0;
  return input_gradient_from(trace, static_cast<int>(layers_.size()) - 1, seed);
}

Tensor ModelSnapshot::loss_input_gradient(const Tensor& image, int label,
                                          double* loss_out) const {
  auto trace = forward_trace(image);
  LossGrad lg = softmax_cross_entropy(trace.back(), label);
  if (loss_out) *loss_out = lg.loss;
  return input_gradient_from(trace, static_cast<int>(layers_.size()) - 1,
                             lg.grad_logits);
}

Tensor ModelSnapshot::replay_from_feature(int conv_index,
                                          const Tensor& feature) const {
  if (conv_index < 0 || conv_index >= conv_layer_count())
    fail(ErrorKind::Input, "conv index out of range");
  Tensor x = feature;
  for (std::size_t i =
           static_cast<std::size_t>(capture_points_[conv_index]) + 1;
       i < layers_.size(); ++i)
    x = layers_[i]->forward(x);
  return x;
}

// ---- losses ----

Tensor softmax(const Tensor& logits) {
  Tensor p = logits;
  double m = p.max();
  double z = 0.0;
  for (std::int64_t i = 0; i < p.size(); ++i) {
    p[i] = std::exp(p[i] - m);
    z += p[i];
  }
  p.scale(1.0 / z);
  return p;
}

int argmax_lowest(const Tensor& v) {
  int best = 0;
  for (std::int64_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = static_cast<int>(i);
  return best;
}

LossGrad softmax_cross_entropy(const Tensor& logits, int label) {
  if (label < 0 || label >= logits.size())
    fail(ErrorKind::Input, "label out of range");
  LossGrad lg;
  lg.grad_logits = softmax(logits);
  lg.loss = -std::log(std::max(lg.grad_logits[label], 1e-300));
  lg.grad_logits[label] -= 1.0;
  return lg;
}

LossGrad sigmoid_bce(const Tensor& logits, const std::vector<double>& targets) {
  if (static_cast<std::size_t>(logits.size()) != targets.size())
    fail(ErrorKind::Input, "target width does not match logits");
  LossGrad lg;
  lg.grad_logits = Tensor(logits.dims());
  for (std::int64_t i = 0; i < logits.size(); ++i) {
    double z = logits[i];
    double t = targets[static_cast<std::size_t>(i)];
    // log(1+e^z) computed stably
    double softplus = z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
    lg.loss += softplus - t * z;
    double s = 1.0 / (1.0 + std::exp(-z));
    lg.grad_logits[i] = s - t;
  }
  return lg;
}

std::vector<double> sigmoid_scores(const Tensor& logits) {
  std::vector<double> s(static_cast<std::size_t>(logits.size()));
  for (std::int64_t i = 0; i < logits.size(); ++i)
    s[static_cast<std::size_t>(i)] = 1.0 / (1.0 + std::exp(-logits[i]));
  return s;
}

}  // namespace afg
