#include "afglab/recognizer.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "afglab/error.hpp"

namespace afg {

Backend backend_from_name(const std::string& name) {
  if (name == "deep-cnn") return Backend::DeepCnn;
  if (name == "shallow-cnn") return Backend::ShallowCnn;
  if (name == "linear-multilabel") return Backend::LinearMultilabel;
  fail(ErrorKind::Validation, "unknown backend '" + name + "'");
}

const char* backend_name(Backend b) {
  switch (b) {
    case Backend::DeepCnn: return "deep-cnn";
    case Backend::ShallowCnn: return "shallow-cnn";
    case Backend::LinearMultilabel: return "linear-multilabel";
  }
  return "?";
}

const char* head_mode_name(HeadMode m) {
  switch (m) {
    case HeadMode::Multilabel: return "multilabel";
    case HeadMode::Binary: return "binary";
    case HeadMode::SingleClass: return "single-class";
  }
  return "?";
}

HeadMode head_mode_from_name(const std::string& name) {
  if (name == "multilabel") return HeadMode::Multilabel;
  if (name == "binary") return HeadMode::Binary;
  if (name == "single-class") return HeadMode::SingleClass;
  fail(ErrorKind::Validation, "unknown head mode '" + name + "'");
}

std::string recognizer_arch_text(Backend backend, int g, int channels,
                                 int out_width) {
  std::ostringstream os;
  os << "input " << g << "x" << g << "x" << channels;
  switch (backend) {
    case Backend::DeepCnn: {
      // Halve the side until it reaches 4, up to four stages.
      static const int widths[4] = {8, 16, 24, 32};
      int side = g, prev = channels, stages = 0;
      while (side > 4 && side % 2 == 0 && stages < 4) {
        os << "; conv " << prev << "->" << widths[stages] << " k3 s1 p1"
           << "; relu; pool 2";
        prev = widths[stages];
        side /= 2;
        ++stages;
      }
      if (stages == 0)
        fail(ErrorKind::Configuration,
             "deep-cnn backend needs an even tensor side >= 8, got " +
                 std::to_string(g));
      long flat = static_cast<long>(side) * side * prev;
      os << "; flatten; dense " << flat << "->64; relu; dense 64->"
         << out_width;
      break;
    }
    case Backend::ShallowCnn: {
      int pool = g % 4 == 0 && g >= 16 ? 4 : 2;
      if (g % pool != 0)
        fail(ErrorKind::Configuration,
             "shallow-cnn backend cannot pool side " + std::to_string(g));
      long flat = static_cast<long>(g / pool) * (g / pool) * 8;
      os << "; conv " << channels << "->8 k3 s1 p1; relu; pool " << pool
         << "; flatten; dense " << flat << "->" << out_width;
      break;
    }
    case Backend::LinearMultilabel: {
      long flat = static_cast<long>(g) * g * channels;
      os << "; flatten; dense " << flat << "->" << out_width;
      break;
    }
  }
  return os.str();
}

namespace {

void check_dataset(const std::vector<AfgSample>& dataset) {
  if (dataset.empty())
    fail(ErrorKind::Validation, "AFG dataset is empty");
  const Tensor& t0 = dataset.front().tensor;
  const MixedLabel& l0 = dataset.front().label;
  for (const AfgSample& s : dataset) {
    if (!s.tensor.same_shape(t0))
      fail(ErrorKind::Validation,
           "AFG tensors have mixed shapes: " + s.tensor.shape_str() + " vs " +
               t0.shape_str());
    if (s.label.k_orig != l0.k_orig || s.label.k_adv != l0.k_adv)
      fail(ErrorKind::Validation, "AFG labels have mixed vocabulary sizes");
  }
}

}  // namespace

RecognizerSnapshot train_recognizer(const std::vector<AfgSample>& dataset,
                                    Backend backend, const TrainOptions& opts,
                                    HeadMode mode, double tau) {
  check_dataset(dataset);
  const Tensor& t0 = dataset.front().tensor;
  if (t0.rank() != 3 || t0.dim(0) != t0.dim(1))
    fail(ErrorKind::Validation, "AFG tensors must be (G,G,C)");
  const int k_orig = dataset.front().label.k_orig;
  const int k_adv = dataset.front().label.k_adv;
  int out_width = 0;
  switch (mode) {
    case HeadMode::Multilabel: out_width = k_orig + k_adv; break;
    case HeadMode::Binary: out_width = 2; break;
    case HeadMode::SingleClass: out_width = k_orig; break;
  }

  RecognizerSnapshot rec;
  rec.backend = backend;
  rec.mode = mode;
  rec.k_orig = k_orig;
  rec.k_adv = k_adv;
  rec.tau = tau;
  rec.net = ModelSnapshot::build(
      recognizer_arch_text(backend, t0.dim(0), t0.dim(2), out_width),
      opts.seed);

  std::vector<const Tensor*> inputs;
  inputs.reserve(dataset.size());
  for (const AfgSample& s : dataset) inputs.push_back(&s.tensor);

  auto loss = [&](const Tensor& logits, int idx) -> LossGrad {
    const MixedLabel& label = dataset[static_cast<std::size_t>(idx)].label;
    switch (mode) {
      case HeadMode::Multilabel:
        return sigmoid_bce(logits, label.onehot());
      case HeadMode::Binary: {
        double adv = label.is_clean() ? 0.0 : 1.0;
        return sigmoid_bce(logits, {1.0 - adv, adv});
      }
      case HeadMode::SingleClass:
        return softmax_cross_entropy(logits, label.original);
    }
    fail(ErrorKind::Validation, "unknown head mode");
  };
  train_model(rec.net, inputs, loss, opts);
  return rec;
}

RecognizerSnapshot binary_mode_train(const std::vector<AfgSample>& dataset,
                                     Backend backend,
                                     const TrainOptions& opts) {
  return train_recognizer(dataset, backend, opts, HeadMode::Binary);
}

RecognitionResult RecognizerSnapshot::recognize(const Tensor& afg_tensor) const {
  Shape3 in = net.input_shape();
  if (afg_tensor.rank() != 3 || afg_tensor.dim(0) != in.h ||
      afg_tensor.dim(1) != in.w || afg_tensor.dim(2) != in.c)
    fail(ErrorKind::Input, "AFG tensor shape " + afg_tensor.shape_str() +
                               " does not match recognizer input " + in.str());
  Tensor logits = net.forward(afg_tensor);
  RecognitionResult out;
  switch (mode) {
    case HeadMode::Multilabel: {
      out.scores = sigmoid_scores(logits);
      DecodedPrediction dec = decode_prediction(out.scores, k_orig, k_adv, tau);
      out.original = dec.original;
      out.adversarial = dec.adversarial;
      out.is_adversarial = dec.adversarial.has_value();
      break;
    }
    case HeadMode::Binary: {
      out.scores = sigmoid_scores(logits);
      out.is_adversarial = out.scores[1] > out.scores[0];
      if (out.is_adversarial) out.adversarial = -1;  // class unknown
      break;
    }
    case HeadMode::SingleClass: {
      Tensor probs = softmax(logits);
      out.scores.assign(probs.data(), probs.data() + probs.size());
      out.original = argmax_lowest(probs);
      break;
    }
  }
  return out;
}

void RecognizerSnapshot::save(const std::filesystem::path& path) const {
  nlohmann::json extra = {{"recognizer",
                           {{"backend", backend_name(backend)},
                            {"mode", head_mode_name(mode)},
                            {"k_orig", k_orig},
                            {"k_adv", k_adv},
                            {"tau", tau}}}};
  net.save(path, extra.dump());
}

RecognizerSnapshot RecognizerSnapshot::load(const std::filesystem::path& path) {
  RecognizerSnapshot rec;
  std::string extra;
  rec.net = ModelSnapshot::load(path, &extra);
  if (extra.empty())
    fail(ErrorKind::Format, "not a recognizer snapshot: " + path.string());
  try {
    nlohmann::json j = nlohmann::json::parse(extra).at("recognizer");
    rec.backend = backend_from_name(j.at("backend").get<std::string>());
    rec.mode = head_mode_from_name(j.at("mode").get<std::string>());
    rec.k_orig = j.at("k_orig").get<int>();
    rec.k_adv = j.at("k_adv").get<int>();
    rec.tau = j.at("tau").get<double>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Format,
         "bad recognizer tag in " + path.string() + ": " + e.what());
  }
  return rec;
}

RecognitionResult OracleRecognizer::recognize(const AfgSample& sample) const {
  RecognitionResult out;
  out.scores = sample.label.onehot();
  out.original = sample.label.original;
  out.adversarial = sample.label.adversarial;
  out.is_adversarial = !sample.label.is_clean();
  return out;
}

// ---------------------------------------------------------------- detector

bool DetectorBaseline::flag(const Tensor& layer_activations) const {
  Tensor logits = net.forward(layer_activations);
  return argmax_lowest(logits) == 1;
}

DetectorBaseline detector_baseline_train(
    const std::vector<Tensor>& clean_activations,
    const std::vector<Tensor>& adversarial_activations, int layer_index,
    const TrainOptions& opts) {
  if (clean_activations.empty() || adversarial_activations.empty())
    fail(ErrorKind::Validation,
         "detector training needs both clean and adversarial activations");
  const Tensor& t0 = clean_activations.front();
  if (t0.rank() != 3)
    fail(ErrorKind::Validation, "detector expects (H,W,C) activations");

  std::ostringstream os;
  os << "input " << t0.dim(0) << "x" << t0.dim(1) << "x" << t0.dim(2)
     << "; flatten; dense " << t0.size() << "->64; relu; dense 64->2";
  DetectorBaseline det;
  det.layer_index = layer_index;
  det.net = ModelSnapshot::build(os.str(), opts.seed);

  std::vector<const Tensor*> inputs;
  std::vector<int> labels;
  for (const Tensor& t : clean_activations) {
    if (!t.same_shape(t0))
      fail(ErrorKind::Validation, "mixed activation shapes");
    inputs.push_back(&t);
    labels.push_back(0);
  }
  for (const Tensor& t : adversarial_activations) {
    if (!t.same_shape(t0))
      fail(ErrorKind::Validation, "mixed activation shapes");
    inputs.push_back(&t);
    labels.push_back(1);
  }
  auto loss = [&](const Tensor& logits, int idx) {
    return softmax_cross_entropy(logits, labels[static_cast<std::size_t>(idx)]);
  };
  train_model(det.net, inputs, loss, opts);
  return det;
}

double detector_accuracy(const DetectorBaseline& detector,
                         const std::vector<Tensor>& clean_activations,
                         const std::vector<Tensor>& adversarial_activations) {
  std::int64_t correct = 0, total = 0;
  for (const Tensor& t : clean_activations) {
    correct += detector.flag(t) ? 0 : 1;
    ++total;
  }
  for (const Tensor& t : adversarial_activations) {
    correct += detector.flag(t) ? 1 : 0;
    ++total;
  }
  if (total == 0) fail(ErrorKind::Validation, "empty detector evaluation set");
  return static_cast<double>(correct) / static_cast<double>(total);
}

}  // namespace afg
