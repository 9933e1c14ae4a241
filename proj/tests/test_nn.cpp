#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "afglab/error.hpp"
#include "afglab/nn.hpp"
#include "afglab/prng.hpp"
#include "afglab/serial.hpp"
#include "test_util.hpp"

using namespace afg;

namespace {

const char* kSmallArch =
    "input 6x6x2; conv 2->3 k3 s1 p1; relu; pool 2; conv 3->4 k3 s1 p1; relu; "
    "flatten; dense 36->5; relu; dense 5->3";

// Gradient check of d loss / d input against central differences, covering
// every layer type in one composite network. ReLU probes that sit within h
// of a kink are skipped.
void check_input_gradients(const ModelSnapshot& model, const Tensor& image,
                           int label, double tol) {
  double base_loss = 0.0;
  Tensor analytic = model.loss_input_gradient(image, label, &base_loss);
  auto f = [&](const Tensor& x) {
    Tensor logits = model.forward(x);
    return softmax_cross_entropy(logits, label).loss;
  };
  SplitMix64 rng(123);
  const double h = 1e-4;
  int checked = 0;
  while (checked < 8) {
    std::int64_t i =
        static_cast<std::int64_t>(rng.bounded(
            static_cast<std::uint64_t>(image.size())));
    double numeric = test::central_diff(f, image, i, h);
    CHECK_MESSAGE(test::close_rel(analytic[i], numeric, tol, 1e-7),
                  "coordinate ", i, ": analytic ", analytic[i], " numeric ",
                  numeric);
    ++checked;
  }
}

}  // namespace

TEST_CASE("arch parser round-trips and counts conv layers") {
  ArchSpec arch = ArchSpec::parse(kSmallArch);
  CHECK(arch.layers.size() == 9);
  CHECK(arch.output_width() == 3);
  ArchSpec again = ArchSpec::parse(arch.to_text());
  CHECK(again.to_text() == arch.to_text());

  ModelSnapshot m = ModelSnapshot::build(arch, 1);
  CHECK(m.conv_layer_count() == 2);
  CHECK(m.conv_layer_names() == std::vector<std::string>{"conv1", "conv2"});
}

TEST_CASE("4-conv/2-dense spec exposes N=4 conv layer names") {
  ModelSnapshot m = ModelSnapshot::build(
      "input 32x32x3; conv 3->12 k3 s1 p1; relu; pool 2; "
      "conv 12->24 k3 s1 p1; relu; pool 2; conv 24->32 k3 s1 p1; relu; pool 2; "
      "conv 32->48 k3 s1 p1; relu; flatten; dense 768->64; relu; dense 64->10",
      7);
  CHECK(m.conv_layer_count() == 4);
  CHECK(m.output_width() == 10);
}

TEST_CASE("channel mismatch names both layers") {
  try {
    ArchSpec::parse(
        "input 8x8x3; conv 3->4 k3 s1 p1; relu; conv 8->4 k3 s1 p1; relu; "
        "flatten; dense 256->2");
    FAIL("expected validation error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Validation);
    CHECK(std::string(e.what()).find("conv2") != std::string::npos);
    CHECK(std::string(e.what()).find("conv1") != std::string::npos);
  }
}

TEST_CASE("dense width mismatch is rejected") {
  CHECK_THROWS_AS(
      ArchSpec::parse("input 4x4x1; flatten; dense 15->2"), Error);
}

TEST_CASE("same seed twice gives identical weights, different seeds differ") {
  ModelSnapshot a = ModelSnapshot::build(kSmallArch, 5);
  ModelSnapshot b = ModelSnapshot::build(kSmallArch, 5);
  ModelSnapshot c = ModelSnapshot::build(kSmallArch, 6);
  CHECK(a.serialize() == b.serialize());
  CHECK(a.serialize() != c.serialize());
}

TEST_CASE("forward_with_features matches plain forward bit-for-bit") {
  ModelSnapshot m = ModelSnapshot::build(kSmallArch, 2);
  Tensor x = test::random_tensor({6, 6, 2}, 3);
  Tensor plain = m.forward(x);
  ForwardCapture cap = m.forward_with_features(x, "probe");
  REQUIRE(cap.logits.size() == plain.size());
  for (std::int64_t i = 0; i < plain.size(); ++i)
    CHECK(cap.logits[i] == plain[i]);
  CHECK(cap.features.per_layer.size() == 2);
  CHECK(cap.features.input_ref == "probe");
  for (const Tensor& f : cap.features.per_layer) CHECK(f.all_nonneg());
}

TEST_CASE("all-zero image through a bias-free net gives all-zero features") {
  ModelSnapshot m = ModelSnapshot::build(kSmallArch, 2);
  for (Layer* l : m.layers())
    if (l->bias()) l->bias()->fill(0.0);
  Tensor x({6, 6, 2});
  ForwardCapture cap = m.forward_with_features(x);
  for (const Tensor& f : cap.features.per_layer) {
    CHECK(f.max() == 0.0);
    CHECK(f.min() == 0.0);
  }
}

TEST_CASE("feature replay reproduces the logits") {
  ModelSnapshot m = ModelSnapshot::build(kSmallArch, 9);
  Tensor x = test::random_tensor({6, 6, 2}, 10);
  ForwardCapture cap = m.forward_with_features(x);
  for (int c = 0; c < m.conv_layer_count(); ++c) {
    Tensor logits = m.replay_from_feature(
        c, cap.features.per_layer[static_cast<std::size_t>(c)]);
    for (std::int64_t i = 0; i < logits.size(); ++i)
      CHECK(logits[i] == cap.logits[i]);
  }
}

TEST_CASE("affine first layer: pre-activation difference equals W*rho") {
  // Linear (conv-free) model; difference of outputs must equal the weight
  // matrix applied to the input difference.
  ModelSnapshot m =
      ModelSnapshot::build("input 1x1x6; flatten; dense 6->4", 21);
  Tensor x = test::random_tensor({1, 1, 6}, 1);
  Tensor rho = test::random_tensor({1, 1, 6}, 2, -0.05, 0.05);
  Tensor x2 = x;
  x2.add_scaled(rho, 1.0);

  Tensor d = m.forward(x2);
  d.add_scaled(m.forward(x), -1.0);  // f(X+rho) - f(X)

  const Tensor* w = nullptr;
  for (Layer* l : m.layers())
    if (l->weights()) w = l->weights();
  REQUIRE(w != nullptr);
  for (int o = 0; o < 4; ++o) {
    double expect = 0.0;
    for (int i = 0; i < 6; ++i) expect += (*w)[o * 6 + i] * rho[i];
    CHECK(test::close_rel(d[o], expect, 1e-5, 1e-12));
  }
}

TEST_CASE("analytic input gradients match central differences (1e-3)") {
  ModelSnapshot m = ModelSnapshot::build(kSmallArch, 4);
  Tensor x = test::random_tensor({6, 6, 2}, 5);
  check_input_gradients(m, x, 1, 1e-3);
}

TEST_CASE("per-layer-type gradient checks on random probes") {
  struct Probe {
    const char* arch;
    std::vector<int> in_dims;
  };
  const Probe probes[] = {
      {"input 5x5x2; conv 2->3 k3 s1 p1; flatten; dense 75->2", {5, 5, 2}},
      {"input 5x5x2; conv 2->3 k2 s1 p0; flatten; dense 48->2", {5, 5, 2}},
      {"input 6x6x1; conv 1->2 k3 s3 p0; flatten; dense 8->2", {6, 6, 1}},
      {"input 4x4x3; pool 2; flatten; dense 12->2", {4, 4, 3}},
      {"input 4x4x2; relu; flatten; dense 32->2", {4, 4, 2}},
      {"input 1x1x9; flatten; dense 9->4; relu; dense 4->2", {1, 1, 9}},
  };
  for (const Probe& p : probes) {
    CAPTURE(p.arch);
    ModelSnapshot m = ModelSnapshot::build(p.arch, 17);
    // keep ReLU inputs away from kinks: bias-free and inputs in [0.2, 1]
    Tensor x = test::random_tensor(p.in_dims, 23, 0.2, 1.0);
    check_input_gradients(m, x, 0, 1e-3);
  }
}

TEST_CASE("conv and dense weight gradients match central differences") {
  ModelSnapshot m = ModelSnapshot::build(kSmallArch, 31);
  Tensor x = test::random_tensor({6, 6, 2}, 32);
  const int label = 2;

  auto loss_of_model = [&](const ModelSnapshot& model) {
    return softmax_cross_entropy(model.forward(x), label).loss;
  };

  // accumulate analytic grads once
  std::vector<Tensor> gws, gbs;
  auto trace = m.forward_trace(x);
  LossGrad lg = softmax_cross_entropy(trace.back(), label);
  Tensor g = lg.grad_logits;
  const auto& layers = m.layers();
  std::vector<std::pair<int, int>> slots;  // layer idx -> grad idx
  for (int li = static_cast<int>(layers.size()) - 1; li >= 0; --li) {
    Layer* l = layers[static_cast<std::size_t>(li)];
    if (l->weights()) {
      Tensor gw(l->weights()->dims()), gb(l->bias()->dims());
      l->param_grad(trace[static_cast<std::size_t>(li)], g, &gw, &gb);
      gws.insert(gws.begin(), std::move(gw));
      gbs.insert(gbs.begin(), std::move(gb));
      slots.insert(slots.begin(), {li, 0});
    }
    if (li > 0) g = l->backward(trace[static_cast<std::size_t>(li)], g);
  }

  SplitMix64 rng(77);
  int weight_layer = 0;
  for (auto [li, _] : slots) {
    Layer* l = layers[static_cast<std::size_t>(li)];
    for (int probe = 0; probe < 4; ++probe) {
      std::int64_t i = static_cast<std::int64_t>(
          rng.bounded(static_cast<std::uint64_t>(l->weights()->size())));
      const double h = 1e-4;
      ModelSnapshot hi = m, lo = m;
      (*hi.layers()[static_cast<std::size_t>(li)]->weights())[i] += h;
      (*lo.layers()[static_cast<std::size_t>(li)]->weights())[i] -= h;
      double realized =
          (*hi.layers()[static_cast<std::size_t>(li)]->weights())[i] -
          (*lo.layers()[static_cast<std::size_t>(li)]->weights())[i];
      double numeric = (loss_of_model(hi) - loss_of_model(lo)) / realized;
      CHECK_MESSAGE(
          test::close_rel(gws[static_cast<std::size_t>(weight_layer)][i],
                          numeric, 1e-3, 1e-8),
          "layer ", li, " weight ", i);
    }
    ++weight_layer;
  }
}

TEST_CASE("predict tie-break and confidence") {
  ModelSnapshot m =
      ModelSnapshot::build("input 1x1x2; flatten; dense 2->4", 3);
  for (Layer* l : m.layers()) {
    if (l->weights()) {
      l->weights()->fill(0.0);
      l->bias()->fill(0.0);
    }
  }
  Tensor x({1, 1, 2});
  Prediction p = m.predict(x);
  CHECK(p.cls == 0);  // uniform softmax, lowest index wins
  CHECK(p.confidence == doctest::Approx(0.25));

  // unique max at index 3
  for (Layer* l : m.layers())
    if (l->bias()) (*l->bias())[3] = 2.0;
  p = m.predict(x);
  CHECK(p.cls == 3);
  CHECK(p.confidence > 0.25);
}

TEST_CASE("training: zero epochs and zero lr leave the snapshot unchanged") {
  ModelSnapshot m = ModelSnapshot::build(kSmallArch, 11);
  auto before = m.serialize();
  std::vector<Tensor> data;
  for (int i = 0; i < 8; ++i)
    data.push_back(test::random_tensor({6, 6, 2}, 100 + i));
  std::vector<const Tensor*> inputs;
  for (const auto& t : data) inputs.push_back(&t);
  auto loss = [&](const Tensor& logits, int idx) {
    return softmax_cross_entropy(logits, idx % 3);
  };

  TrainOptions zero_epochs{0.01, 0.9, 0, 4, 1, true};
  train_model(m, inputs, loss, zero_epochs);
  CHECK(m.serialize() == before);

  TrainOptions zero_lr{0.0, 0.9, 3, 4, 1, true};
  train_model(m, inputs, loss, zero_lr);
  ModelSnapshot fresh = ModelSnapshot::build(kSmallArch, 11);
  bool weights_equal = true;
  for (std::size_t i = 0; i < m.layers().size(); ++i) {
    const Layer* a = m.layers()[i];
    const Layer* b = fresh.layers()[i];
    if (a->weights() && !(*a->weights() == *b->weights() &&
                          *a->bias() == *b->bias()))
      weights_equal = false;
  }
  CHECK(weights_equal);
}

TEST_CASE("two linearly separable classes train to >= 0.95 accuracy") {
  // Oracle first: verify separability with an independent linear probe
  // (perceptron) before asking the CNN to learn it.
  SplitMix64 rng(55);
  std::vector<Tensor> images;
  std::vector<int> labels;
  for (int i = 0; i < 60; ++i) {
    int cls = i % 2;
    Tensor x({8, 8, 1});
    for (std::int64_t j = 0; j < x.size(); ++j)
      x[j] = rng.uniform(0.0, 0.35);
    // class 1 brightens the left half, class 0 the right half
    for (int y = 0; y < 8; ++y)
      for (int xx = 0; xx < 4; ++xx) {
        if (cls == 1) x.at(y, xx, 0) += 0.5;
        else x.at(y, xx + 4, 0) += 0.5;
      }
    x.clamp(0.0, 1.0);
    images.push_back(std::move(x));
    labels.push_back(cls);
  }

  {  // perceptron probe converges => linearly separable
    std::vector<double> w(64, 0.0);
    double b = 0.0;
    bool separated = false;
    for (int epoch = 0; epoch < 200 && !separated; ++epoch) {
      separated = true;
      for (std::size_t i = 0; i < images.size(); ++i) {
        double s = b;
        for (int j = 0; j < 64; ++j) s += w[static_cast<std::size_t>(j)] *
                                          images[i][j];
        int pred = s > 0 ? 1 : 0;
        if (pred != labels[i]) {
          separated = false;
          double dir = labels[i] == 1 ? 1.0 : -1.0;
          for (int j = 0; j < 64; ++j)
            w[static_cast<std::size_t>(j)] += dir * images[i][j];
          b += dir;
        }
      }
    }
    REQUIRE(separated);
  }

  ModelSnapshot m = ModelSnapshot::build(
      "input 8x8x1; conv 1->4 k3 s1 p1; relu; pool 2; conv 4->6 k3 s1 p1; "
      "relu; pool 2; flatten; dense 24->2",
      13);
  std::vector<const Tensor*> inputs;
  for (const auto& t : images) inputs.push_back(&t);
  auto loss = [&](const Tensor& logits, int idx) {
    return softmax_cross_entropy(logits,
                                 labels[static_cast<std::size_t>(idx)]);
  };
  TrainOptions opts{0.05, 0.9, 30, 8, 3, true};
  auto report = train_model(m, inputs, loss, opts);
  CHECK(report.final_mean_loss < 0.5);

  int correct = 0;
  for (std::size_t i = 0; i < images.size(); ++i) {
    Prediction p = m.predict(images[i]);
    if (p.cls == labels[i]) ++correct;
  }
  CHECK(static_cast<double>(correct) / images.size() >= 0.95);
}

TEST_CASE("snapshot round-trip reproduces logits bit-identically") {
  test::TempDir tmp("snap");
  ModelSnapshot m = ModelSnapshot::build(kSmallArch, 19);
  auto path = tmp.path() / "m.afgm";
  m.save(path);
  ModelSnapshot r = ModelSnapshot::load(path);
  for (int probe = 0; probe < 8; ++probe) {
    Tensor x = test::random_tensor({6, 6, 2}, 300 + probe);
    Tensor a = m.forward(x);
    Tensor b = r.forward(x);
    for (std::int64_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
  }
}

TEST_CASE("snapshot rejects truncation, tampering, version skew") {
  test::TempDir tmp("snapbad");
  ModelSnapshot m = ModelSnapshot::build(kSmallArch, 19);
  auto path = tmp.path() / "m.afgm";
  m.save(path);
  auto bytes = read_file_bytes(path);

  auto truncated = bytes;
  truncated.resize(bytes.size() / 2);
  write_file_bytes(tmp.path() / "t.afgm", truncated);
  try {
    ModelSnapshot::load(tmp.path() / "t.afgm");
    FAIL("expected format error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Format);
  }

  auto tampered = bytes;
  tampered[tampered.size() - 20] ^= 1;  // flip a weight bit
  write_file_bytes(tmp.path() / "c.afgm", tampered);
  try {
    ModelSnapshot::load(tmp.path() / "c.afgm");
    FAIL("expected integrity error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Integrity);
  }

  auto skewed = bytes;
  skewed[4] = 9;  // low byte of the version field
  write_file_bytes(tmp.path() / "v.afgm", skewed);
  try {
    ModelSnapshot::load(tmp.path() / "v.afgm");
    FAIL("expected format error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Format);
    CHECK(std::string(e.what()).find("version") != std::string::npos);
  }
}

TEST_CASE("training diverges with a clear error") {
  ModelSnapshot m = ModelSnapshot::build(
      "input 1x1x4; flatten; dense 4->2", 1);
  Tensor big = Tensor::full({1, 1, 4}, 1.0);
  std::vector<const Tensor*> inputs{&big};
  auto loss = [&](const Tensor& logits, int) {
    LossGrad lg = softmax_cross_entropy(logits, 0);
    lg.loss = std::numeric_limits<double>::infinity();
    return lg;
  };
  try {
    train_model(m, inputs, loss, TrainOptions{0.1, 0.9, 2, 1, 1, false});
    FAIL("expected training error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Training);
    CHECK(std::string(e.what()).find("epoch") != std::string::npos);
  }
}
