#include <Eigen/Core>

#include "afglab/error.hpp"
#include "afglab/nn.hpp"
#include "afglab/prng.hpp"

namespace afg {

using RowMat =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;
using MapVec = Eigen::Map<Eigen::VectorXd>;
using CMapVec = Eigen::Map<const Eigen::VectorXd>;

namespace {

void he_uniform_init(Tensor& w, int fan_in, SplitMix64& rng) {
  double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
  for (std::int64_t i = 0; i < w.size(); ++i)
    w[i] = rng.uniform(-limit, limit);
  w.quantize_f32();
}

}  // namespace

// ---------------------------------------------------------------- Conv

class ConvLayer final : public Layer {
 public:
  ConvLayer(LayerSpec spec, SplitMix64* rng) : Layer(std::move(spec)) {
    weights_ = Tensor({spec_.kernel, spec_.kernel, spec_.in_ch, spec_.out_ch});
    bias_ = Tensor({spec_.out_ch});
    if (rng)
      he_uniform_init(weights_, spec_.kernel * spec_.kernel * spec_.in_ch, *rng);
  }

  Tensor forward(const Tensor& x) const override {
    auto [oh, ow] = out_hw(x);
    Tensor cols = im2col(x, oh, ow);
    Tensor y({oh, ow, spec_.out_ch});
    CMapMat cm(cols.data(), std::int64_t(oh) * ow,
               std::int64_t(spec_.kernel) * spec_.kernel * spec_.in_ch);
    CMapMat wm(weights_.data(), cm.cols(), spec_.out_ch);
    MapMat ym(y.data(), cm.rows(), spec_.out_ch);
    ym.noalias() = cm * wm;
    CMapVec bv(bias_.data(), spec_.out_ch);
    ym.rowwise() += bv.transpose();
    return y;
  }

  Tensor backward(const Tensor& x, const Tensor& gout) const override {
    auto [oh, ow] = out_hw(x);
    std::int64_t kk = std::int64_t(spec_.kernel) * spec_.kernel * spec_.in_ch;
    Tensor gcols({oh * ow, static_cast<int>(kk)});
    CMapMat gm(gout.data(), std::int64_t(oh) * ow, spec_.out_ch);
    CMapMat wm(weights_.data(), kk, spec_.out_ch);
    MapMat gc(gcols.data(), gm.rows(), kk);
    gc.noalias() = gm * wm.transpose();
    return col2im(gcols, x, oh, ow);
  }

  void param_grad(const Tensor& x, const Tensor& gout, Tensor* gw,
                  Tensor* gb) const override {
    auto [oh, ow] = out_hw(x);
    Tensor cols = im2col(x, oh, ow);
    std::int64_t kk = std::int64_t(spec_.kernel) * spec_.kernel * spec_.in_ch;
    CMapMat cm(cols.data(), std::int64_t(oh) * ow, kk);
    CMapMat gm(gout.data(), cm.rows(), spec_.out_ch);
    MapMat gwm(gw->data(), kk, spec_.out_ch);
    gwm.noalias() += cm.transpose() * gm;
    MapVec gbv(gb->data(), spec_.out_ch);
    gbv.noalias() += gm.colwise().sum().transpose();
  }

  Tensor* weights() override { return &weights_; }
  Tensor* bias() override { return &bias_; }

  std::unique_ptr<Layer> clone() const override {
    auto c = std::make_unique<ConvLayer>(spec_, nullptr);
    c->weights_ = weights_;
    c->bias_ = bias_;
    return c;
  }

 private:
  std::pair<int, int> out_hw(const Tensor& x) const {
    int oh = (x.dim(0) + 2 * spec_.pad - spec_.kernel) / spec_.stride + 1;
    int ow = (x.dim(1) + 2 * spec_.pad - spec_.kernel) / spec_.stride + 1;
    return {oh, ow};
  }

  Tensor im2col(const Tensor& x, int oh, int ow) const {
    const int k = spec_.kernel, s = spec_.stride, p = spec_.pad;
    const int h = x.dim(0), w = x.dim(1), ci = x.dim(2);
    Tensor cols({oh * ow, k * k * ci});
    double* out = cols.data();
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        for (int ky = 0; ky < k; ++ky) {
          int iy = oy * s - p + ky;
          for (int kx = 0; kx < k; ++kx) {
            int ix = ox * s - p + kx;
            if (iy >= 0 && iy < h && ix >= 0 && ix < w) {
              const double* src = x.data() + (std::int64_t(iy) * w + ix) * ci;
              for (int c = 0; c < ci; ++c) *out++ = src[c];
            } else {
              for (int c = 0; c < ci; ++c) *out++ = 0.0;
            }
          }
        }
      }
    }
    return cols;
  }

  Tensor col2im(const Tensor& gcols, const Tensor& x, int oh, int ow) const {
    const int k = spec_.kernel, s = spec_.stride, p = spec_.pad;
    const int h = x.dim(0), w = x.dim(1), ci = x.dim(2);
    Tensor gx({h, w, ci});
    const double* in = gcols.data();
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        for (int ky = 0; ky < k; ++ky) {
          int iy = oy * s - p + ky;
          for (int kx = 0; kx < k; ++kx) {
            int ix = ox * s - p + kx;
            if (iy >= 0 && iy < h && ix >= 0 && ix < w) {
              double* dst = gx.data() + (std::int64_t(iy) * w + ix) * ci;
              for (int c = 0; c < ci; ++c) dst[c] += in[c];
            }
            in += ci;
          }
        }
      }
    }
    return gx;
  }

  Tensor weights_;
  Tensor bias_;
};

// ---------------------------------------------------------------- ReLU

class ReluLayer final : public Layer {
 public:
  using Layer::Layer;

  Tensor forward(const Tensor& x) const override {
    Tensor y = x;
    for (std::int64_t i = 0; i < y.size(); ++i)
      if (y[i] < 0.0) y[i] = 0.0;
    return y;
  }

  // Subgradient 0 at the kink.
  Tensor backward(const Tensor& x, const Tensor& gout) const override {
    Tensor g = gout;
    for (std::int64_t i = 0; i < g.size(); ++i)
      if (x[i] <= 0.0) g[i] = 0.0;
    return g;
  }

  std::unique_ptr<Layer> clone() const override {
    return std::make_unique<ReluLayer>(spec_);
  }
};

// ---------------------------------------------------------------- MaxPool

class MaxPoolLayer final : public Layer {
 public:
  using Layer::Layer;

  Tensor forward(const Tensor& x) const override {
    const int p = spec_.pool, h = x.dim(0), w = x.dim(1), c = x.dim(2);
    Tensor y({h / p, w / p, c});
    for (int oy = 0; oy < h / p; ++oy)
      for (int ox = 0; ox < w / p; ++ox)
        for (int ch = 0; ch < c; ++ch) {
          double m = x.at(oy * p, ox * p, ch);
          for (int dy = 0; dy < p; ++dy)
            for (int dx = 0; dx < p; ++dx)
              m = std::max(m, x.at(oy * p + dy, ox * p + dx, ch));
          y.at(oy, ox, ch) = m;
        }
    return y;
  }

  // Routes to the first maximum in scan order, matching forward's choice.
  Tensor backward(const Tensor& x, const Tensor& gout) const override {
    const int p = spec_.pool, h = x.dim(0), w = x.dim(1), c = x.dim(2);
    Tensor gx({h, w, c});
    for (int oy = 0; oy < h / p; ++oy)
      for (int ox = 0; ox < w / p; ++ox)
        for (int ch = 0; ch < c; ++ch) {
          int by = oy * p, bx = ox * p;
          double m = x.at(by, bx, ch);
          for (int dy = 0; dy < p; ++dy)
            for (int dx = 0; dx < p; ++dx)
              if (x.at(oy * p + dy, ox * p + dx, ch) > m) {
                m = x.at(oy * p + dy, ox * p + dx, ch);
                by = oy * p + dy;
                bx = ox * p + dx;
              }
          gx.at(by, bx, ch) += gout.at(oy, ox, ch);
        }
    return gx;
  }

  std::unique_ptr<Layer> clone() const override {
    return std::make_unique<MaxPoolLayer>(spec_);
  }
};

// ---------------------------------------------------------------- Flatten

class FlattenLayer final : public Layer {
 public:
  using Layer::Layer;

  Tensor forward(const Tensor& x) const override {
    return x.reshaped({static_cast<int>(x.size())});
  }

  Tensor backward(const Tensor& x, const Tensor& gout) const override {
    return gout.reshaped(x.dims());
  }

  std::unique_ptr<Layer> clone() const override {
    return std::make_unique<FlattenLayer>(spec_);
  }
};

// ---------------------------------------------------------------- Dense

class DenseLayer final : public Layer {
 public:
  DenseLayer(LayerSpec spec, SplitMix64* rng) : Layer(std::move(spec)) {
    weights_ = Tensor({spec_.out_features, spec_.in_features});
    bias_ = Tensor({spec_.out_features});
    if (rng) he_uniform_init(weights_, spec_.in_features, *rng);
  }

  Tensor forward(const Tensor& x) const override {
    Tensor y({spec_.out_features});
    CMapMat wm(weights_.data(), spec_.out_features, spec_.in_features);
    CMapVec xv(x.data(), spec_.in_features);
    MapVec yv(y.data(), spec_.out_features);
    CMapVec bv(bias_.data(), spec_.out_features);
    yv.noalias() = wm * xv + bv;
    return y;
  }

  Tensor backward(const Tensor& /*x*/, const Tensor& gout) const override {
    Tensor gx({spec_.in_features});
    CMapMat wm(weights_.data(), spec_.out_features, spec_.in_features);
    CMapVec gv(gout.data(), spec_.out_features);
    MapVec gxv(gx.data(), spec_.in_features);
    gxv.noalias() = wm.transpose() * gv;
    return gx;
  }

  void param_grad(const Tensor& x, const Tensor& gout, Tensor* gw,
                  Tensor* gb) const override {
    MapMat gwm(gw->data(), spec_.out_features, spec_.in_features);
    CMapVec gv(gout.data(), spec_.out_features);
    CMapVec xv(x.data(), spec_.in_features);
    gwm.noalias() += gv * xv.transpose();
    MapVec gbv(gb->data(), spec_.out_features);
    gbv.noalias() += gv;
  }

  Tensor* weights() override { return &weights_; }
  Tensor* bias() override { return &bias_; }

  std::unique_ptr<Layer> clone() const override {
    auto c = std::make_unique<DenseLayer>(spec_, nullptr);
    c->weights_ = weights_;
    c->bias_ = bias_;
    return c;
  }

 private:
  Tensor weights_;
  Tensor bias_;
};

std::unique_ptr<Layer> make_layer(const LayerSpec& spec, SplitMix64* rng) {
  switch (spec.kind) {
    case LayerKind::Conv: return std::make_unique<ConvLayer>(spec, rng);
    case LayerKind::Relu: return std::make_unique<ReluLayer>(spec);
    case LayerKind::MaxPool: return std::make_unique<MaxPoolLayer>(spec);
    case LayerKind::Flatten: return std::make_unique<FlattenLayer>(spec);
    case LayerKind::Dense: return std::make_unique<DenseLayer>(spec, rng);
  }
  fail(ErrorKind::Validation, "unknown layer kind");
}

}  // namespace afg
