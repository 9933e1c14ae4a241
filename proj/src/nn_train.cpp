#include <cmath>
#include <numeric>

#include "afglab/error.hpp"
#include "afglab/nn.hpp"
#include "afglab/prng.hpp"

namespace afg {

namespace {

struct ParamSlot {
  Layer* layer;
  Tensor grad_w, grad_b;
  Tensor vel_w, vel_b;
};

}  // namespace

TrainReport train_model(
    ModelSnapshot& model, const std::vector<const Tensor*>& inputs,
    const std::function<LossGrad(const Tensor& logits, int idx)>& sample_loss,
    const TrainOptions& opts,
    const std::function<void(const EpochStats&)>& on_epoch) {
  if (opts.batch_size < 1)
    fail(ErrorKind::Validation, "batch_size must be >= 1");
  if (opts.epochs < 0) fail(ErrorKind::Validation, "epochs must be >= 0");

  TrainReport report;
  if (opts.epochs == 0 || inputs.empty()) return report;

  std::vector<ParamSlot> slots;
  for (Layer* l : model.layers()) {
    if (!l->weights()) continue;
    ParamSlot s;
    s.layer = l;
    s.grad_w = Tensor(l->weights()->dims());
    s.grad_b = Tensor(l->bias()->dims());
    s.vel_w = Tensor(l->weights()->dims());
    s.vel_b = Tensor(l->bias()->dims());
    slots.push_back(std::move(s));
  }

  const auto& layers = model.layers();
  std::vector<int> order(inputs.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    if (opts.shuffle) {
      SplitMix64 rng(SplitMix64::derive(opts.seed, 0x5ee0 + epoch));
      rng.shuffle(order);
    }
    double loss_sum = 0.0;
    std::size_t cursor = 0;
    while (cursor < order.size()) {
      std::size_t batch_end =
          std::min(cursor + static_cast<std::size_t>(opts.batch_size),
                   order.size());
      int batch_n = static_cast<int>(batch_end - cursor);
      for (auto& s : slots) {
        s.grad_w.fill(0.0);
        s.grad_b.fill(0.0);
      }
      for (; cursor < batch_end; ++cursor) {
        int idx = order[cursor];
        auto trace = model.forward_trace(*inputs[static_cast<std::size_t>(idx)]);
        LossGrad lg = sample_loss(trace.back(), idx);
        if (!std::isfinite(lg.loss))
          fail(ErrorKind::Training,
               "non-finite loss at epoch " + std::to_string(epoch));
        loss_sum += lg.loss;
        // Backward pass, accumulating parameter grads; the gradient w.r.t.
        // the network input is not needed here, so layer 0's backward call
        // is skipped when it carries no parameters.
        Tensor g = lg.grad_logits;
        std::size_t slot_i = slots.size();
        for (int li = static_cast<int>(layers.size()) - 1; li >= 0; --li) {
          Layer* l = layers[static_cast<std::size_t>(li)];
          if (l->weights()) {
            --slot_i;
            ParamSlot& s = slots[slot_i];
            l->param_grad(trace[static_cast<std::size_t>(li)], g, &s.grad_w,
                          &s.grad_b);
          }
          if (li == 0) break;
          g = l->backward(trace[static_cast<std::size_t>(li)], g);
        }
      }
      double inv_n = 1.0 / batch_n;
      for (auto& s : slots) {
        s.vel_w.scale(opts.momentum);
        s.vel_w.add_scaled(s.grad_w, -opts.lr * inv_n);
        s.layer->weights()->add_scaled(s.vel_w, 1.0);
        s.layer->weights()->quantize_f32();
        s.vel_b.scale(opts.momentum);
        s.vel_b.add_scaled(s.grad_b, -opts.lr * inv_n);
        s.layer->bias()->add_scaled(s.vel_b, 1.0);
        s.layer->bias()->quantize_f32();
      }
    }
    EpochStats st{epoch, loss_sum / static_cast<double>(inputs.size())};
    report.epochs.push_back(st);
    if (on_epoch) on_epoch(st);
  }
  report.final_mean_loss = report.epochs.back().mean_loss;
  model.meta().epochs += opts.epochs;
  model.meta().final_train_loss = report.final_mean_loss;
  return report;
}

}  // namespace afg
