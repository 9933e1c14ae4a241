#include "afglab/attacks.hpp"

#include <json.hpp>

#include <cmath>
#include <mutex>
#include <unordered_map>

#include "afglab/error.hpp"
#include "afglab/parallel.hpp"
#include "afglab/serial.hpp"

namespace afg {

namespace fs = std::filesystem;

const char* attack_name(AttackKind k) {
  switch (k) {
    case AttackKind::FGSM: return "fgsm";
    case AttackKind::BIM: return "bim";
    case AttackKind::DEEPFOOL: return "deepfool";
  }
  return "?";
}

AttackKind attack_from_name(const std::string& name) {
  if (name == "fgsm" || name == "FGSM") return AttackKind::FGSM;
  if (name == "bim" || name == "BIM") return AttackKind::BIM;
  if (name == "deepfool" || name == "DEEPFOOL" || name == "DeepFool")
    return AttackKind::DEEPFOOL;
  fail(ErrorKind::Validation, "unknown attack '" + name + "'");
}

AttackConfig AttackConfig::fgsm_default(double eps) {
  return {AttackKind::FGSM, eps, 1, 0.0, 0.0};
}

AttackConfig AttackConfig::bim_default(double eps) {
  return {AttackKind::BIM, eps, 100, 0.0, 0.0};
}

AttackConfig AttackConfig::deepfool_default() {
  return {AttackKind::DEEPFOOL, 0.0, 80, 0.0, 0.02};
}

void AttackConfig::validate() const {
  if (kind != AttackKind::DEEPFOOL && epsilon < 0.0)
    fail(ErrorKind::Validation, "epsilon must be >= 0");
  if (iterations < 1)
    fail(ErrorKind::Validation, "iterations must be >= 1");
  if (kind == AttackKind::BIM && step_size < 0.0)
    fail(ErrorKind::Validation, "step_size must be >= 0");
  if (kind == AttackKind::DEEPFOOL && overshoot < 0.0)
    fail(ErrorKind::Validation, "overshoot must be >= 0");
}

std::string AttackConfig::label() const { return attack_name(kind); }

namespace {

inline double sign0(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

AdversarialRecord finish_record(const ModelSnapshot& model,
                                const ImageExample& example, Tensor adv,
                                const AttackConfig& cfg, int iterations_used) {
  AdversarialRecord rec;
  rec.original = example;
  rec.adversarial = std::move(adv);
  rec.adversarial.quantize_f32();
  rec.perturbation = rec.adversarial;
  rec.perturbation.add_scaled(example.pixels, -1.0);
  rec.true_label = example.label;
  Prediction p = model.predict(rec.adversarial);
  rec.adv_label = p.cls;
  rec.confidence = p.confidence;
  rec.success = rec.adv_label != rec.true_label;
  rec.attack = cfg;
  rec.iterations_used = iterations_used;
  return rec;
}

// Shared FGSM/BIM core: signed-gradient steps, each followed by projection
// into the L-inf ball around the original and into [0,1].
AdversarialRecord iterative_signed_gradient(const ModelSnapshot& model,
                                            const ImageExample& example,
                                            const AttackConfig& cfg,
                                            int iterations, double step) {
  const Tensor& x0 = example.pixels;
  Tensor x = x0;
  for (int it = 0; it < iterations; ++it) {
    Tensor g = model.loss_input_gradient(x, example.label);
    if (!g.all_finite())
      fail(ErrorKind::Attack, "non-finite gradient for " + example.id);
    for (std::int64_t i = 0; i < x.size(); ++i) {
      double v = x[i] + step * sign0(g[i]);
      v = std::min(std::max(v, x0[i] - cfg.epsilon), x0[i] + cfg.epsilon);
      x[i] = std::min(std::max(v, 0.0), 1.0);
    }
  }
  return finish_record(model, example, std::move(x), cfg, iterations);
}

}  // namespace

AdversarialRecord fgsm(const ModelSnapshot& model, const ImageExample& example,
                       const AttackConfig& cfg) {
  cfg.validate();
  return iterative_signed_gradient(model, example, cfg, 1, cfg.epsilon);
}

AdversarialRecord bim(const ModelSnapshot& model, const ImageExample& example,
                      const AttackConfig& cfg) {
  cfg.validate();
  double step = cfg.step_size > 0.0 ? cfg.step_size : cfg.epsilon / 10.0;
  return iterative_signed_gradient(model, example, cfg, cfg.iterations, step);
}

AdversarialRecord deepfool(const ModelSnapshot& model,
                           const ImageExample& example,
                           const AttackConfig& cfg) {
  cfg.validate();
  const int k_classes = model.output_width();
  if (k_classes < 2)
    fail(ErrorKind::Attack, "deepfool needs at least two classes");

  const Tensor& x0 = example.pixels;
  Tensor accum(x0.dims());  // un-overshot perturbation sum
  int used = 0;

  auto current_input = [&]() {
    Tensor x = x0;
    x.add_scaled(accum, 1.0 + cfg.overshoot);
    x.clamp(0.0, 1.0);
    return x;
  };

  for (int it = 0; it < cfg.iterations; ++it) {
    Tensor x = current_input();
    auto trace = model.forward_trace(x);
    const Tensor& logits = trace.back();
    int cur = argmax_lowest(logits);
    if (cur != example.label) break;  // label flipped (or was never correct)

    double best_ratio = 0.0;
    int best_k = -1;
    Tensor best_w;
    for (int k = 0; k < k_classes; ++k) {
      if (k == cur) continue;
      Tensor w = model.logit_diff_input_gradient(trace, k, cur);
      if (!w.all_finite())
        fail(ErrorKind::Attack, "non-finite gradient for " + example.id);
      double w_l1 = 0.0;
      for (std::int64_t i = 0; i < w.size(); ++i) w_l1 += std::abs(w[i]);
      if (w_l1 <= 0.0) continue;
      double ratio = std::abs(logits[k] - logits[cur]) / w_l1;
      if (best_k < 0 || ratio < best_ratio) {
        best_ratio = ratio;
        best_k = k;
        best_w = std::move(w);
      }
    }
    if (best_k < 0)
      fail(ErrorKind::Attack, "flat logits for " + example.id);

    double magnitude = best_ratio;  // |f'_{k*}| / ||w_{k*}||_1
    double moved = 0.0;
    for (std::int64_t i = 0; i < accum.size(); ++i) {
      double d = magnitude * sign0(best_w[i]);
      accum[i] += d;
      moved = std::max(moved, std::abs(d));
    }
    ++used;
    if (moved == 0.0) break;  // sitting exactly on the boundary
  }
  return finish_record(model, example, current_input(), cfg, used);
}

AdversarialRecord run_attack(const ModelSnapshot& model,
                             const ImageExample& example,
                             const AttackConfig& cfg) {
  switch (cfg.kind) {
    case AttackKind::FGSM: return fgsm(model, example, cfg);
    case AttackKind::BIM: return bim(model, example, cfg);
    case AttackKind::DEEPFOOL: return deepfool(model, example, cfg);
  }
  fail(ErrorKind::Validation, "unknown attack kind");
}

std::vector<AdversarialRecord> attack_dataset(
    const ModelSnapshot& model, const std::vector<ImageExample>& examples,
    const AttackConfig& cfg, int jobs, AttackBatchSummary* summary) {
  cfg.validate();
  std::vector<std::optional<AdversarialRecord>> slots(examples.size());
  std::vector<std::pair<int, std::string>> errors;
  std::mutex error_mutex;
  parallel_for(static_cast<int>(examples.size()), jobs, [&](int i) {
    try {
      slots[static_cast<std::size_t>(i)] =
          run_attack(model, examples[static_cast<std::size_t>(i)], cfg);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::Attack) throw;
      std::lock_guard<std::mutex> lock(error_mutex);
      errors.emplace_back(i, examples[static_cast<std::size_t>(i)].id + ": " +
                                 e.what());
    }
  });

  AttackBatchSummary local;
  local.n_inputs = static_cast<int>(examples.size());
  std::vector<AdversarialRecord> records;
  for (auto& s : slots) {
    if (!s) continue;
    local.n_success += s->success ? 1 : 0;
    records.push_back(std::move(*s));
  }
  std::sort(errors.begin(), errors.end());
  for (auto& [i, msg] : errors) local.errors.push_back(msg);
  local.n_errors = static_cast<int>(errors.size());
  if (summary) *summary = local;
  return records;
}

// ---------------------------------------------------------------- persistence

void write_attack_batch(const fs::path& dir,
                        const std::vector<AdversarialRecord>& records,
                        const AttackBatchSummary& summary,
                        const std::string& model_id) {
  fs::create_directories(dir);
  nlohmann::json j;
  j["model_id"] = model_id;
  if (!records.empty()) {
    const AttackConfig& cfg = records.front().attack;
    j["attack"] = {{"name", cfg.label()},
                   {"epsilon", cfg.epsilon},
                   {"iterations", cfg.iterations},
                   {"step_size", cfg.step_size},
                   {"overshoot", cfg.overshoot}};
  }
  j["summary"] = {{"n_inputs", summary.n_inputs},
                  {"n_success", summary.n_success},
                  {"n_errors", summary.n_errors},
                  {"errors", summary.errors},
                  {"success_rate", summary.success_rate()}};
  nlohmann::json items = nlohmann::json::array();
  for (std::size_t i = 0; i < records.size(); ++i) {
    const AdversarialRecord& r = records[i];
    char fname[32];
    std::snprintf(fname, sizeof(fname), "adv_%05zu.afgt", i);
    write_tensor_file(dir / fname, r.adversarial);
    items.push_back({{"file", fname},
                     {"source_id", r.original.id},
                     {"true_label", r.true_label},
                     {"adv_label", r.adv_label},
                     {"confidence", r.confidence},
                     {"success", r.success},
                     {"iterations_used", r.iterations_used}});
  }
  j["records"] = items;
  j["count"] = records.size();
  write_text_file(dir / "attacks.json", j.dump(2) + "\n");
}

std::vector<AdversarialRecord> read_attack_batch(
    const fs::path& dir, const std::vector<ImageExample>& source,
    std::string* model_id) {
  fs::path manifest = dir / "attacks.json";
  if (!fs::exists(manifest))
    fail(ErrorKind::Dependency, "missing attack manifest " + manifest.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(manifest));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Format, "bad attack manifest: " + std::string(e.what()));
  }
  if (model_id) *model_id = j.value("model_id", "");
  std::unordered_map<std::string, const ImageExample*> by_id;
  for (const auto& ex : source) by_id[ex.id] = &ex;

  AttackConfig cfg;
  if (j.contains("attack")) {
    cfg.kind = attack_from_name(j["attack"].at("name").get<std::string>());
    cfg.epsilon = j["attack"].value("epsilon", 0.0);
    cfg.iterations = j["attack"].value("iterations", 1);
    cfg.step_size = j["attack"].value("step_size", 0.0);
    cfg.overshoot = j["attack"].value("overshoot", 0.0);
  }

  if (j.at("records").size() != j.at("count").get<std::size_t>())
    fail(ErrorKind::Integrity, "attack manifest count mismatch");

  std::vector<AdversarialRecord> out;
  for (const auto& item : j.at("records")) {
    AdversarialRecord r;
    std::string sid = item.at("source_id").get<std::string>();
    auto it = by_id.find(sid);
    if (it == by_id.end())
      fail(ErrorKind::Integrity,
           "attack record references unknown image " + sid);
    r.original = *it->second;
    r.adversarial =
        read_tensor_file(dir / item.at("file").get<std::string>());
    r.perturbation = r.adversarial;
    r.perturbation.add_scaled(r.original.pixels, -1.0);
    r.true_label = item.at("true_label").get<int>();
    r.adv_label = item.at("adv_label").get<int>();
    r.confidence = item.at("confidence").get<double>();
    r.success = item.at("success").get<bool>();
    r.iterations_used = item.value("iterations_used", 0);
    r.attack = cfg;
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace afg
