#include "afglab/evaluation.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "afglab/error.hpp"
#include "afglab/serial.hpp"

namespace afg {

std::string eval_fingerprint(const EvalContext& ctx,
                             const std::string& metric) {
  nlohmann::json j = {{"metric", metric},
                      {"model_id", ctx.model_id},
                      {"recognizer_id", ctx.recognizer_id},
                      {"attack", ctx.attack},
                      {"policy", ctx.policy},
                      {"backend", ctx.backend},
                      {"seed", ctx.seed},
                      {"decode", ctx.decode}};
  std::string s = j.dump();
  return sha256_hex(s.data(), s.size()).substr(0, 16);
}

DecodeMode decode_mode_from_name(const std::string& name) {
  if (name == "split" || name == "split-part") return DecodeMode::SplitPart;
  if (name == "top2") return DecodeMode::Top2;
  fail(ErrorKind::Validation, "unknown decode mode '" + name + "'");
}

const char* decode_mode_name(DecodeMode m) {
  return m == DecodeMode::SplitPart ? "split" : "top2";
}

double iou_score(const std::vector<int>& pred, const std::vector<int>& truth) {
  if (pred.empty() || truth.empty())
    fail(ErrorKind::Validation, "iou_score needs non-empty label sets");
  std::set<int> a(pred.begin(), pred.end());
  std::set<int> b(truth.begin(), truth.end());
  std::size_t inter = 0;
  for (int v : a) inter += b.count(v);
  std::size_t uni = a.size() + b.size() - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

std::vector<int> truth_label_set(const AfgSample& sample) {
  std::vector<int> s{sample.label.original};
  if (sample.label.adversarial)
    s.push_back(sample.label.k_orig + *sample.label.adversarial);
  return s;
}

std::vector<int> predicted_label_set(const RecognitionResult& result,
                                     int k_orig, DecodeMode mode) {
  if (mode == DecodeMode::SplitPart) {
    std::vector<int> s{result.original};
    if (result.adversarial) s.push_back(k_orig + *result.adversarial);
    return s;
  }
  // top2: the two highest-confidence positions over the whole vector
  if (result.scores.size() < 2)
    fail(ErrorKind::Validation, "top2 decoding needs at least two scores");
  int first = 0;
  for (std::size_t i = 1; i < result.scores.size(); ++i)
    if (result.scores[i] > result.scores[static_cast<std::size_t>(first)])
      first = static_cast<int>(i);
  int second = first == 0 ? 1 : 0;
  for (std::size_t i = 0; i < result.scores.size(); ++i) {
    if (static_cast<int>(i) == first) continue;
    if (result.scores[i] > result.scores[static_cast<std::size_t>(second)])
      second = static_cast<int>(i);
  }
  return {first, second};
}

namespace {

EvalReport make_report(const std::string& metric, double value, int n,
                       const EvalContext& ctx, const std::string& detail) {
  if (n <= 0) fail(ErrorKind::Validation, metric + ": empty evaluation set");
  if (!(value >= 0.0 && value <= 1.0))
    fail(ErrorKind::Validation, metric + ": value out of [0,1]");
  EvalReport r;
  r.metric_name = metric;
  r.value = value;
  r.n = n;
  r.config_fingerprint = eval_fingerprint(ctx, metric);
  r.detail = detail;
  return r;
}

bool is_clean_provenance(const AfgSample& s) {
  return s.provenance.attack == "clean";
}

double mean_iou(const RecognizerLike& recognizer,
                const std::vector<AfgSample>& dataset, DecodeMode mode,
                const std::function<bool(const AfgSample&)>& keep, int* n_out) {
  double sum = 0.0;
  int n = 0;
  for (const AfgSample& s : dataset) {
    if (keep && !keep(s)) continue;
    RecognitionResult res = recognizer.recognize(s);
    sum += iou_score(predicted_label_set(res, s.label.k_orig, mode),
                     truth_label_set(s));
    ++n;
  }
  *n_out = n;
  return n > 0 ? sum / n : 0.0;
}

}  // namespace

EvalReport detection_accuracy(const RecognizerLike& recognizer,
                              const std::vector<AfgSample>& dataset,
                              const EvalContext& ctx) {
  bool has_clean = false, has_adv = false;
  for (const AfgSample& s : dataset) {
    (is_clean_provenance(s) ? has_clean : has_adv) = true;
  }
  if (!has_clean || !has_adv)
    fail(ErrorKind::Validation,
         "detection accuracy needs both clean and adversarial samples");
  int correct = 0;
  for (const AfgSample& s : dataset) {
    RecognitionResult res = recognizer.recognize(s);
    if (res.is_adversarial == !is_clean_provenance(s)) ++correct;
  }
  return make_report("detection_accuracy",
                     static_cast<double>(correct) / dataset.size(),
                     static_cast<int>(dataset.size()), ctx,
                     "attack=" + ctx.attack);
}

EvalReport clean_afg_accuracy(const RecognizerLike& recognizer,
                              const std::vector<AfgSample>& clean_dataset,
                              const EvalContext& ctx) {
  if (clean_dataset.empty())
    fail(ErrorKind::Validation, "clean AFG set is empty");
  for (const AfgSample& s : clean_dataset)
    if (!is_clean_provenance(s))
      fail(ErrorKind::Validation,
           "clean_afg_accuracy expects clean samples only, found " +
               s.provenance.attack);
  int correct = 0;
  for (const AfgSample& s : clean_dataset) {
    RecognitionResult res = recognizer.recognize(s);
    if (res.original == s.label.original) ++correct;
  }
  return make_report("clean_afg_accuracy",
                     static_cast<double>(correct) / clean_dataset.size(),
                     static_cast<int>(clean_dataset.size()), ctx, "");
}

EvalReport recognition_iou(const RecognizerLike& recognizer,
                           const std::vector<AfgSample>& dataset,
                           const EvalContext& ctx, DecodeMode mode) {
  if (dataset.empty())
    fail(ErrorKind::Validation, "recognition set is empty");
  int n = 0;
  double v = mean_iou(recognizer, dataset, mode, nullptr, &n);
  EvalContext c = ctx;
  c.decode = decode_mode_name(mode);
  return make_report("recognition_iou", v, n, c,
                     "decode=" + std::string(decode_mode_name(mode)));
}

CrossAttackMatrix cross_attack_matrix(
    const std::map<std::string, const RecognizerLike*>& by_train_attack,
    const std::map<std::string, const std::vector<AfgSample>*>& by_eval_attack,
    const EvalContext& ctx, DecodeMode mode) {
  if (by_train_attack.size() < 2)
    fail(ErrorKind::Validation,
         "cross-attack matrix needs at least two attacks");
  CrossAttackMatrix m;
  for (const auto& [name, _] : by_train_attack) m.attacks.push_back(name);
  for (const auto& [train_name, rec] : by_train_attack) {
    for (const std::string& eval_name : m.attacks) {
      auto it = by_eval_attack.find(eval_name);
      if (it == by_eval_attack.end() || !it->second || it->second->empty()) {
        m.cells[{train_name, eval_name}] = std::nullopt;  // absent, not zero
        continue;
      }
      EvalContext c = ctx;
      c.attack = "train=" + train_name + ",eval=" + eval_name;
      m.cells[{train_name, eval_name}] =
          recognition_iou(*rec, *it->second, c, mode);
    }
  }
  return m;
}

EvalReport cross_model_transfer(const RecognizerSnapshot& recognizer,
                                const std::vector<AfgSample>& dataset,
                                const EvalContext& ctx, DecodeMode mode) {
  if (dataset.empty())
    fail(ErrorKind::Validation, "transfer set is empty");
  Shape3 in = recognizer.net.input_shape();
  const Tensor& t0 = dataset.front().tensor;
  if (t0.dim(0) != in.h || t0.dim(1) != in.w || t0.dim(2) != in.c)
    fail(ErrorKind::Configuration,
         "AFG geometry mismatch: recognizer expects " + in.str() +
             ", dataset provides " + t0.shape_str() +
             " (align channel policies first)");
  SnapshotRecognizer wrap(recognizer);
  EvalContext c = ctx;
  auto rep = recognition_iou(wrap, dataset, c, mode);
  rep.metric_name = "cross_model_transfer_iou";
  rep.config_fingerprint = eval_fingerprint(c, rep.metric_name);
  return rep;
}

std::vector<AblationRow> channel_ablation(
    const std::vector<AfgSample>& train, const std::vector<AfgSample>& test,
    const std::vector<ChannelPolicy>& policies,
    const RecognizerProvider& provider, const EvalContext& ctx,
    DecodeMode mode) {
  if (policies.empty())
    fail(ErrorKind::Validation, "no channel policies requested");
  std::vector<AblationRow> rows;
  for (const ChannelPolicy& policy : policies) {
    std::vector<AfgSample> ptrain, ptest;
    for (const AfgSample& s : train)
      ptrain.push_back(select_channels(s, policy));
    for (const AfgSample& s : test) ptest.push_back(select_channels(s, policy));
    auto rec = provider(ptrain, policy.name());

    EvalContext c = ctx;
    c.policy = policy.name();
    AblationRow row;
    row.policy = policy.name();
    int n = 0;
    double v = mean_iou(*rec, ptest, mode, nullptr, &n);
    row.all = make_report("ablation_iou_all", v, n, c, "policy=" + row.policy);
    v = mean_iou(*rec, ptest, mode, is_clean_provenance, &n);
    row.clean_only =
        make_report("ablation_iou_clean_only", v, n, c, "policy=" + row.policy);
    v = mean_iou(
        *rec, ptest, mode,
        [](const AfgSample& s) { return !is_clean_provenance(s); }, &n);
    row.adversarial_only = make_report("ablation_iou_adversarial_only", v, n, c,
                                       "policy=" + row.policy);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<BackendRow> backend_comparison(
    const std::vector<AfgSample>& train, const std::vector<AfgSample>& test,
    const std::vector<Backend>& backends, const RecognizerProvider& provider,
    const EvalContext& ctx, DecodeMode mode) {
  if (backends.empty())
    fail(ErrorKind::Validation, "no backends requested");
  std::vector<BackendRow> rows;
  for (Backend b : backends) {
    auto rec = provider(train, backend_name(b));
    EvalContext c = ctx;
    c.backend = backend_name(b);
    BackendRow row;
    row.backend = backend_name(b);
    row.iou = recognition_iou(*rec, test, c, mode);
    row.iou.metric_name = "backend_iou";
    row.iou.config_fingerprint = eval_fingerprint(c, row.iou.metric_name);
    row.iou.detail = "backend=" + row.backend;
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_reports_json(const std::vector<EvalReport>& reports,
                        const std::filesystem::path& path) {
  nlohmann::json arr = nlohmann::json::array();
  for (const EvalReport& r : reports)
    arr.push_back({{"metric", r.metric_name},
                   {"value", r.value},
                   {"n", r.n},
                   {"fingerprint", r.config_fingerprint},
                   {"detail", r.detail}});
  write_text_file(path, arr.dump(2) + "\n");
}

std::vector<EvalReport> read_reports_json(const std::filesystem::path& path) {
  nlohmann::json arr;
  try {
    arr = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Format, "bad report json: " + std::string(e.what()));
  }
  std::vector<EvalReport> out;
  for (const auto& j : arr) {
    EvalReport r;
    try {
      r.metric_name = j.at("metric").get<std::string>();
      r.value = j.at("value").get<double>();
      r.n = j.at("n").get<int>();
      r.config_fingerprint = j.at("fingerprint").get<std::string>();
      r.detail = j.value("detail", "");
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::Format, "bad report entry: " + std::string(e.what()));
    }
    out.push_back(std::move(r));
  }
  return out;
}

void write_reports_csv(const std::vector<EvalReport>& reports,
                       const std::filesystem::path& path) {
  std::ostringstream os;
  os << "metric,value,n,fingerprint,detail\n";
  os.precision(17);
  for (const EvalReport& r : reports)
    os << r.metric_name << "," << r.value << "," << r.n << ","
       << r.config_fingerprint << "," << r.detail << "\n";
  write_text_file(path, os.str());
}

double spearman_rank_correlation(const std::vector<double>& x,
                                 const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2)
    fail(ErrorKind::Input, "rank correlation needs two equal-length series");
  auto ranks = [](const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    std::size_t i = 0;
    while (i < idx.size()) {
      std::size_t j = i;
      while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
      double mean_rank = 0.5 * (i + j) + 1.0;
      for (std::size_t k = i; k <= j; ++k) r[idx[k]] = mean_rank;
      i = j + 1;
    }
    return r;
  };
  auto rx = ranks(x), ry = ranks(y);
  double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / rx.size();
  double my = std::accumulate(ry.begin(), ry.end(), 0.0) / ry.size();
  double num = 0.0, dx = 0.0, dy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    num += (rx[i] - mx) * (ry[i] - my);
    dx += (rx[i] - mx) * (rx[i] - mx);
    dy += (ry[i] - my) * (ry[i] - my);
  }
  if (dx == 0.0 || dy == 0.0) return 0.0;
  return num / std::sqrt(dx * dy);
}

}  // namespace afg
