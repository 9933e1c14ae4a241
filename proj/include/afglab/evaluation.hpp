#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "afglab/afg.hpp"
#include "afglab/recognizer.hpp"

namespace afg {

struct EvalReport {
  std::string metric_name;
  double value = 0.0;
  int n = 0;
  std::string config_fingerprint;
  std::string detail;
};

// Context hashed into every report so equal-config reruns are comparable.
struct EvalContext {
  std::string model_id;
  std::string recognizer_id;
  std::string attack;
  std::string policy = "ALL";
  std::string backend;
  std::uint64_t seed = 0;
  std::string decode = "split";
};
std::string eval_fingerprint(const EvalContext& ctx,
                             const std::string& metric);

enum class DecodeMode { SplitPart, Top2 };
DecodeMode decode_mode_from_name(const std::string& name);
const char* decode_mode_name(DecodeMode m);

// |a ∩ b| / |a ∪ b| over label-position sets (duplicates ignored).
double iou_score(const std::vector<int>& pred, const std::vector<int>& truth);

// Truth/prediction sets over concatenated label positions: original classes
// at [0,k_orig), adversarial classes at [k_orig, k_orig+k_adv).
std::vector<int> truth_label_set(const AfgSample& sample);
std::vector<int> predicted_label_set(const RecognitionResult& result,
                                     int k_orig, DecodeMode mode);

EvalReport detection_accuracy(const RecognizerLike& recognizer,
                              const std::vector<AfgSample>& dataset,
                              const EvalContext& ctx);

EvalReport clean_afg_accuracy(const RecognizerLike& recognizer,
                              const std::vector<AfgSample>& clean_dataset,
                              const EvalContext& ctx);

EvalReport recognition_iou(const RecognizerLike& recognizer,
                           const std::vector<AfgSample>& dataset,
                           const EvalContext& ctx,
                           DecodeMode mode = DecodeMode::SplitPart);

struct CrossAttackMatrix {
  std::vector<std::string> attacks;  // row = training attack, col = eval
  std::map<std::pair<std::string, std::string>, std::optional<EvalReport>>
      cells;
};

CrossAttackMatrix cross_attack_matrix(
    const std::map<std::string, const RecognizerLike*>& by_train_attack,
    const std::map<std::string, const std::vector<AfgSample>*>& by_eval_attack,
    const EvalContext& ctx, DecodeMode mode = DecodeMode::SplitPart);

// Applies a recognizer trained against one first-model to AFGs from another;
// fails with a configuration error when the tensor geometry differs.
EvalReport cross_model_transfer(const RecognizerSnapshot& recognizer,
                                const std::vector<AfgSample>& dataset,
                                const EvalContext& ctx,
                                DecodeMode mode = DecodeMode::SplitPart);

using RecognizerProvider = std::function<std::unique_ptr<RecognizerLike>(
    const std::vector<AfgSample>& train, const std::string& variant)>;

struct AblationRow {
  std::string policy;
  EvalReport all;
  EvalReport clean_only;
  EvalReport adversarial_only;
};

// Retrains per policy via the provider; the three columns are IoU restricted
// to the full / clean-only / adversarial-only test subsets.
std::vector<AblationRow> channel_ablation(
    const std::vector<AfgSample>& train, const std::vector<AfgSample>& test,
    const std::vector<ChannelPolicy>& policies,
    const RecognizerProvider& provider, const EvalContext& ctx,
    DecodeMode mode = DecodeMode::SplitPart);

struct BackendRow {
  std::string backend;
  EvalReport iou;
};

std::vector<BackendRow> backend_comparison(
    const std::vector<AfgSample>& train, const std::vector<AfgSample>& test,
    const std::vector<Backend>& backends, const RecognizerProvider& provider,
    const EvalContext& ctx, DecodeMode mode = DecodeMode::SplitPart);

void write_reports_json(const std::vector<EvalReport>& reports,
                        const std::filesystem::path& path);
std::vector<EvalReport> read_reports_json(const std::filesystem::path& path);
void write_reports_csv(const std::vector<EvalReport>& reports,
                       const std::filesystem::path& path);

// Spearman rank correlation (average ranks on ties).
double spearman_rank_correlation(const std::vector<double>& x,
                                 const std::vector<double>& y);

}  // namespace afg
