#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "afglab/dataset.hpp"
#include "afglab/nn.hpp"

namespace afg {

enum class AttackKind { FGSM, BIM, DEEPFOOL };

const char* attack_name(AttackKind k);
AttackKind attack_from_name(const std::string& name);

struct AttackConfig {
  AttackKind kind = AttackKind::FGSM;
  double epsilon = 0.005;  // pixel-unit L-inf budget (FGSM/BIM)
  int iterations = 1;      // BIM default 100, DeepFool default 80
  double step_size = 0.0;  // BIM; 0 means epsilon/10
  double overshoot = 0.02; // DeepFool

  static AttackConfig fgsm_default(double eps = 0.005);
  static AttackConfig bim_default(double eps = 0.005);
  static AttackConfig deepfool_default();
  void validate() const;
  std::string label() const;  // "fgsm", "bim", "deepfool"
};

struct AdversarialRecord {
  ImageExample original;
  Tensor perturbation;  // adversarial - original
  Tensor adversarial;   // clipped to [0,1]
  int true_label = -1;
  int adv_label = -1;
  double confidence = 0.0;
  bool success = false;
  AttackConfig attack;
  int iterations_used = 0;
};

AdversarialRecord fgsm(const ModelSnapshot& model, const ImageExample& example,
                       const AttackConfig& cfg);
AdversarialRecord bim(const ModelSnapshot& model, const ImageExample& example,
                      const AttackConfig& cfg);
AdversarialRecord deepfool(const ModelSnapshot& model,
                           const ImageExample& example,
                           const AttackConfig& cfg);
AdversarialRecord run_attack(const ModelSnapshot& model,
                             const ImageExample& example,
                             const AttackConfig& cfg);

struct AttackBatchSummary {
  int n_inputs = 0;
  int n_success = 0;
  int n_errors = 0;
  std::vector<std::string> errors;  // "<image id>: <message>"
  double success_rate() const {
    int done = n_inputs - n_errors;
    return done > 0 ? static_cast<double>(n_success) / done : 0.0;
  }
};

// One record per input that attacked cleanly; per-image attack errors are
// collected in the summary instead of aborting the batch.
std::vector<AdversarialRecord> attack_dataset(
    const ModelSnapshot& model, const std::vector<ImageExample>& examples,
    const AttackConfig& cfg, int jobs = 1,
    AttackBatchSummary* summary = nullptr);

// attacks.json + one AFG1 tensor file per record (adversarial image).
void write_attack_batch(const std::filesystem::path& dir,
                        const std::vector<AdversarialRecord>& records,
                        const AttackBatchSummary& summary,
                        const std::string& model_id);
std::vector<AdversarialRecord> read_attack_batch(
    const std::filesystem::path& dir, const std::vector<ImageExample>& source,
    std::string* model_id = nullptr);

}  // namespace afg
