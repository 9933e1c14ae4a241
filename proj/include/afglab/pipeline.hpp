#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "afglab/afg.hpp"
#include "afglab/attacks.hpp"
#include "afglab/dataset.hpp"
#include "afglab/evaluation.hpp"
#include "afglab/recognizer.hpp"

namespace afg {

// Declarative configuration for the whole pipeline. Defaults follow the
// published attack/training settings (epsilon 0.005, BIM 100 iterations,
// DeepFool 80 iterations, SGD lr 0.001) everywhere the source experiment
// pinned one.
struct PipelineConfig {
  // dataset
  std::string dataset_root = "dataset";
  double train_ratio = 0.75;
  std::uint64_t data_seed = 1;
  int select_k = 0;  // 0 = keep every class
  std::uint64_t select_seed = 1;
  bool synth = false;
  int synth_classes = 10;
  int synth_per_class = 150;
  int synth_size = 32;
  int synth_channels = 3;
  std::uint64_t synth_seed = 7;
  double synth_noise = 0.12;

  // first model
  std::string arch =
      "input 32x32x3; conv 3->12 k3 s1 p1; relu; pool 2; "
      "conv 12->24 k3 s1 p1; relu; pool 2; conv 24->32 k3 s1 p1; relu; "
      "pool 2; conv 32->48 k3 s1 p1; relu; flatten; dense 768->64; relu; "
      "dense 64->10";
  double lr = 0.001;
  double momentum = 0.9;
  int epochs = 30;
  int batch_size = 32;
  std::uint64_t model_seed = 1;

  // attacks
  std::vector<std::string> attacks = {"fgsm", "bim", "deepfool"};
  double fgsm_epsilon = 0.005;
  double bim_epsilon = 0.005;
  int bim_iterations = 100;
  double bim_step = 0.0;  // 0 = epsilon/10
  int deepfool_iterations = 80;
  double deepfool_overshoot = 0.02;
  int attack_max_images = 0;  // 0 = every test image

  // groupviz
  int groups = 4;
  int nmf_iters = 200;
  double nmf_tol = 1e-5;
  int ascent_steps = 256;
  double ascent_step_size = 0.05;
  int ascent_jitter = 0;
  std::uint64_t viz_seed = 5;

  // afg
  std::string policy = "ALL";
  double tau = 0.5;
  int afg_max_per_source = 0;  // 0 = no cap
  double afg_train_ratio = 0.75;
  std::uint64_t afg_split_seed = 11;

  // recognizer
  std::string backend = "deep-cnn";
  double rec_lr = 0.001;
  double rec_momentum = 0.9;
  int rec_epochs = 30;
  int rec_batch_size = 32;
  std::uint64_t rec_seed = 2;
  std::string decode = "split";

  // execution
  std::string output_root = "out";
  int jobs = 1;

  void validate() const;
  // Hash over semantically meaningful fields only (output_root and jobs are
  // excluded).
  std::string config_hash() const;
  std::string to_json() const;

  std::filesystem::path out() const { return output_root; }
  AttackConfig attack_config(const std::string& name) const;
};

// Applies one global seed to every per-stage seed via fixed derivation.
void apply_seed_override(PipelineConfig& config, std::uint64_t seed);

// Deterministic grouping split of AFG samples by source image, so a clean
// sample and its adversarial siblings land on the same side.
void split_samples(const std::vector<AfgSample>& all, double train_ratio,
                   std::uint64_t seed, std::vector<AfgSample>* train,
                   std::vector<AfgSample>* test);

struct RunManifest {
  std::string command;
  std::string config_hash;
  std::map<std::string, std::string> inputs;   // path -> sha256
  std::map<std::string, std::string> outputs;  // path -> sha256
};
void write_run_manifest(const PipelineConfig& config, const RunManifest& m);

// ---- pipeline commands (CLI wrappers call these) ----

void cmd_synth(const PipelineConfig& config);
void cmd_train_first(const PipelineConfig& config);
void cmd_attack(const PipelineConfig& config,
                const std::vector<std::string>& only = {});
void cmd_afs(const PipelineConfig& config, const std::string& attack);
void cmd_groupviz(const PipelineConfig& config, const std::string& image_id);
void cmd_build_afg(const PipelineConfig& config,
                   const std::vector<std::string>& only = {});
void cmd_train_recognizer(const PipelineConfig& config,
                          const std::string& head,
                          const std::string& attack);
void cmd_evaluate(const PipelineConfig& config,
                  const std::vector<std::string>& suites);
void cmd_report(const std::filesystem::path& reports_json,
                const std::filesystem::path& out_txt);

// Shared artifact access with dependency errors when a stage is missing.
DatasetSplit pipeline_dataset(const PipelineConfig& config);
ModelSnapshot pipeline_model(const PipelineConfig& config);
std::vector<AdversarialRecord> pipeline_attack_records(
    const PipelineConfig& config, const std::string& attack,
    const DatasetSplit& split);
std::vector<AfgSample> pipeline_afg_dataset(const PipelineConfig& config,
                                            const std::string& source);

}  // namespace afg
