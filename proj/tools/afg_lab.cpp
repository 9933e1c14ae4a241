// afg-lab: pipeline driver. Subcommands mirror the pipeline stages:
// synth, train-first, attack, afs, groupviz, build-afg, train-recognizer,
// evaluate, report.

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>

#include "afglab/error.hpp"
#include "afglab/pipeline.hpp"

namespace {

struct GlobalArgs {
  afg::PipelineConfig config;
  std::uint64_t seed_override = 0;
  bool has_seed_override = false;
};

void add_config_options(CLI::App* cmd, GlobalArgs& g) {
  auto& c = g.config;
  cmd->set_config("--config", "", "Pipeline config file (INI/TOML sections)");

  cmd->add_option("--dataset.root", c.dataset_root, "dataset directory");
  cmd->add_option("--dataset.train-ratio", c.train_ratio);
  cmd->add_option("--dataset.seed", c.data_seed);
  cmd->add_option("--dataset.select-k", c.select_k);
  cmd->add_option("--dataset.select-seed", c.select_seed);
  cmd->add_flag("--dataset.synth", c.synth, "dataset is synthesized");
  cmd->add_option("--dataset.synth-classes", c.synth_classes);
  cmd->add_option("--dataset.synth-per-class", c.synth_per_class);
  cmd->add_option("--dataset.synth-size", c.synth_size);
  cmd->add_option("--dataset.synth-channels", c.synth_channels);
  cmd->add_option("--dataset.synth-seed", c.synth_seed);
  cmd->add_option("--dataset.synth-noise", c.synth_noise);

  cmd->add_option("--model.arch", c.arch, "architecture text");
  cmd->add_option("--model.lr", c.lr);
  cmd->add_option("--model.momentum", c.momentum);
  cmd->add_option("--model.epochs", c.epochs);
  cmd->add_option("--model.batch-size", c.batch_size);
  cmd->add_option("--model.seed", c.model_seed);

  cmd->add_option("--attack.attacks", c.attacks, "attacks to run");
  cmd->add_option("--attack.fgsm-epsilon", c.fgsm_epsilon);
  cmd->add_option("--attack.bim-epsilon", c.bim_epsilon);
  cmd->add_option("--attack.bim-iterations", c.bim_iterations);
  cmd->add_option("--attack.bim-step", c.bim_step);
  cmd->add_option("--attack.deepfool-iterations", c.deepfool_iterations);
  cmd->add_option("--attack.deepfool-overshoot", c.deepfool_overshoot);
  cmd->add_option("--attack.max-images", c.attack_max_images);

  cmd->add_option("--groupviz.groups", c.groups);
  cmd->add_option("--groupviz.nmf-iters", c.nmf_iters);
  cmd->add_option("--groupviz.nmf-tol", c.nmf_tol);
  cmd->add_option("--groupviz.ascent-steps", c.ascent_steps);
  cmd->add_option("--groupviz.ascent-step-size", c.ascent_step_size);
  cmd->add_option("--groupviz.ascent-jitter", c.ascent_jitter);
  cmd->add_option("--groupviz.seed", c.viz_seed);

  cmd->add_option("--afg.policy", c.policy);
  cmd->add_option("--afg.tau", c.tau);
  cmd->add_option("--afg.max-per-source", c.afg_max_per_source);
  cmd->add_option("--afg.train-ratio", c.afg_train_ratio);
  cmd->add_option("--afg.split-seed", c.afg_split_seed);

  cmd->add_option("--recognizer.backend", c.backend);
  cmd->add_option("--recognizer.lr", c.rec_lr);
  cmd->add_option("--recognizer.momentum", c.rec_momentum);
  cmd->add_option("--recognizer.epochs", c.rec_epochs);
  cmd->add_option("--recognizer.batch-size", c.rec_batch_size);
  cmd->add_option("--recognizer.seed", c.rec_seed);
  cmd->add_option("--recognizer.decode", c.decode);

  cmd->add_option("--output.root", c.output_root, "output root")
      ->envname("AFGLAB_OUTPUT_ROOT");
  cmd->add_option("--jobs", c.jobs, "worker threads for per-image stages");
  cmd->add_option("--seed", g.seed_override, "override every stage seed")
      ->each([&g](const std::string&) { g.has_seed_override = true; });
}

void finalize(GlobalArgs& g) {
  if (g.has_seed_override) afg::apply_seed_override(g.config, g.seed_override);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adversarial feature-genome pipeline"};
  app.require_subcommand(1);

  GlobalArgs synth_args, train_args, attack_args, afs_args, viz_args,
      build_args, rec_args, eval_args;
  std::vector<std::string> attack_only, build_only, eval_suites;
  std::string afs_attack = "fgsm";
  std::string viz_image;
  std::string rec_head = "multilabel", rec_attack = "fgsm";
  std::string report_in, report_out = "tables.txt";

  auto* synth = app.add_subcommand("synth", "generate the synthetic dataset");
  add_config_options(synth, synth_args);

  auto* train = app.add_subcommand("train-first", "train the first classifier");
  add_config_options(train, train_args);

  auto* attack = app.add_subcommand("attack", "generate adversarial examples");
  add_config_options(attack, attack_args);
  attack->add_option("--only", attack_only, "subset of attacks to run");

  auto* afs = app.add_subcommand("afs", "feature-separability curves");
  add_config_options(afs, afs_args);
  afs->add_option("--attack", afs_attack, "attack batch to analyse");

  auto* viz = app.add_subcommand("groupviz", "group features for one image");
  add_config_options(viz, viz_args);
  viz->add_option("--image", viz_image, "image id (class/file)")->required();

  auto* build = app.add_subcommand("build-afg", "assemble AFG datasets");
  add_config_options(build, build_args);
  build->add_option("--only", build_only, "subset of sources to build");

  auto* rec = app.add_subcommand("train-recognizer", "train the second model");
  add_config_options(rec, rec_args);
  rec->add_option("--head", rec_head, "multilabel|binary|single-class");
  rec->add_option("--attack", rec_attack, "attack AFG set to train against");

  auto* eval = app.add_subcommand("evaluate", "run the metric suites");
  add_config_options(eval, eval_args);
  eval->add_option("--suite", eval_suites,
                   "detection|clean|iou|cross-attack|ablation|backend");

  auto* report = app.add_subcommand("report", "render report tables");
  report->add_option("--reports", report_in, "reports.json path")->required();
  report->add_option("--out", report_out, "output text file");

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) {
      finalize(synth_args);
      afg::cmd_synth(synth_args.config);
    } else if (train->parsed()) {
      finalize(train_args);
      afg::cmd_train_first(train_args.config);
    } else if (attack->parsed()) {
      finalize(attack_args);
      afg::cmd_attack(attack_args.config, attack_only);
    } else if (afs->parsed()) {
      finalize(afs_args);
      afg::cmd_afs(afs_args.config, afs_attack);
    } else if (viz->parsed()) {
      finalize(viz_args);
      afg::cmd_groupviz(viz_args.config, viz_image);
    } else if (build->parsed()) {
      finalize(build_args);
      afg::cmd_build_afg(build_args.config, build_only);
    } else if (rec->parsed()) {
      finalize(rec_args);
      afg::cmd_train_recognizer(rec_args.config, rec_head, rec_attack);
    } else if (eval->parsed()) {
      finalize(eval_args);
      afg::cmd_evaluate(eval_args.config, eval_suites);
    } else if (report->parsed()) {
      afg::cmd_report(report_in, report_out);
    }
  } catch (const afg::Error& e) {
    std::cerr << "afg-lab: " << e.what() << "\n";
    switch (e.kind()) {
      case afg::ErrorKind::Validation:
      case afg::ErrorKind::Configuration:
      case afg::ErrorKind::Input: return 2;
      case afg::ErrorKind::Dependency: return 3;
      default: return 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "afg-lab: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
