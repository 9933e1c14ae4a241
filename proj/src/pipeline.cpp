#include "afglab/pipeline.hpp"

#include <json.hpp>

#include <algorithm>
#include <unordered_map>

#include "afglab/error.hpp"
#include "afglab/parallel.hpp"
#include "afglab/plots.hpp"
#include "afglab/prng.hpp"
#include "afglab/serial.hpp"

namespace afg {

namespace fs = std::filesystem;

void PipelineConfig::validate() const {
  if (!(train_ratio > 0.0 && train_ratio < 1.0))
    fail(ErrorKind::Validation, "dataset.train_ratio must be in (0,1)");
  if (!(afg_train_ratio > 0.0 && afg_train_ratio < 1.0))
    fail(ErrorKind::Validation, "afg.train_ratio must be in (0,1)");
  if (epochs < 0 || rec_epochs < 0)
    fail(ErrorKind::Validation, "epochs must be >= 0");
  if (jobs < 1) fail(ErrorKind::Validation, "jobs must be >= 1");
  if (tau < 0.0 || tau > 1.0)
    fail(ErrorKind::Validation, "afg.tau must be in [0,1]");
  ArchSpec parsed = ArchSpec::parse(arch);
  int convs = 0;
  for (const auto& l : parsed.layers)
    if (l.kind == LayerKind::Conv) ++convs;
  if (convs < 3)
    fail(ErrorKind::Validation,
         "first-model architecture needs at least 3 conv layers, has " +
             std::to_string(convs));
  int side = static_cast<int>(
      std::lround(std::sqrt(static_cast<double>(groups))));
  if (side * side != groups)
    fail(ErrorKind::Validation,
         "groupviz.groups must be a perfect square, got " +
             std::to_string(groups));
  for (const std::string& a : attacks) attack_from_name(a);
  ChannelPolicy::parse(policy);
  backend_from_name(backend);
  decode_mode_from_name(decode);
}

AttackConfig PipelineConfig::attack_config(const std::string& name) const {
  AttackKind kind = attack_from_name(name);
  switch (kind) {
    case AttackKind::FGSM: return AttackConfig::fgsm_default(fgsm_epsilon);
    case AttackKind::BIM: {
      AttackConfig c = AttackConfig::bim_default(bim_epsilon);
      c.iterations = bim_iterations;
      c.step_size = bim_step;
      return c;
    }
    case AttackKind::DEEPFOOL: {
      AttackConfig c = AttackConfig::deepfool_default();
      c.iterations = deepfool_iterations;
      c.overshoot = deepfool_overshoot;
      return c;
    }
  }
  fail(ErrorKind::Validation, "unknown attack " + name);
}

std::string PipelineConfig::to_json() const {
  nlohmann::json j;
  j["dataset"] = {{"root", dataset_root},
                  {"train_ratio", train_ratio},
                  {"seed", data_seed},
                  {"select_k", select_k},
                  {"select_seed", select_seed},
                  {"synth", synth},
                  {"synth_classes", synth_classes},
                  {"synth_per_class", synth_per_class},
                  {"synth_size", synth_size},
                  {"synth_channels", synth_channels},
                  {"synth_seed", synth_seed},
                  {"synth_noise", synth_noise}};
  j["model"] = {{"arch", arch},
                {"lr", lr},
                {"momentum", momentum},
                {"epochs", epochs},
                {"batch_size", batch_size},
                {"seed", model_seed}};
  j["attack"] = {{"attacks", attacks},
                 {"fgsm_epsilon", fgsm_epsilon},
                 {"bim_epsilon", bim_epsilon},
                 {"bim_iterations", bim_iterations},
                 {"bim_step", bim_step},
                 {"deepfool_iterations", deepfool_iterations},
                 {"deepfool_overshoot", deepfool_overshoot},
                 {"max_images", attack_max_images}};
  j["groupviz"] = {{"groups", groups},
                   {"nmf_iters", nmf_iters},
                   {"nmf_tol", nmf_tol},
                   {"ascent_steps", ascent_steps},
                   {"ascent_step_size", ascent_step_size},
                   {"ascent_jitter", ascent_jitter},
                   {"seed", viz_seed}};
  j["afg"] = {{"policy", policy},
              {"tau", tau},
              {"max_per_source", afg_max_per_source},
              {"train_ratio", afg_train_ratio},
              {"split_seed", afg_split_seed}};
  j["recognizer"] = {{"backend", backend},
                     {"lr", rec_lr},
                     {"momentum", rec_momentum},
                     {"epochs", rec_epochs},
                     {"batch_size", rec_batch_size},
                     {"seed", rec_seed},
                     {"decode", decode}};
  return j.dump(2);
}

std::string PipelineConfig::config_hash() const {
  std::string s = to_json();
  return sha256_hex(s.data(), s.size()).substr(0, 16);
}

void apply_seed_override(PipelineConfig& config, std::uint64_t seed) {
  config.data_seed = SplitMix64::derive(seed, 1);
  config.select_seed = SplitMix64::derive(seed, 2);
  config.synth_seed = SplitMix64::derive(seed, 3);
  config.model_seed = SplitMix64::derive(seed, 4);
  config.viz_seed = SplitMix64::derive(seed, 5);
  config.rec_seed = SplitMix64::derive(seed, 6);
  config.afg_split_seed = SplitMix64::derive(seed, 7);
}

void split_samples(const std::vector<AfgSample>& all, double train_ratio,
                   std::uint64_t seed, std::vector<AfgSample>* train,
                   std::vector<AfgSample>* test) {
  std::vector<std::string> sources;
  std::unordered_map<std::string, int> seen;
  for (const AfgSample& s : all)
    if (seen.emplace(s.provenance.source_image_id, 1).second)
      sources.push_back(s.provenance.source_image_id);
  std::sort(sources.begin(), sources.end());
  SplitMix64 rng(seed);
  rng.shuffle(sources);
  std::size_t n_train = static_cast<std::size_t>(
      std::clamp<long>(std::lround(train_ratio * sources.size()), 1,
                       static_cast<long>(sources.size()) - 1));
  std::unordered_map<std::string, bool> in_train;
  for (std::size_t i = 0; i < sources.size(); ++i)
    in_train[sources[i]] = i < n_train;
  for (const AfgSample& s : all)
    (in_train[s.provenance.source_image_id] ? *train : *test).push_back(s);
}

void write_run_manifest(const PipelineConfig& config, const RunManifest& m) {
  nlohmann::json j;
  j["command"] = m.command;
  j["config_hash"] = m.config_hash;
  j["inputs"] = m.inputs;
  j["outputs"] = m.outputs;
  fs::path path = config.out() / "runs" / (m.command + ".json");
  write_text_file(path, j.dump(2) + "\n");
}

namespace {

std::string file_hash_or_die(const fs::path& p) { return sha256_hex_of_file(p); }

void hash_tree_into(std::map<std::string, std::string>& into,
                    const fs::path& root) {
  std::vector<fs::path> files;
  if (fs::is_regular_file(root)) files.push_back(root);
  else if (fs::is_directory(root))
    for (const auto& e : fs::recursive_directory_iterator(root))
      if (e.is_regular_file()) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  for (const fs::path& f : files) into[f.string()] = file_hash_or_die(f);
}

fs::path model_path(const PipelineConfig& c) {
  return c.out() / "model" / "first.afgm";
}
fs::path attack_dir(const PipelineConfig& c, const std::string& a) {
  return c.out() / "attacks" / a;
}
fs::path afg_dir(const PipelineConfig& c, const std::string& source) {
  return c.out() / "afg" / source;
}

std::vector<ImageExample> capped_test_images(const PipelineConfig& config,
                                             const DatasetSplit& split) {
  std::vector<ImageExample> images = split.test;
  if (config.attack_max_images > 0 &&
      static_cast<int>(images.size()) > config.attack_max_images)
    images.resize(static_cast<std::size_t>(config.attack_max_images));
  return images;
}

}  // namespace

DatasetSplit pipeline_dataset(const PipelineConfig& config) {
  fs::path root = config.dataset_root;
  if (config.synth && !fs::exists(root))
    fail(ErrorKind::Dependency,
         "dataset not synthesized yet; run the synth command first (missing " +
             root.string() + ")");
  IngestOptions opt{config.train_ratio, config.data_seed};
  DatasetSplit split = load_dataset(root, opt);
  if (config.select_k > 0 && config.select_k < split.class_count())
    split = select_classes(split, config.select_k, config.select_seed);
  return split;
}

ModelSnapshot pipeline_model(const PipelineConfig& config) {
  fs::path p = model_path(config);
  if (!fs::exists(p))
    fail(ErrorKind::Dependency,
         "missing first-model snapshot " + p.string() +
             "; run the train-first command");
  return ModelSnapshot::load(p);
}

std::vector<AdversarialRecord> pipeline_attack_records(
    const PipelineConfig& config, const std::string& attack,
    const DatasetSplit& split) {
  // records are matched back to their source images by id
  return read_attack_batch(attack_dir(config, attack), split.test);
}

std::vector<AfgSample> pipeline_afg_dataset(const PipelineConfig& config,
                                            const std::string& source) {
  return read_afg_dataset(afg_dir(config, source));
}

// ---------------------------------------------------------------- commands

void cmd_synth(const PipelineConfig& config) {
  config.validate();
  SynthOptions opt{config.synth_classes, config.synth_per_class,
                   config.synth_size,    config.synth_channels,
                   config.synth_seed,    config.synth_noise};
  synth_dataset(config.dataset_root, opt);
  RunManifest m;
  m.command = "synth";
  m.config_hash = config.config_hash();
  hash_tree_into(m.outputs, config.dataset_root);
  write_run_manifest(config, m);
}

void cmd_train_first(const PipelineConfig& config) {
  config.validate();
  DatasetSplit split = pipeline_dataset(config);
  ModelSnapshot model = ModelSnapshot::build(config.arch, config.model_seed);
  if (model.output_width() < split.class_count())
    fail(ErrorKind::Validation,
         "model outputs " + std::to_string(model.output_width()) +
             " classes but dataset has " +
             std::to_string(split.class_count()));

  std::vector<const Tensor*> inputs;
  std::vector<int> labels;
  for (const ImageExample& ex : split.train) {
    inputs.push_back(&ex.pixels);
    labels.push_back(ex.label);
  }
  TrainOptions opts{config.lr, config.momentum, config.epochs,
                    config.batch_size, config.model_seed, true};
  auto loss = [&](const Tensor& logits, int idx) {
    return softmax_cross_entropy(logits, labels[static_cast<std::size_t>(idx)]);
  };
  train_model(model, inputs, loss, opts);

  int correct = 0;
  for (const ImageExample& ex : split.test)
    if (model.predict(ex.pixels).cls == ex.label) ++correct;
  model.meta().final_test_accuracy =
      split.test.empty() ? -1.0
                         : static_cast<double>(correct) / split.test.size();
  model.meta().seed = config.model_seed;

  fs::path mp = model_path(config);
  model.save(mp);
  write_dataset_manifest(split, config.out() / "dataset.json");

  RunManifest m;
  m.command = "train-first";
  m.config_hash = config.config_hash();
  hash_tree_into(m.outputs, mp);
  hash_tree_into(m.outputs, config.out() / "dataset.json");
  write_run_manifest(config, m);
}

void cmd_attack(const PipelineConfig& config,
                const std::vector<std::string>& only) {
  config.validate();
  DatasetSplit split = pipeline_dataset(config);
  ModelSnapshot model = pipeline_model(config);
  std::vector<ImageExample> images = capped_test_images(config, split);

  std::vector<std::string> names = only.empty() ? config.attacks : only;
  RunManifest m;
  m.command = "attack";
  m.config_hash = config.config_hash();
  hash_tree_into(m.inputs, model_path(config));
  for (const std::string& name : names) {
    AttackConfig cfg = config.attack_config(name);
    AttackBatchSummary summary;
    auto records = attack_dataset(model, images, cfg, config.jobs, &summary);
    write_attack_batch(attack_dir(config, name), records, summary,
                       model.content_id());
    hash_tree_into(m.outputs, attack_dir(config, name));
  }
  write_run_manifest(config, m);
}

void cmd_afs(const PipelineConfig& config, const std::string& attack) {
  config.validate();
  DatasetSplit split = pipeline_dataset(config);
  ModelSnapshot model = pipeline_model(config);
  auto records = pipeline_attack_records(config, attack, split);
  LayerDistanceCurve curve = afs_curve(model, records, config.jobs);

  fs::path dir = config.out() / "afs";
  write_afs_csv(curve, dir / (attack + ".csv"));
  plot_afs(curve, dir / (attack + ".ppm"), dir / (attack + "_dump.csv"));

  RunManifest m;
  m.command = "afs";
  m.config_hash = config.config_hash();
  hash_tree_into(m.inputs, attack_dir(config, attack) / "attacks.json");
  hash_tree_into(m.outputs, dir);
  write_run_manifest(config, m);
}

void cmd_groupviz(const PipelineConfig& config, const std::string& image_id) {
  config.validate();
  DatasetSplit split = pipeline_dataset(config);
  ModelSnapshot model = pipeline_model(config);
  const ImageExample* image = nullptr;
  for (const auto& ex : split.test)
    if (ex.id == image_id) image = &ex;
  for (const auto& ex : split.train)
    if (!image && ex.id == image_id) image = &ex;
  if (!image)
    fail(ErrorKind::Input, "image id not found in dataset: " + image_id);

  GroupVizOptions viz{config.groups, config.nmf_iters, config.nmf_tol,
                      AscentOptions{config.ascent_steps,
                                    config.ascent_step_size,
                                    config.ascent_jitter, 0},
                      config.viz_seed};
  std::vector<std::vector<GroupFeature>> per_layer;
  for (int l = 0; l < model.conv_layer_count(); ++l) {
    GroupVizOptions v = viz;
    v.seed = SplitMix64::derive(config.viz_seed, 0xafull * 1000 + l);
    per_layer.push_back(group_features_for_layer(model, *image, l, v));
  }
  std::string safe_id = image_id;
  std::replace(safe_id.begin(), safe_id.end(), '/', '_');
  fs::path dir = config.out() / "groupviz" / safe_id;
  montage(per_layer, dir / "montage.ppm", dir / "montage_dump.csv");
  for (const auto& row : per_layer)
    for (const GroupFeature& g : row) {
      char name[48];
      std::snprintf(name, sizeof(name), "layer%d_group%d.afgt", g.layer_index,
                    g.group_index);
      write_tensor_file(dir / name, g.pixels);
    }

  RunManifest m;
  m.command = "groupviz";
  m.config_hash = config.config_hash();
  hash_tree_into(m.inputs, model_path(config));
  hash_tree_into(m.outputs, dir);
  write_run_manifest(config, m);
}

namespace {

// Builds labeled AFG samples for one source ("clean" or an attack name).
std::vector<AfgSample> build_afg_samples(const PipelineConfig& config,
                                         const ModelSnapshot& model,
                                         const DatasetSplit& split,
                                         const std::string& source) {
  const int k = split.class_count();
  const std::string model_id = model.content_id();
  AfgBuildOptions opts;
  opts.viz = GroupVizOptions{config.groups, config.nmf_iters, config.nmf_tol,
                             AscentOptions{config.ascent_steps,
                                           config.ascent_step_size,
                                           config.ascent_jitter, 0},
                             0};

  struct Item {
    ImageExample image;
    std::optional<int> adv_label;
    std::string source_id;
  };
  std::vector<Item> items;
  if (source == "clean") {
    std::vector<ImageExample> images = capped_test_images(config, split);
    for (const ImageExample& ex : images)
      items.push_back({ex, std::nullopt, ex.id});
  } else {
    auto records = pipeline_attack_records(config, source, split);
    for (const AdversarialRecord& r : records) {
      if (!r.success) continue;  // failed attacks carry no adversarial class
      ImageExample ex;
      ex.pixels = r.adversarial;
      ex.label = r.true_label;
      ex.id = r.original.id;
      items.push_back({std::move(ex), r.adv_label, r.original.id});
    }
  }
  if (config.afg_max_per_source > 0 &&
      static_cast<int>(items.size()) > config.afg_max_per_source)
    items.resize(static_cast<std::size_t>(config.afg_max_per_source));
  if (items.empty())
    fail(ErrorKind::Validation, "no inputs to build AFGs from for " + source);

  std::vector<AfgSample> samples(items.size());
  parallel_for(static_cast<int>(items.size()), config.jobs, [&](int i) {
    const Item& item = items[static_cast<std::size_t>(i)];
    AfgBuildOptions o = opts;
    // per-image stream derived from the image id so ordering cannot matter
    std::uint64_t tag = 0;
    for (char ch : item.source_id)
      tag = tag * 131 + static_cast<unsigned char>(ch);
    o.seed = SplitMix64::derive(config.viz_seed, tag);
    AfgSample s;
    s.tensor = build_afg_tensor(model, item.image, o);
    s.label = MixedLabel::encode(item.image.label, item.adv_label, k);
    char id[32];
    std::snprintf(id, sizeof(id), "%s_%05d", source.c_str(), i);
    s.id = id;
    s.provenance = {item.source_id, source, model_id};
    samples[static_cast<std::size_t>(i)] = std::move(s);
  });
  return samples;
}

}  // namespace

void cmd_build_afg(const PipelineConfig& config,
                   const std::vector<std::string>& only) {
  config.validate();
  DatasetSplit split = pipeline_dataset(config);
  ModelSnapshot model = pipeline_model(config);

  std::vector<std::string> sources = {"clean"};
  for (const std::string& a : only.empty() ? config.attacks : only)
    if (a != "clean") sources.push_back(a);

  RunManifest m;
  m.command = "build-afg";
  m.config_hash = config.config_hash();
  hash_tree_into(m.inputs, model_path(config));
  for (const std::string& source : sources) {
    if (source != "clean") {
      fs::path manifest = attack_dir(config, source) / "attacks.json";
      if (!fs::exists(manifest))
        fail(ErrorKind::Dependency,
             "missing attack manifest " + manifest.string() +
                 "; run the attack command first");
      hash_tree_into(m.inputs, manifest);
    }
    auto samples = build_afg_samples(config, model, split, source);
    write_afg_dataset(afg_dir(config, source), samples, config.to_json());
    hash_tree_into(m.outputs, afg_dir(config, source));
  }
  write_run_manifest(config, m);
}

namespace {

TrainOptions recognizer_train_options(const PipelineConfig& config) {
  return TrainOptions{config.rec_lr,         config.rec_momentum,
                      config.rec_epochs,     config.rec_batch_size,
                      config.rec_seed,       true};
}

std::vector<AfgSample> mixed_afg_dataset(const PipelineConfig& config,
                                         const std::string& attack) {
  auto clean = pipeline_afg_dataset(config, "clean");
  auto adv = pipeline_afg_dataset(config, attack);
  clean.insert(clean.end(), adv.begin(), adv.end());
  return clean;
}

}  // namespace

void cmd_train_recognizer(const PipelineConfig& config, const std::string& head,
                          const std::string& attack) {
  config.validate();
  HeadMode mode = head_mode_from_name(head);
  std::vector<AfgSample> all = mode == HeadMode::SingleClass
                                   ? pipeline_afg_dataset(config, "clean")
                                   : mixed_afg_dataset(config, attack);
  ChannelPolicy pol = ChannelPolicy::parse(config.policy);
  if (pol.kind != ChannelPolicyKind::ALL) {
    for (AfgSample& s : all) s = select_channels(s, pol);
  }
  std::vector<AfgSample> train, test;
  split_samples(all, config.afg_train_ratio, config.afg_split_seed, &train,
                &test);
  RecognizerSnapshot rec =
      train_recognizer(train, backend_from_name(config.backend),
                       recognizer_train_options(config), mode, config.tau);

  std::string tag = head + "_" + config.backend + "_" +
                    (mode == HeadMode::SingleClass ? "clean" : attack);
  fs::path path = config.out() / "recognizer" / (tag + ".afgm");
  rec.save(path);

  RunManifest m;
  m.command = "train-recognizer";
  m.config_hash = config.config_hash();
  hash_tree_into(m.outputs, path);
  write_run_manifest(config, m);
}

void cmd_evaluate(const PipelineConfig& config,
                  const std::vector<std::string>& suites) {
  config.validate();
  ModelSnapshot model = pipeline_model(config);
  DatasetSplit split = pipeline_dataset(config);
  DecodeMode mode = decode_mode_from_name(config.decode);
  TrainOptions ropts = recognizer_train_options(config);

  EvalContext ctx;
  ctx.model_id = model.content_id();
  ctx.seed = config.rec_seed;
  ctx.backend = config.backend;
  ctx.decode = config.decode;

  auto want = [&](const std::string& s) {
    return suites.empty() ||
           std::find(suites.begin(), suites.end(), s) != suites.end();
  };
  std::vector<EvalReport> reports;
  const std::string primary_attack =
      config.attacks.empty() ? "fgsm" : config.attacks.front();

  if (want("detection")) {
    auto all = mixed_afg_dataset(config, primary_attack);
    std::vector<AfgSample> train, test;
    split_samples(all, config.afg_train_ratio, config.afg_split_seed, &train,
                  &test);
    RecognizerSnapshot rec = binary_mode_train(
        train, backend_from_name(config.backend), ropts);
    SnapshotRecognizer wrap(rec);
    EvalContext c = ctx;
    c.attack = primary_attack;
    c.recognizer_id = rec.net.content_id();
    reports.push_back(detection_accuracy(wrap, test, c));

    // Detector baseline on the deepest conv layer of the same pairs.
    auto records = pipeline_attack_records(config, primary_attack, split);
    std::vector<Tensor> clean_feats, adv_feats;
    int deepest = model.conv_layer_count() - 1;
    for (const AdversarialRecord& r : records) {
      if (!r.success) continue;
      clean_feats.push_back(model.forward_with_features(r.original.pixels)
                                .features.per_layer[deepest]);
      adv_feats.push_back(model.forward_with_features(r.adversarial)
                              .features.per_layer[deepest]);
    }
    std::size_t n_train = clean_feats.size() * 3 / 4;
    std::vector<Tensor> ct(clean_feats.begin(), clean_feats.begin() + n_train);
    std::vector<Tensor> at(adv_feats.begin(), adv_feats.begin() + n_train);
    std::vector<Tensor> ce(clean_feats.begin() + n_train, clean_feats.end());
    std::vector<Tensor> ae(adv_feats.begin() + n_train, adv_feats.end());
    DetectorBaseline det = detector_baseline_train(ct, at, deepest, ropts);
    EvalReport det_rep;
    det_rep.metric_name = "detector_baseline_accuracy";
    det_rep.value = detector_accuracy(det, ce, ae);
    det_rep.n = static_cast<int>(ce.size() + ae.size());
    det_rep.config_fingerprint = eval_fingerprint(c, det_rep.metric_name);
    det_rep.detail = "layer=" + std::to_string(deepest);
    reports.push_back(det_rep);
  }

  if (want("clean")) {
    auto clean = pipeline_afg_dataset(config, "clean");
    std::vector<AfgSample> train, test;
    split_samples(clean, config.afg_train_ratio, config.afg_split_seed, &train,
                  &test);
    RecognizerSnapshot rec =
        train_recognizer(train, backend_from_name(config.backend), ropts,
                         HeadMode::SingleClass, config.tau);
    SnapshotRecognizer wrap(rec);
    EvalContext c = ctx;
    c.recognizer_id = rec.net.content_id();
    reports.push_back(clean_afg_accuracy(wrap, test, c));
  }

  if (want("iou")) {
    auto all = mixed_afg_dataset(config, primary_attack);
    std::vector<AfgSample> train, test;
    split_samples(all, config.afg_train_ratio, config.afg_split_seed, &train,
                  &test);
    RecognizerSnapshot rec = train_recognizer(
        train, backend_from_name(config.backend), ropts, HeadMode::Multilabel,
        config.tau);
    SnapshotRecognizer wrap(rec);
    EvalContext c = ctx;
    c.attack = primary_attack;
    c.recognizer_id = rec.net.content_id();
    reports.push_back(recognition_iou(wrap, test, c, mode));
  }

  if (want("cross-attack") && config.attacks.size() >= 2) {
    std::map<std::string, std::unique_ptr<SnapshotRecognizer>> recs;
    std::map<std::string, std::vector<AfgSample>> tests;
    std::map<std::string, const RecognizerLike*> rec_ptrs;
    std::map<std::string, const std::vector<AfgSample>*> test_ptrs;
    for (const std::string& a : config.attacks) {
      auto all = mixed_afg_dataset(config, a);
      std::vector<AfgSample> train, test;
      split_samples(all, config.afg_train_ratio, config.afg_split_seed,
                    &train, &test);
      RecognizerSnapshot rec = train_recognizer(
          train, backend_from_name(config.backend), ropts,
          HeadMode::Multilabel, config.tau);
      recs[a] = std::make_unique<SnapshotRecognizer>(std::move(rec));
      tests[a] = std::move(test);
    }
    for (const auto& [a, r] : recs) rec_ptrs[a] = r.get();
    for (const auto& [a, t] : tests) test_ptrs[a] = &t;
    auto matrix = cross_attack_matrix(rec_ptrs, test_ptrs, ctx, mode);
    for (const auto& [key, cell] : matrix.cells)
      if (cell) {
        EvalReport r = *cell;
        r.metric_name = "cross_attack_iou";
        r.detail = "train=" + key.first + ",eval=" + key.second;
        reports.push_back(std::move(r));
      }
  }

  if (want("ablation")) {
    auto all = mixed_afg_dataset(config, primary_attack);
    std::vector<AfgSample> train, test;
    split_samples(all, config.afg_train_ratio, config.afg_split_seed, &train,
                  &test);
    int n_layers = model.conv_layer_count();
    std::vector<ChannelPolicy> policies{{ChannelPolicyKind::ALL},
                                        {ChannelPolicyKind::F3},
                                        {ChannelPolicyKind::L3},
                                        {ChannelPolicyKind::FML}};
    if (n_layers >= 6) policies.push_back({ChannelPolicyKind::F3L3});
    RecognizerProvider provider =
        [&](const std::vector<AfgSample>& tr,
            const std::string&) -> std::unique_ptr<RecognizerLike> {
      return std::make_unique<SnapshotRecognizer>(
          train_recognizer(tr, backend_from_name(config.backend), ropts,
                           HeadMode::Multilabel, config.tau));
    };
    auto rows = channel_ablation(train, test, policies, provider, ctx, mode);
    for (const auto& row : rows) {
      reports.push_back(row.all);
      reports.push_back(row.clean_only);
      reports.push_back(row.adversarial_only);
    }
  }

  if (want("backend")) {
    auto all = mixed_afg_dataset(config, primary_attack);
    std::vector<AfgSample> train, test;
    split_samples(all, config.afg_train_ratio, config.afg_split_seed, &train,
                  &test);
    RecognizerProvider provider =
        [&](const std::vector<AfgSample>& tr,
            const std::string& variant) -> std::unique_ptr<RecognizerLike> {
      return std::make_unique<SnapshotRecognizer>(
          train_recognizer(tr, backend_from_name(variant), ropts,
                           HeadMode::Multilabel, config.tau));
    };
    auto rows = backend_comparison(
        train, test,
        {Backend::DeepCnn, Backend::ShallowCnn, Backend::LinearMultilabel},
        provider, ctx, mode);
    for (const auto& row : rows) reports.push_back(row.iou);
  }

  fs::path dir = config.out() / "reports";
  write_reports_json(reports, dir / "reports.json");
  write_reports_csv(reports, dir / "reports.csv");
  write_text_file(dir / "tables.txt", render_reports_table(reports));

  RunManifest m;
  m.command = "evaluate";
  m.config_hash = config.config_hash();
  hash_tree_into(m.outputs, dir);
  write_run_manifest(config, m);
}

void cmd_report(const std::filesystem::path& reports_json,
                const std::filesystem::path& out_txt) {
  auto reports = read_reports_json(reports_json);
  std::string table = render_reports_table(reports);
  if (out_txt.empty())
    fail(ErrorKind::Validation, "report output path is empty");
  write_text_file(out_txt, table);
}

}  // namespace afg
