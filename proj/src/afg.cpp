#include "afglab/afg.hpp"

#include <json.hpp>

#include <cmath>

#include "afglab/error.hpp"
#include "afglab/prng.hpp"
#include "afglab/serial.hpp"

namespace afg {

namespace fs = std::filesystem;

MixedLabel MixedLabel::encode(int y, std::optional<int> y_hat, int k_orig,
                              int k_adv) {
  if (k_adv < 0) k_adv = k_orig;
  if (k_orig < 1 || k_adv < 1)
    fail(ErrorKind::Validation, "label vocabulary sizes must be >= 1");
  if (y < 0 || y >= k_orig)
    fail(ErrorKind::Validation,
         "original label " + std::to_string(y) + " out of [0," +
             std::to_string(k_orig) + ")");
  if (y_hat) {
    if (*y_hat < 0 || *y_hat >= k_adv)
      fail(ErrorKind::Validation,
           "adversarial label " + std::to_string(*y_hat) + " out of [0," +
               std::to_string(k_adv) + ")");
    if (k_adv == k_orig && *y_hat == y)
      fail(ErrorKind::Validation,
           "adversarial label equals the original class; not an adversarial "
           "example");
  }
  MixedLabel l;
  l.k_orig = k_orig;
  l.k_adv = k_adv;
  l.original = y;
  l.adversarial = y_hat;
  return l;
}

std::vector<double> MixedLabel::onehot() const {
  std::vector<double> v(static_cast<std::size_t>(k_orig + k_adv), 0.0);
  v[static_cast<std::size_t>(original)] = 1.0;
  if (adversarial)
    v[static_cast<std::size_t>(k_orig + *adversarial)] = 1.0;
  return v;
}

std::string MixedLabel::code() const {
  std::string s;
  for (double v : onehot()) s.push_back(v > 0.5 ? '1' : '0');
  return s;
}

DecodedPrediction decode_prediction(const std::vector<double>& scores,
                                    int k_orig, int k_adv, double tau) {
  if (static_cast<int>(scores.size()) != k_orig + k_adv)
    fail(ErrorKind::Input, "score vector length does not match k_orig+k_adv");
  for (double s : scores)
    if (!std::isfinite(s) || s < 0.0 || s > 1.0)
      fail(ErrorKind::Input, "scores must be finite and within [0,1]");
  DecodedPrediction out;
  out.original = 0;
  for (int i = 1; i < k_orig; ++i)
    if (scores[static_cast<std::size_t>(i)] >
        scores[static_cast<std::size_t>(out.original)])
      out.original = i;
  int best = 0;
  for (int i = 1; i < k_adv; ++i)
    if (scores[static_cast<std::size_t>(k_orig + i)] >
        scores[static_cast<std::size_t>(k_orig + best)])
      best = i;
  if (scores[static_cast<std::size_t>(k_orig + best)] >= tau)
    out.adversarial = best;
  return out;
}

// ---------------------------------------------------------------- stitch

namespace {

// Channel-mean luminance plane of a (s,s,C) tile.
Tensor luminance(const Tensor& tile) {
  Tensor out({tile.dim(0), tile.dim(1)});
  const int c = tile.dim(2);
  for (int y = 0; y < tile.dim(0); ++y)
    for (int x = 0; x < tile.dim(1); ++x) {
      double s = 0.0;
      for (int ch = 0; ch < c; ++ch) s += tile.at(y, x, ch);
      out[std::int64_t(y) * tile.dim(1) + x] = s / c;
    }
  return out;
}

}  // namespace

Tensor stitch(const std::vector<GroupFeature>& groups) {
  if (groups.empty()) fail(ErrorKind::Validation, "no group features");
  int r = static_cast<int>(groups.size());
  int side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(r))));
  if (side * side != r)
    fail(ErrorKind::Configuration,
         "group count " + std::to_string(r) + " is not a perfect square");
  const Tensor& first = groups.front().pixels;
  if (first.rank() != 3 || first.dim(0) != first.dim(1))
    fail(ErrorKind::Validation, "group tiles must be square (s,s,C)");
  const int s = first.dim(0);
  for (const GroupFeature& g : groups)
    if (g.pixels.dims() != first.dims())
      fail(ErrorKind::Validation, "mixed group tile sizes");

  const int g_side = s * side;
  Tensor out({g_side, g_side});
  for (int idx = 0; idx < r; ++idx) {
    Tensor plane = luminance(groups[static_cast<std::size_t>(idx)].pixels);
    int row = idx / side, col = idx % side;
    for (int y = 0; y < s; ++y)
      for (int x = 0; x < s; ++x)
        out[std::int64_t(row * s + y) * g_side + (col * s + x)] =
            plane[std::int64_t(y) * s + x];
  }
  return out;
}

Tensor build_afg_tensor(const ModelSnapshot& model, const ImageExample& image,
                        const AfgBuildOptions& opts) {
  const int n = model.conv_layer_count();
  if (n < 1) fail(ErrorKind::Validation, "model has no conv layers");
  std::vector<Tensor> planes;
  int g_side = 0;
  for (int l = 0; l < n; ++l) {
    GroupVizOptions viz = opts.viz;
    viz.seed = SplitMix64::derive(opts.seed, 0xafull * 1000 + l);
    auto feats = group_features_for_layer(model, image, l, viz);
    Tensor plane = stitch(feats);
    g_side = plane.dim(0);
    planes.push_back(std::move(plane));
  }
  Tensor out({g_side, g_side, n});
  for (int l = 0; l < n; ++l)
    for (int y = 0; y < g_side; ++y)
      for (int x = 0; x < g_side; ++x)
        out.at(y, x, l) = planes[static_cast<std::size_t>(l)]
                                [std::int64_t(y) * g_side + x];
  out.quantize_f32();
  return out;
}

// ---------------------------------------------------------------- policies

ChannelPolicy ChannelPolicy::parse(const std::string& name) {
  if (name == "ALL" || name == "all") return {ChannelPolicyKind::ALL};
  if (name == "F3" || name == "f3") return {ChannelPolicyKind::F3};
  if (name == "L3" || name == "l3") return {ChannelPolicyKind::L3};
  if (name == "F3L3" || name == "f3l3") return {ChannelPolicyKind::F3L3};
  if (name == "FML" || name == "fml") return {ChannelPolicyKind::FML};
  fail(ErrorKind::Validation, "unknown channel policy '" + name + "'");
}

std::string ChannelPolicy::name() const {
  switch (kind) {
    case ChannelPolicyKind::ALL: return "ALL";
    case ChannelPolicyKind::F3: return "F3";
    case ChannelPolicyKind::L3: return "L3";
    case ChannelPolicyKind::F3L3: return "F3L3";
    case ChannelPolicyKind::FML: return "FML";
  }
  return "?";
}

std::vector<int> ChannelPolicy::indices_for(int n) const {
  auto need = [&](int min_n) {
    if (n < min_n)
      fail(ErrorKind::Configuration,
           "policy " + name() + " needs at least " + std::to_string(min_n) +
               " layers, model has " + std::to_string(n));
  };
  std::vector<int> idx;
  switch (kind) {
    case ChannelPolicyKind::ALL:
      need(1);
      for (int i = 0; i < n; ++i) idx.push_back(i);
      break;
    case ChannelPolicyKind::F3:
      need(3);
      idx = {0, 1, 2};
      break;
    case ChannelPolicyKind::L3:
      need(3);
      idx = {n - 3, n - 2, n - 1};
      break;
    case ChannelPolicyKind::F3L3:
      need(6);
      idx = {0, 1, 2, n - 3, n - 2, n - 1};
      break;
    case ChannelPolicyKind::FML:
      need(3);
      idx = {0, n / 2, n - 1};
      break;
  }
  return idx;
}

AfgSample select_channels(const AfgSample& sample,
                          const ChannelPolicy& policy) {
  const Tensor& t = sample.tensor;
  if (t.rank() != 3) fail(ErrorKind::Input, "AFG tensor must be (G,G,N)");
  auto idx = policy.indices_for(t.dim(2));
  AfgSample out = sample;
  Tensor sel({t.dim(0), t.dim(1), static_cast<int>(idx.size())});
  for (int y = 0; y < t.dim(0); ++y)
    for (int x = 0; x < t.dim(1); ++x)
      for (std::size_t c = 0; c < idx.size(); ++c)
        sel.at(y, x, static_cast<int>(c)) = t.at(y, x, idx[c]);
  out.tensor = std::move(sel);
  return out;
}

// ---------------------------------------------------------------- dataset io

void write_afg_dataset(const fs::path& dir, const std::vector<AfgSample>& items,
                       const std::string& generation_config_json) {
  fs::create_directories(dir);
  nlohmann::json j;
  try {
    j["generation"] = nlohmann::json::parse(generation_config_json);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Validation,
         "generation config is not valid json: " + std::string(e.what()));
  }
  nlohmann::json samples = nlohmann::json::array();
  for (const AfgSample& s : items) {
    std::string fname = s.id + ".afgt";
    write_tensor_file(dir / fname, s.tensor);
    nlohmann::json item = {
        {"id", s.id},
        {"file", fname},
        {"code", s.label.code()},
        {"k_orig", s.label.k_orig},
        {"k_adv", s.label.k_adv},
        {"original", s.label.original},
        {"adversarial",
         s.label.adversarial ? nlohmann::json(*s.label.adversarial)
                             : nlohmann::json(nullptr)},
        {"provenance",
         {{"source_image_id", s.provenance.source_image_id},
          {"attack", s.provenance.attack},
          {"model_id", s.provenance.model_id}}}};
    samples.push_back(std::move(item));
  }
  j["samples"] = samples;
  j["count"] = items.size();
  write_text_file(dir / "manifest.json", j.dump(2) + "\n");
}

std::vector<AfgSample> read_afg_dataset(const fs::path& dir) {
  fs::path manifest = dir / "manifest.json";
  if (!fs::exists(manifest))
    fail(ErrorKind::Dependency, "missing AFG manifest " + manifest.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(manifest));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Format, "bad AFG manifest: " + std::string(e.what()));
  }
  if (!j.contains("samples") || !j.contains("count"))
    fail(ErrorKind::Format, "AFG manifest missing fields");
  if (j["samples"].size() != j["count"].get<std::size_t>())
    fail(ErrorKind::Integrity, "AFG manifest count mismatch");

  std::vector<AfgSample> out;
  for (const auto& item : j["samples"]) {
    AfgSample s;
    try {
      s.id = item.at("id").get<std::string>();
      int k_orig = item.at("k_orig").get<int>();
      int k_adv = item.at("k_adv").get<int>();
      std::optional<int> adv;
      if (!item.at("adversarial").is_null())
        adv = item.at("adversarial").get<int>();
      s.label =
          MixedLabel::encode(item.at("original").get<int>(), adv, k_orig, k_adv);
      s.provenance.source_image_id =
          item.at("provenance").at("source_image_id").get<std::string>();
      s.provenance.attack = item.at("provenance").at("attack").get<std::string>();
      s.provenance.model_id =
          item.at("provenance").at("model_id").get<std::string>();
      fs::path file = dir / item.at("file").get<std::string>();
      if (!fs::exists(file))
        fail(ErrorKind::Integrity,
             "sample " + s.id + ": tensor file missing: " + file.string());
      s.tensor = read_tensor_file(file);
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::Format, "bad AFG manifest entry: " + std::string(e.what()));
    }
    if (item.at("code").get<std::string>() != s.label.code())
      fail(ErrorKind::Integrity, "sample " + s.id + ": label code mismatch");
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace afg
