#include "afglab/afs.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "afglab/error.hpp"
#include "afglab/parallel.hpp"
#include "afglab/prng.hpp"
#include "afglab/serial.hpp"

namespace afg {

double layer_distance(const Tensor& p, const Tensor& p_hat) {
  if (!p.same_shape(p_hat))
    fail(ErrorKind::Input, "layer_distance shape mismatch " + p.shape_str() +
                               " vs " + p_hat.shape_str());
  double ref = p.norm();
  if (ref == 0.0)
    fail(ErrorKind::Degenerate, "reference feature map has zero norm");
  double diff = 0.0;
  for (std::int64_t i = 0; i < p.size(); ++i) {
    double d = p[i] - p_hat[i];
    diff += d * d;
  }
  return std::sqrt(diff) / ref;
}

namespace {

// Channel totals of a (H,W,C) map; validates the non-negativity premise.
std::vector<double> channel_sums(const Tensor& p) {
  if (p.rank() != 3)
    fail(ErrorKind::Input, "channel distribution expects a (H,W,C) tensor");
  if (!p.all_nonneg())
    fail(ErrorKind::Input,
         "negative activations; use post-activation feature maps");
  std::vector<double> sums(static_cast<std::size_t>(p.dim(2)), 0.0);
  const double* d = p.data();
  std::int64_t pixels = std::int64_t(p.dim(0)) * p.dim(1);
  int c = p.dim(2);
  for (std::int64_t px = 0; px < pixels; ++px)
    for (int j = 0; j < c; ++j) sums[static_cast<std::size_t>(j)] += *d++;
  return sums;
}

}  // namespace

ChannelDistribution channel_distribution(const Tensor& p, double delta) {
  auto sums = channel_sums(p);
  double total = 0.0;
  for (double s : sums) total += s;
  if (total <= 0.0)
    fail(ErrorKind::Degenerate, "all-zero feature map");
  double denom = total + delta * static_cast<double>(sums.size());
  ChannelDistribution out;
  out.mass.reserve(sums.size());
  for (double s : sums) out.mass.push_back((s + delta) / denom);
  return out;
}

double kl_divergence(const Tensor& p, const Tensor& p_hat, double delta) {
  if (!p.same_shape(p_hat))
    fail(ErrorKind::Input, "kl_divergence shape mismatch");
  ChannelDistribution a = channel_distribution(p, delta);
  ChannelDistribution b = channel_distribution(p_hat, delta);
  double kl = 0.0;
  for (std::size_t j = 0; j < a.mass.size(); ++j)
    kl += a.mass[j] * std::log(a.mass[j] / b.mass[j]);
  return kl;
}

namespace {

LayerDistanceCurve mean_curve(
    const ModelSnapshot& model,
    const std::vector<const AdversarialRecord*>& pairs,
    const std::function<Tensor(const AdversarialRecord&, int)>& adv_image,
    const std::string& attack, int jobs) {
  if (pairs.empty())
    fail(ErrorKind::Validation, "no successful records to aggregate");
  const int n_layers = model.conv_layer_count();
  std::vector<std::vector<double>> dist(pairs.size()), kls(pairs.size());
  parallel_for(static_cast<int>(pairs.size()), jobs, [&](int i) {
    const AdversarialRecord& r = *pairs[static_cast<std::size_t>(i)];
    auto clean = model.forward_with_features(r.original.pixels);
    auto adv = model.forward_with_features(adv_image(r, i));
    std::vector<double> d, k;
    for (int l = 0; l < n_layers; ++l) {
      const Tensor& pc = clean.features.per_layer[static_cast<std::size_t>(l)];
      const Tensor& pa = adv.features.per_layer[static_cast<std::size_t>(l)];
      d.push_back(layer_distance(pc, pa));
      k.push_back(kl_divergence(pc, pa));
    }
    dist[static_cast<std::size_t>(i)] = std::move(d);
    kls[static_cast<std::size_t>(i)] = std::move(k);
  });

  LayerDistanceCurve curve;
  curve.layer_names = model.conv_layer_names();
  curve.attack = attack;
  curve.n_pairs = static_cast<int>(pairs.size());
  curve.mean_distance.assign(static_cast<std::size_t>(n_layers), 0.0);
  curve.mean_kl.assign(static_cast<std::size_t>(n_layers), 0.0);
  for (std::size_t i = 0; i < pairs.size(); ++i)
    for (int l = 0; l < n_layers; ++l) {
      curve.mean_distance[static_cast<std::size_t>(l)] +=
          dist[i][static_cast<std::size_t>(l)];
      curve.mean_kl[static_cast<std::size_t>(l)] +=
          kls[i][static_cast<std::size_t>(l)];
    }
  for (int l = 0; l < n_layers; ++l) {
    curve.mean_distance[static_cast<std::size_t>(l)] /= curve.n_pairs;
    curve.mean_kl[static_cast<std::size_t>(l)] /= curve.n_pairs;
  }
  return curve;
}

std::vector<const AdversarialRecord*> successful(
    const std::vector<AdversarialRecord>& records) {
  std::vector<const AdversarialRecord*> out;
  for (const auto& r : records)
    if (r.success) out.push_back(&r);
  return out;
}

}  // namespace

LayerDistanceCurve afs_curve(const ModelSnapshot& model,
                             const std::vector<AdversarialRecord>& records,
                             int jobs) {
  auto pairs = successful(records);
  std::string attack = records.empty() ? "" : records.front().attack.label();
  return mean_curve(
      model, pairs,
      [](const AdversarialRecord& r, int) { return r.adversarial; }, attack,
      jobs);
}

LayerDistanceCurve noise_control_curve(
    const ModelSnapshot& model, const std::vector<AdversarialRecord>& records,
    std::uint64_t seed, int jobs) {
  auto pairs = successful(records);
  auto noisy = [seed](const AdversarialRecord& r, int i) {
    double m = r.perturbation.abs_max();
    SplitMix64 rng(SplitMix64::derive(seed, static_cast<std::uint64_t>(i)));
    Tensor x = r.original.pixels;
    for (std::int64_t j = 0; j < x.size(); ++j)
      x[j] = std::clamp(x[j] + rng.uniform(-m, m), 0.0, 1.0);
    return x;
  };
  auto curve = mean_curve(model, pairs, noisy, "noise-control", jobs);
  return curve;
}

void write_afs_csv(const LayerDistanceCurve& curve,
                   const std::filesystem::path& path) {
  std::ostringstream os;
  os << "layer,mean_distance,mean_kl,n_pairs\n";
  os.precision(17);
  for (std::size_t i = 0; i < curve.layer_names.size(); ++i)
    os << curve.layer_names[i] << "," << curve.mean_distance[i] << ","
       << curve.mean_kl[i] << "," << curve.n_pairs << "\n";
  write_text_file(path, os.str());
}

LayerDistanceCurve read_afs_csv(const std::filesystem::path& path) {
  std::istringstream is(read_text_file(path));
  std::string line;
  if (!std::getline(is, line) || line != "layer,mean_distance,mean_kl,n_pairs")
    fail(ErrorKind::Format, "bad AFS csv header in " + path.string());
  LayerDistanceCurve curve;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string name, d, k, n;
    if (!std::getline(ls, name, ',') || !std::getline(ls, d, ',') ||
        !std::getline(ls, k, ',') || !std::getline(ls, n, ','))
      fail(ErrorKind::Format, "bad AFS csv row '" + line + "'");
    try {
      curve.layer_names.push_back(name);
      curve.mean_distance.push_back(std::stod(d));
      curve.mean_kl.push_back(std::stod(k));
      curve.n_pairs = std::stoi(n);
    } catch (const std::exception&) {
      fail(ErrorKind::Format, "bad AFS csv value in '" + line + "'");
    }
  }
  if (curve.layer_names.empty())
    fail(ErrorKind::Format, "empty AFS csv " + path.string());
  return curve;
}

}  // namespace afg
