#include "afglab/dataset.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>

#include "afglab/error.hpp"
#include "afglab/prng.hpp"
#include "afglab/serial.hpp"

namespace afg {

namespace fs = std::filesystem;

Tensor normalize_pixels(const Tensor& raw) {
  Tensor t = raw;
  if (!t.all_finite())
    fail(ErrorKind::Validation, "image contains non-finite pixels");
  if (t.max() > 1.0) t.scale(1.0 / 255.0);
  t.clamp(0.0, 1.0);
  t.quantize_f32();
  return t;
}

// ---------------------------------------------------------------- PPM io

namespace {

int read_pnm_token(std::istream& in, const std::string& path) {
  // skips whitespace and '#' comments
  int ch;
  while ((ch = in.get()) != EOF) {
    if (ch == '#') {
      while ((ch = in.get()) != EOF && ch != '\n') {}
    } else if (!std::isspace(ch)) {
      break;
    }
  }
  if (ch == EOF) fail(ErrorKind::Input, "truncated header in " + path);
  std::string tok;
  tok.push_back(static_cast<char>(ch));
  while ((ch = in.get()) != EOF && !std::isspace(ch))
    tok.push_back(static_cast<char>(ch));
  try {
    return std::stoi(tok);
  } catch (const std::exception&) {
    fail(ErrorKind::Input, "bad header value '" + tok + "' in " + path);
  }
}

}  // namespace

Tensor read_image_ppm(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Input, "cannot open image " + path.string());
  char m0 = 0, m1 = 0;
  in.get(m0);
  in.get(m1);
  int channels;
  if (m0 == 'P' && m1 == '6') channels = 3;
  else if (m0 == 'P' && m1 == '5') channels = 1;
  else fail(ErrorKind::Input, "unsupported image format in " + path.string());
  int w = read_pnm_token(in, path.string());
  int h = read_pnm_token(in, path.string());
  int maxval = read_pnm_token(in, path.string());
  if (w < 1 || h < 1 || maxval != 255)
    fail(ErrorKind::Input, "unsupported PNM geometry in " + path.string());
  std::vector<char> buf(static_cast<std::size_t>(w) * h * channels);
  in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (in.gcount() != static_cast<std::streamsize>(buf.size()))
    fail(ErrorKind::Input, "truncated pixel data in " + path.string());
  Tensor t({h, w, channels});
  for (std::int64_t i = 0; i < t.size(); ++i)
    t[i] = static_cast<double>(static_cast<unsigned char>(
               buf[static_cast<std::size_t>(i)])) /
           255.0;
  t.quantize_f32();
  return t;
}

void write_image_ppm(const fs::path& path, const Tensor& image) {
  if (image.rank() != 3 || (image.dim(2) != 1 && image.dim(2) != 3))
    fail(ErrorKind::Input, "PNM writer needs (H,W,1) or (H,W,3)");
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot create " + path.string());
  out << (image.dim(2) == 3 ? "P6" : "P5") << "\n"
      << image.dim(1) << " " << image.dim(0) << "\n255\n";
  for (std::int64_t i = 0; i < image.size(); ++i) {
    double v = std::clamp(image[i], 0.0, 1.0);
    out.put(static_cast<char>(
        static_cast<unsigned char>(std::lround(v * 255.0))));
  }
  if (!out) fail(ErrorKind::Io, "write failed for " + path.string());
}

// ---------------------------------------------------------------- ingest

DatasetSplit load_dataset(const fs::path& root, const IngestOptions& options) {
  if (!fs::exists(root))
    fail(ErrorKind::Input, "dataset path does not exist: " + root.string());
  if (!fs::is_directory(root))
    fail(ErrorKind::Input, "dataset path is not a directory: " + root.string());
  if (!(options.train_ratio > 0.0 && options.train_ratio < 1.0))
    fail(ErrorKind::Validation, "train_ratio must be in (0,1)");

  std::vector<std::string> class_names;
  for (const auto& entry : fs::directory_iterator(root))
    if (entry.is_directory())
      class_names.push_back(entry.path().filename().string());
  std::sort(class_names.begin(), class_names.end());
  if (class_names.empty())
    fail(ErrorKind::Validation, "no class directories under " + root.string());
  if (std::adjacent_find(class_names.begin(), class_names.end()) !=
      class_names.end())
    fail(ErrorKind::Validation, "duplicate class names");

  DatasetSplit split;
  split.class_names = class_names;
  split.seed = options.seed;
  split.train_ratio = options.train_ratio;
  split.source = root.string();

  for (int c = 0; c < static_cast<int>(class_names.size()); ++c) {
    fs::path cdir = root / class_names[static_cast<std::size_t>(c)];
    DatasetSplit::ClassSplit cs;
    for (const auto& entry : fs::directory_iterator(cdir)) {
      if (!entry.is_regular_file()) continue;
      auto ext = entry.path().extension().string();
      if (ext == ".ppm" || ext == ".pgm")
        cs.files.push_back(entry.path().filename().string());
    }
    std::sort(cs.files.begin(), cs.files.end());
    if (cs.files.empty())
      fail(ErrorKind::Validation,
           "class directory has no images: " + cdir.string());
    int n = static_cast<int>(cs.files.size());
    if (n < 2)
      fail(ErrorKind::Validation,
           "class needs at least 2 images to appear in both splits: " +
               cdir.string());
    std::vector<int> order(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
    SplitMix64 rng(SplitMix64::derive(options.seed, static_cast<std::uint64_t>(c)));
    rng.shuffle(order);
    int n_train = static_cast<int>(std::lround(options.train_ratio * n));
    n_train = std::clamp(n_train, 1, n - 1);
    cs.train_indices.assign(order.begin(), order.begin() + n_train);
    cs.test_indices.assign(order.begin() + n_train, order.end());

    auto load_one = [&](int file_idx) {
      const std::string& fname = cs.files[static_cast<std::size_t>(file_idx)];
      ImageExample ex;
      ex.pixels = normalize_pixels(read_image_ppm(cdir / fname));
      ex.label = c;
      ex.id = class_names[static_cast<std::size_t>(c)] + "/" + fname;
      return ex;
    };
    for (int i : cs.train_indices) split.train.push_back(load_one(i));
    for (int i : cs.test_indices) split.test.push_back(load_one(i));
    split.per_class.push_back(std::move(cs));
  }
  return split;
}

DatasetSplit select_classes(const DatasetSplit& split, int k,
                            std::uint64_t seed) {
  int total = split.class_count();
  if (k < 1 || k > total)
    fail(ErrorKind::Validation,
         "k must be in [1," + std::to_string(total) + "], got " +
             std::to_string(k));
  std::vector<int> order(static_cast<std::size_t>(total));
  for (int i = 0; i < total; ++i) order[static_cast<std::size_t>(i)] = i;
  SplitMix64 rng(seed);
  rng.shuffle(order);
  std::vector<int> chosen(order.begin(), order.begin() + k);

  std::vector<int> new_label(static_cast<std::size_t>(total), -1);
  DatasetSplit out;
  out.seed = split.seed;
  out.train_ratio = split.train_ratio;
  out.source = split.source;
  for (int pos = 0; pos < k; ++pos) {
    int c = chosen[static_cast<std::size_t>(pos)];
    new_label[static_cast<std::size_t>(c)] = pos;
    out.class_names.push_back(split.class_names[static_cast<std::size_t>(c)]);
    out.per_class.push_back(split.per_class[static_cast<std::size_t>(c)]);
  }
  auto remap = [&](const std::vector<ImageExample>& src,
                   std::vector<ImageExample>& dst) {
    for (const ImageExample& ex : src) {
      int nl = new_label[static_cast<std::size_t>(ex.label)];
      if (nl < 0) continue;
      ImageExample copy = ex;
      copy.label = nl;
      dst.push_back(std::move(copy));
    }
  };
  remap(split.train, out.train);
  remap(split.test, out.test);
  return out;
}

void write_dataset_manifest(const DatasetSplit& split, const fs::path& path) {
  nlohmann::json j;
  j["class_names"] = split.class_names;
  j["seed"] = split.seed;
  j["train_ratio"] = split.train_ratio;
  j["source"] = split.source;
  j["prng"] = kPrngIdentifier;
  j["shuffle"] = kShuffleIdentifier;
  nlohmann::json classes = nlohmann::json::array();
  for (std::size_t c = 0; c < split.per_class.size(); ++c) {
    const auto& cs = split.per_class[c];
    classes.push_back({{"name", split.class_names[c]},
                       {"files", cs.files},
                       {"train_indices", cs.train_indices},
                       {"test_indices", cs.test_indices}});
  }
  j["classes"] = classes;
  write_text_file(path, j.dump(2) + "\n");
}

}  // namespace afg
