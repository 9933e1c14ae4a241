#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "afglab/tensor.hpp"

namespace afg {

struct ImageExample {
  Tensor pixels;  // (H, W, C), float values in [0,1]
  int label = -1;
  std::string id;  // "<class_name>/<file_name>"
};

struct IngestOptions {
  double train_ratio = 0.75;
  std::uint64_t seed = 1;
};

// Train/test split with enough bookkeeping to reproduce the shuffle.
// Split rule, per class (classes sorted by name, labels = sort order):
//   files sorted by name; indices shuffled by Fisher-Yates over
//   splitmix64(derive(seed, class_index)); the first
//   clamp(round(ratio*n), 1, n-1) shuffled indices are train, rest test.
struct DatasetSplit {
  std::vector<ImageExample> train;
  std::vector<ImageExample> test;
  std::vector<std::string> class_names;
  std::uint64_t seed = 0;
  double train_ratio = 0.0;
  std::string source;

  struct ClassSplit {
    std::vector<std::string> files;       // sorted
    std::vector<int> train_indices;       // into files, shuffle order
    std::vector<int> test_indices;
  };
  std::vector<ClassSplit> per_class;

  int class_count() const { return static_cast<int>(class_names.size()); }
};

DatasetSplit load_dataset(const std::filesystem::path& root,
                          const IngestOptions& options);

// Keeps k classes chosen by a seeded shuffle of class indices (first k of
// the Fisher-Yates order over splitmix64(seed)); labels re-indexed to [0,k)
// in chosen order.
DatasetSplit select_classes(const DatasetSplit& split, int k,
                            std::uint64_t seed);

void write_dataset_manifest(const DatasetSplit& split,
                            const std::filesystem::path& path);

// Divides by 255 when any value exceeds 1, then clamps to [0,1]. Applying it
// twice never changes a pixel.
Tensor normalize_pixels(const Tensor& raw);

// Binary PPM (P6) / PGM (P5), maxval 255.
Tensor read_image_ppm(const std::filesystem::path& path);
void write_image_ppm(const std::filesystem::path& path, const Tensor& image);

struct SynthOptions {
  int classes = 10;
  int per_class = 150;
  int size = 32;
  int channels = 3;
  std::uint64_t seed = 7;
  double noise_sigma = 0.12;
};

// Writes a directory-per-class dataset of parametric pattern images.
void synth_dataset(const std::filesystem::path& root, const SynthOptions& opt);
const std::vector<std::string>& synth_class_names();
Tensor synth_image(int cls, const SynthOptions& opt, std::uint64_t rng_seed);

}  // namespace afg
