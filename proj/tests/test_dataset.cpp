#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>

#include "afglab/dataset.hpp"
#include "afglab/error.hpp"
#include "afglab/serial.hpp"
#include "test_util.hpp"

using namespace afg;

namespace {

// 2 classes x 4 tiny images
void write_toy_dataset(const std::filesystem::path& root) {
  for (int c = 0; c < 2; ++c)
    for (int i = 0; i < 4; ++i) {
      Tensor img({4, 4, 3});
      img.fill(0.1 * (c + 1) + 0.05 * i);
      char name[16];
      std::snprintf(name, sizeof(name), "i%02d.ppm", i);
      write_image_ppm(root / (c == 0 ? "apple" : "berry") / name, img);
    }
}

}  // namespace

TEST_CASE("2 classes x 4 images, ratio 0.75 -> train 6 / test 2") {
  test::TempDir tmp("toy");
  write_toy_dataset(tmp.path());
  DatasetSplit s = load_dataset(tmp.path(), {0.75, 1});
  CHECK(s.train.size() == 6);
  CHECK(s.test.size() == 2);
  CHECK(s.class_names == std::vector<std::string>{"apple", "berry"});
  std::set<int> train_labels, test_labels;
  for (auto& e : s.train) train_labels.insert(e.label);
  for (auto& e : s.test) test_labels.insert(e.label);
  CHECK(train_labels == std::set<int>{0, 1});
  CHECK(test_labels == std::set<int>{0, 1});
}

TEST_CASE("same seed twice -> identical ordering; disjoint splits") {
  test::TempDir tmp("det");
  write_toy_dataset(tmp.path());
  DatasetSplit a = load_dataset(tmp.path(), {0.75, 9});
  DatasetSplit b = load_dataset(tmp.path(), {0.75, 9});
  REQUIRE(a.train.size() == b.train.size());
  for (std::size_t i = 0; i < a.train.size(); ++i)
    CHECK(a.train[i].id == b.train[i].id);
  std::set<std::string> train_ids, test_ids;
  for (auto& e : a.train) train_ids.insert(e.id);
  for (auto& e : a.test) {
    CHECK(train_ids.count(e.id) == 0);
    test_ids.insert(e.id);
  }
  CHECK(train_ids.size() + test_ids.size() == 8);
}

TEST_CASE("manifest serialization is byte-identical for equal inputs") {
  test::TempDir tmp("bytes");
  write_toy_dataset(tmp.path());
  DatasetSplit a = load_dataset(tmp.path(), {0.5, 4});
  DatasetSplit b = load_dataset(tmp.path(), {0.5, 4});
  write_dataset_manifest(a, tmp.path() / "a.json");
  write_dataset_manifest(b, tmp.path() / "b.json");
  CHECK(read_file_bytes(tmp.path() / "a.json") ==
        read_file_bytes(tmp.path() / "b.json"));
}

TEST_CASE("documented shuffle oracle: independent replay of split indices") {
  test::TempDir tmp("oracle");
  SynthOptions opt;
  opt.classes = 10;
  opt.per_class = 12;
  opt.size = 8;
  opt.seed = 3;
  synth_dataset(tmp.path(), opt);
  const std::uint64_t seed = 7;
  DatasetSplit s = load_dataset(tmp.path(), {0.75, seed});

  // independent re-implementation: splitmix64(derive(seed, class)) +
  // fisher-yates with j = next() % (i+1), first round(0.75*n) train
  auto replay = [&](int cls) {
    std::uint64_t state =
        seed ^ (0x9E3779B97F4A7C15ull * (static_cast<std::uint64_t>(cls) + 1));
    auto next = [&state]() {
      std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
      z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
      z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
      return z ^ (z >> 31);
    };
    std::uint64_t derived = next();
    state = derived;
    std::vector<int> idx(12);
    for (int i = 0; i < 12; ++i) idx[static_cast<std::size_t>(i)] = i;
    for (std::size_t i = idx.size(); i > 1; --i)
      std::swap(idx[i - 1], idx[next() % i]);
    return idx;
  };
  for (int c = 0; c < 10; ++c) {
    auto idx = replay(c);
    std::vector<int> train(idx.begin(), idx.begin() + 9);
    std::vector<int> test(idx.begin() + 9, idx.end());
    CHECK(s.per_class[static_cast<std::size_t>(c)].train_indices == train);
    CHECK(s.per_class[static_cast<std::size_t>(c)].test_indices == test);
  }
}

TEST_CASE("select_classes: full and single selection") {
  test::TempDir tmp("sel");
  write_toy_dataset(tmp.path());
  DatasetSplit s = load_dataset(tmp.path(), {0.75, 1});

  DatasetSplit all = select_classes(s, 2, 5);
  std::set<std::string> names(all.class_names.begin(), all.class_names.end());
  CHECK(names == std::set<std::string>{"apple", "berry"});
  CHECK(all.train.size() == 6);

  DatasetSplit one = select_classes(s, 1, 5);
  CHECK(one.class_names.size() == 1);
  for (auto& e : one.train) CHECK(e.label == 0);
  for (auto& e : one.test) CHECK(e.label == 0);

  CHECK_THROWS_AS(select_classes(s, 3, 5), Error);
}

TEST_CASE("select_classes oracle: replay of the documented selection") {
  test::TempDir tmp("sel10");
  SynthOptions opt;
  opt.classes = 10;
  opt.per_class = 4;
  opt.size = 8;
  synth_dataset(tmp.path(), opt);
  DatasetSplit s = load_dataset(tmp.path(), {0.5, 1});
  const std::uint64_t seed = 42;
  DatasetSplit sel = select_classes(s, 3, seed);

  // independent replay: fisher-yates over splitmix64(seed), first 3
  std::uint64_t state = seed;
  auto next = [&state]() {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  };
  std::vector<int> idx(10);
  for (int i = 0; i < 10; ++i) idx[static_cast<std::size_t>(i)] = i;
  for (std::size_t i = idx.size(); i > 1; --i)
    std::swap(idx[i - 1], idx[next() % i]);
  std::vector<std::string> expect;
  for (int i = 0; i < 3; ++i)
    expect.push_back(s.class_names[static_cast<std::size_t>(idx[i])]);
  CHECK(sel.class_names == expect);

  // labels re-indexed to [0,k)
  int max_label = -1, min_label = 99;
  for (auto& e : sel.train) {
    max_label = std::max(max_label, e.label);
    min_label = std::min(min_label, e.label);
  }
  CHECK(min_label == 0);
  CHECK(max_label == 2);
}

TEST_CASE("normalization is idempotent and scales 8-bit input") {
  Tensor raw({2, 2, 1});
  raw[0] = 0.0; raw[1] = 51.0; raw[2] = 204.0; raw[3] = 255.0;
  Tensor n1 = normalize_pixels(raw);
  CHECK(n1[3] == doctest::Approx(1.0));
  CHECK(n1[1] == doctest::Approx(0.2));
  Tensor n2 = normalize_pixels(n1);
  CHECK(n1 == n2);
}

TEST_CASE("ingest errors: missing path, empty class, corrupt image") {
  test::TempDir tmp("err");
  try {
    load_dataset(tmp.path() / "nope", {0.75, 1});
    FAIL("expected input error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Input);
  }

  std::filesystem::create_directories(tmp.path() / "data" / "empty_class");
  try {
    load_dataset(tmp.path() / "data", {0.75, 1});
    FAIL("expected validation error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Validation);
    CHECK(std::string(e.what()).find("empty_class") != std::string::npos);
  }

  write_text_file(tmp.path() / "data" / "empty_class" / "bad.ppm",
                  "P6 not really");
  write_text_file(tmp.path() / "data" / "empty_class" / "bad2.ppm",
                  "P6 not really");
  try {
    load_dataset(tmp.path() / "data", {0.75, 1});
    FAIL("expected per-file input error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Input);
    CHECK(std::string(e.what()).find("bad") != std::string::npos);
  }
}

TEST_CASE("ppm round trip") {
  test::TempDir tmp("ppm");
  Tensor img = test::random_tensor({5, 7, 3}, 77);
  // snap to the 8-bit grid so the round trip is exact
  for (std::int64_t i = 0; i < img.size(); ++i)
    img[i] = std::round(img[i] * 255.0) / 255.0;
  img.quantize_f32();
  write_image_ppm(tmp.path() / "x.ppm", img);
  Tensor back = read_image_ppm(tmp.path() / "x.ppm");
  REQUIRE(back.dims() == img.dims());
  for (std::int64_t i = 0; i < img.size(); ++i)
    CHECK(back[i] == doctest::Approx(img[i]).epsilon(1e-6));
}

TEST_CASE("synth dataset is deterministic and learnably distinct") {
  test::TempDir tmp("synthdet");
  SynthOptions opt;
  opt.classes = 3;
  opt.per_class = 2;
  opt.size = 16;
  synth_dataset(tmp.path() / "a", opt);
  synth_dataset(tmp.path() / "b", opt);
  DatasetSplit a = load_dataset(tmp.path() / "a", {0.5, 1});
  DatasetSplit b = load_dataset(tmp.path() / "b", {0.5, 1});
  REQUIRE(a.train.size() == b.train.size());
  for (std::size_t i = 0; i < a.train.size(); ++i)
    CHECK(a.train[i].pixels == b.train[i].pixels);
}
