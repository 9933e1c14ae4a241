#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "afglab/error.hpp"
#include "afglab/prng.hpp"
#include "afglab/serial.hpp"
#include "afglab/tensor.hpp"
#include "test_util.hpp"

using namespace afg;

TEST_CASE("splitmix64 matches the published reference sequence") {
  // First three outputs for seed 1234567, from the reference splitmix64.
  SplitMix64 g(1234567);
  CHECK(g.next() == 6457827717110365317ull);
  CHECK(g.next() == 3203168211198807973ull);
  CHECK(g.next() == 9817491932198370423ull);
}

TEST_CASE("uniform01 stays in [0,1) and is deterministic") {
  SplitMix64 a(42), b(42);
  for (int i = 0; i < 1000; ++i) {
    double v = a.uniform01();
    CHECK(v >= 0.0);
    CHECK(v < 1.0);
    CHECK(v == b.uniform01());
  }
}

TEST_CASE("fisher-yates replay oracle") {
  // Independent re-implementation of the documented shuffle rule.
  std::vector<int> xs{0, 1, 2, 3, 4, 5, 6, 7};
  SplitMix64 g(99);
  g.shuffle(xs);

  std::vector<int> ys{0, 1, 2, 3, 4, 5, 6, 7};
  std::uint64_t state = 99;
  auto next = [&state]() {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  };
  for (std::size_t i = ys.size(); i > 1; --i)
    std::swap(ys[i - 1], ys[next() % i]);
  CHECK(xs == ys);
}

TEST_CASE("tensor basics") {
  Tensor t({2, 3, 4});
  CHECK(t.size() == 24);
  CHECK(t.rank() == 3);
  t.at(1, 2, 3) = 7.5;
  CHECK(t[1 * 12 + 2 * 4 + 3] == 7.5);
  CHECK(t.max() == 7.5);
  CHECK(t.sum() == doctest::Approx(7.5));
  CHECK_THROWS_AS(Tensor({0, 2}), Error);
  CHECK_THROWS_AS(t.reshaped({5, 5}), Error);
  Tensor r = t.reshaped({24});
  CHECK(r.rank() == 1);
  CHECK(r[23] == 7.5);
}

TEST_CASE("quantize_f32 is idempotent") {
  Tensor t = test::random_tensor({17}, 3, -2.0, 2.0);
  t.quantize_f32();
  Tensor u = t;
  u.quantize_f32();
  CHECK(t == u);
}

TEST_CASE("tensor container round-trips bit-exactly") {
  test::TempDir tmp("container");
  Tensor t = test::random_tensor({3, 5, 2}, 11);
  t.quantize_f32();
  auto path = tmp.path() / "t.afgt";
  write_tensor_file(path, t);
  Tensor u = read_tensor_file(path);
  CHECK(t == u);
  // writing the reread tensor produces identical bytes
  auto b1 = read_file_bytes(path);
  write_tensor_file(tmp.path() / "u.afgt", u);
  CHECK(b1 == read_file_bytes(tmp.path() / "u.afgt"));
}

TEST_CASE("tensor container rejects truncation and corruption") {
  test::TempDir tmp("corrupt");
  Tensor t = test::random_tensor({4, 4}, 5);
  auto path = tmp.path() / "t.afgt";
  write_tensor_file(path, t);
  auto bytes = read_file_bytes(path);

  auto truncated = bytes;
  truncated.resize(bytes.size() - 6);
  write_file_bytes(tmp.path() / "trunc.afgt", truncated);
  CHECK_THROWS_WITH_AS(
      [&] { read_tensor_file(tmp.path() / "trunc.afgt"); }(),
      doctest::Contains("format error"), Error);

  auto flipped = bytes;
  flipped[14] ^= 0x40;  // payload bit flip -> CRC mismatch
  write_file_bytes(tmp.path() / "flip.afgt", flipped);
  try {
    read_tensor_file(tmp.path() / "flip.afgt");
    FAIL("expected integrity error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Integrity);
  }
}

TEST_CASE("crc32 and sha256 known answers") {
  const char* s = "123456789";
  CHECK(crc32_of(s, 9) == 0xCBF43926u);  // standard CRC-32 check value
  CHECK(sha256_hex("abc", 3) ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}
