#pragma once

#include <cmath>
#include <filesystem>
#include <functional>
#include <string>

#include "afglab/prng.hpp"
#include "afglab/tensor.hpp"

namespace afg::test {

inline bool close_rel(double a, double b, double tol,
                      double zero_floor = 1e-9) {
  double denom = std::max(std::abs(a), std::abs(b));
  if (denom < zero_floor) return true;  // both effectively zero
  return std::abs(a - b) / denom <= tol;
}

// Central finite difference of a scalar function at coordinate i, using the
// realized step so float32-quantized points stay exact.
inline double central_diff(const std::function<double(const Tensor&)>& f,
                           const Tensor& x, std::int64_t i, double h) {
  Tensor hi = x, lo = x;
  hi[i] += h;
  lo[i] -= h;
  return (f(hi) - f(lo)) / (hi[i] - lo[i]);
}

inline Tensor random_tensor(std::vector<int> dims, std::uint64_t seed,
                            double lo = 0.0, double hi = 1.0) {
  Tensor t(std::move(dims));
  SplitMix64 rng(seed);
  for (std::int64_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

// Unique scratch directory under the build tree.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("afglab-test-" + tag + "-" + std::to_string(counter_++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  static inline int counter_ = 0;
  std::filesystem::path path_;
};

}  // namespace afg::test
