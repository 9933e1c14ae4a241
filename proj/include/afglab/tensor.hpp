#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace afg {

// Dense row-major tensor of doubles, rank 1..4. Images and feature maps use
// (H, W, C) order so a (H*W, C) matrix view of a feature map is just a
// reinterpretation of the same buffer.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> dims);

  static Tensor zeros(std::vector<int> dims) { return Tensor(std::move(dims)); }
  static Tensor full(std::vector<int> dims, double value);

  int rank() const { return static_cast<int>(dims_.size()); }
  const std::vector<int>& dims() const { return dims_; }
  int dim(int i) const { return dims_[static_cast<std::size_t>(i)]; }
  std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }
  bool same_shape(const Tensor& o) const { return dims_ == o.dims_; }
  std::string shape_str() const;

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& raw() { return data_; }
  const std::vector<double>& raw() const { return data_; }

  double& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
  double operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

  // (H, W, C) accessors for rank-3 tensors.
  double& at(int y, int x, int c) {
    return data_[static_cast<std::size_t>((y * dims_[1] + x) * dims_[2] + c)];
  }
  double at(int y, int x, int c) const {
    return data_[static_cast<std::size_t>((y * dims_[1] + x) * dims_[2] + c)];
  }

  double min() const;
  double max() const;
  double sum() const;
  double abs_max() const;
  double norm() const;  // Euclidean over all elements
  bool all_finite() const;
  bool all_nonneg() const;

  void fill(double v);
  void clamp(double lo, double hi);
  void scale(double s);
  void add_scaled(const Tensor& other, double s);  // *this += s * other

  // Round every element through IEEE float32. Applied to anything that is
  // persisted, so serialize/deserialize is the identity.
  void quantize_f32();

  Tensor reshaped(std::vector<int> dims) const;

  bool operator==(const Tensor& o) const {
    return dims_ == o.dims_ && data_ == o.data_;
  }

 private:
  std::vector<int> dims_;
  std::vector<double> data_;
};

struct Shape3 {
  int h = 0, w = 0, c = 0;
  bool operator==(const Shape3&) const = default;
  std::int64_t count() const { return std::int64_t(h) * w * c; }
  std::string str() const;
};

}  // namespace afg
