#include "afglab/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "afglab/error.hpp"

namespace afg {

namespace {
std::int64_t checked_count(const std::vector<int>& dims) {
  if (dims.empty() || dims.size() > 4)
    fail(ErrorKind::Input, "tensor rank must be 1..4");
  std::int64_t n = 1;
  for (int d : dims) {
    if (d <= 0) fail(ErrorKind::Input, "tensor dimensions must be positive");
    n *= d;
  }
  return n;
}
}  // namespace

Tensor::Tensor(std::vector<int> dims) : dims_(std::move(dims)) {
  data_.assign(static_cast<std::size_t>(checked_count(dims_)), 0.0);
}

Tensor Tensor::full(std::vector<int> dims, double value) {
  Tensor t(std::move(dims));
  t.fill(value);
  return t;
}

std::string Tensor::shape_str() const {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < dims_.size(); ++i)
    os << dims_[i] << (i + 1 < dims_.size() ? "x" : "");
  os << ")";
  return os.str();
}

double Tensor::min() const {
  return *std::min_element(data_.begin(), data_.end());
}

double Tensor::max() const {
  return *std::max_element(data_.begin(), data_.end());
}

double Tensor::sum() const {
  return std::accumulate(data_.begin(), data_.end(), 0.0);
}

double Tensor::abs_max() const {
  double m = 0.0;
  for (double v : data_) m = std::max(m, std::abs(v));
  return m;
}

double Tensor::norm() const {
  double s = 0.0;
  for (double v : data_) s += v * v;
  return std::sqrt(s);
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](double v) { return std::isfinite(v); });
}

bool Tensor::all_nonneg() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](double v) { return v >= 0.0; });
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

void Tensor::clamp(double lo, double hi) {
  for (double& v : data_) v = std::clamp(v, lo, hi);
}

void Tensor::scale(double s) {
  for (double& v : data_) v *= s;
}

void Tensor::add_scaled(const Tensor& other, double s) {
  if (!same_shape(other))
    fail(ErrorKind::Input, "add_scaled shape mismatch " + shape_str() +
                               " vs " + other.shape_str());
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += s * other.data_[i];
}

void Tensor::quantize_f32() {
  for (double& v : data_) v = static_cast<double>(static_cast<float>(v));
}

Tensor Tensor::reshaped(std::vector<int> dims) const {
  if (checked_count(dims) != size())
    fail(ErrorKind::Input, "reshape element count mismatch");
  Tensor t;
  t.dims_ = std::move(dims);
  t.data_ = data_;
  return t;
}

std::string Shape3::str() const {
  std::ostringstream os;
  os << h << "x" << w << "x" << c;
  return os.str();
}

}  // namespace afg
