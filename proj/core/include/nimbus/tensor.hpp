#pragma once

#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "nimbus/common.hpp"

namespace nimbus {

using Shape = std::vector<int>;

std::string shape_str(const Shape& s);
std::int64_t shape_numel(const Shape& s);

// Dense row-major tensor of doubles. All model math runs in 64-bit; 32-bit
// is only a storage option at the TNSR1 serialization boundary.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape);
  Tensor(Shape shape, double fill);

  static Tensor scalar(double v);
  static Tensor from(Shape shape, std::initializer_list<double> vals);

  const Shape& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
  std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  double& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
  double operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

  // index helpers for the common ranks
  double& at2(int a, int b) { return data_[static_cast<std::size_t>(a) * shape_[1] + b]; }
  double at2(int a, int b) const { return data_[static_cast<std::size_t>(a) * shape_[1] + b]; }
  double& at3(int a, int b, int c) {
    return data_[(static_cast<std::size_t>(a) * shape_[1] + b) * shape_[2] + c];
  }
  double at3(int a, int b, int c) const {
    return data_[(static_cast<std::size_t>(a) * shape_[1] + b) * shape_[2] + c];
  }
  double& at4(int a, int b, int c, int d) {
    return data_[((static_cast<std::size_t>(a) * shape_[1] + b) * shape_[2] + c) * shape_[3] + d];
  }
  double at4(int a, int b, int c, int d) const {
    return data_[((static_cast<std::size_t>(a) * shape_[1] + b) * shape_[2] + c) * shape_[3] + d];
  }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
  bool all_finite() const;

  void fill(double v);
  double sum() const;
  double min() const;
  double max() const;

  Tensor& operator+=(const Tensor& o);
  Tensor& operator*=(double c);

 private:
  Shape shape_;
  std::vector<double> data_;
};

// uniform in [lo, hi), element i keyed by (stream, i)
Tensor random_uniform(const Shape& shape, const CounterRng& rng, std::uint64_t stream,
                      double lo = 0.0, double hi = 1.0);
Tensor random_normal(const Shape& shape, const CounterRng& rng, std::uint64_t stream,
                     double stddev = 1.0);

}  // namespace nimbus
