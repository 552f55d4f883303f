#include "nimbus/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace nimbus {

std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

std::int64_t shape_numel(const Shape& s) {
  std::int64_t n = 1;
  for (int e : s) {
    NIMBUS_CHECK(e >= 0, "negative extent in shape " + shape_str(s));
    n *= e;
  }
  return n;
}

Tensor::Tensor(Shape shape) : shape_(std::move(shape)) {
  data_.assign(static_cast<std::size_t>(shape_numel(shape_)), 0.0);
}

Tensor::Tensor(Shape shape, double fill) : Tensor(std::move(shape)) {
  std::fill(data_.begin(), data_.end(), fill);
}

Tensor Tensor::scalar(double v) {
  Tensor t{Shape{}};
  t.data_.assign(1, v);
  return t;
}

Tensor Tensor::from(Shape shape, std::initializer_list<double> vals) {
  Tensor t(std::move(shape));
  NIMBUS_CHECK(static_cast<std::size_t>(t.size()) == vals.size(),
               "initializer length does not match shape " + shape_str(t.shape()));
  std::copy(vals.begin(), vals.end(), t.data_.begin());
  return t;
}

bool Tensor::all_finite() const {
  for (double v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

double Tensor::sum() const {
  double s = 0.0;
  for (double v : data_) s += v;
  return s;
}

double Tensor::min() const {
  double m = data_.empty() ? 0.0 : data_[0];
  for (double v : data_) m = std::min(m, v);
  return m;
}

double Tensor::max() const {
  double m = data_.empty() ? 0.0 : data_[0];
  for (double v : data_) m = std::max(m, v);
  return m;
}

Tensor& Tensor::operator+=(const Tensor& o) {
  NIMBUS_CHECK(same_shape(o), "shape mismatch in += " + shape_str(shape_));
  for (std::int64_t i = 0; i < size(); ++i) data_[static_cast<std::size_t>(i)] += o[i];
  return *this;
}

Tensor& Tensor::operator*=(double c) {
  for (double& v : data_) v *= c;
  return *this;
}

Tensor random_uniform(const Shape& shape, const CounterRng& rng, std::uint64_t stream,
                      double lo, double hi) {
  Tensor t(shape);
  for (std::int64_t i = 0; i < t.size(); ++i)
    t[i] = lo + (hi - lo) * rng.uniform(stream, static_cast<std::uint64_t>(i));
  return t;
}

Tensor random_normal(const Shape& shape, const CounterRng& rng, std::uint64_t stream,
                     double stddev) {
  Tensor t(shape);
  for (std::int64_t i = 0; i < t.size(); ++i)
    t[i] = stddev * rng.normal(stream, static_cast<std::uint64_t>(i));
  return t;
}

double CounterRng::normal(std::uint64_t a, std::uint64_t b, std::uint64_t c,
                          std::uint64_t d) const {
  double u1 = uniform(a, b, c, hash_combine(d, 0x5bf03635ULL));
  double u2 = uniform(a, b, c, hash_combine(d, 0x2545f491ULL));
  u1 = std::max(u1, 0x1.0p-60);  // keep log() finite
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t h) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string format_double(double v) {
  char buf[40];
  // shortest representation that round-trips a double
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  double back = 0.0;
  std::sscanf(buf, "%lf", &back);
  for (int prec = 1; prec < 17; ++prec) {
    char shorter[40];
    std::snprintf(shorter, sizeof(shorter), "%.*g", prec, v);
    std::sscanf(shorter, "%lf", &back);
    if (back == v) return shorter;
  }
  return buf;
}

}  // namespace nimbus
