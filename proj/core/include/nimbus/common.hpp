#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace nimbus {

// Error taxonomy mapped to CLI exit codes: UsageError -> 1,
// DataError -> 2, NumericError -> 3.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class UsageError : public Error {
 public:
  using Error::Error;
};
class DataError : public Error {
 public:
  using Error::Error;
};
class NumericError : public Error {
 public:
  using Error::Error;
};
class IoError : public Error {
 public:
  using Error::Error;
};

#define NIMBUS_CHECK(cond, msg)                   \
  do {                                            \
    if (!(cond)) throw ::nimbus::DataError(msg);  \
  } while (0)

#define NIMBUS_USAGE_CHECK(cond, msg)             \
  do {                                            \
    if (!(cond)) throw ::nimbus::UsageError(msg); \
  } while (0)

// splitmix64, the mixing core of the counter-based RNG used everywhere.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t hash_combine(std::uint64_t a, std::uint64_t b) {
  return splitmix64(a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2)));
}

// Counter-based deterministic RNG: any draw is a pure function of its key.
// No sequential state, so fields and time steps can be sampled out of order.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t bits(std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0,
                     std::uint64_t d = 0) const {
    return splitmix64(hash_combine(hash_combine(hash_combine(seed_, a), b),
                                   hash_combine(c, d)));
  }
  // uniform in [0,1)
  double uniform(std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0,
                 std::uint64_t d = 0) const {
    return static_cast<double>(bits(a, b, c, d) >> 11) * 0x1.0p-53;
  }
  // standard normal (Box-Muller on two decorrelated counters)
  double normal(std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0,
                std::uint64_t d = 0) const;

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
};

// FNV-1a, used for artifact content hashes in run manifests.
std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t h = 0xcbf29ce484222325ULL);

std::string format_double(double v);  // shortest round-trip decimal

}  // namespace nimbus
