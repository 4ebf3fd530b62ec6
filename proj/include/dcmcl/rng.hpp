#pragma once

#include <cstdint>
#include <random>
#include <sstream>
#include <string>

namespace dcmcl {

// Single source of randomness for a run. Everything that draws (init, dropout,
// masking, shuffling) takes an Rng& so a run replays exactly from its seed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }

  double normal(double mean = 0.0, double stddev = 1.0) {
    return std::normal_distribution<double>(mean, stddev)(engine_);
  }

  // Normal truncated to [-2*stddev, 2*stddev] by redraw.
  double truncated_normal(double stddev) {
    for (;;) {
      const double x = normal(0.0, stddev);
      if (x >= -2.0 * stddev && x <= 2.0 * stddev) return x;
    }
  }

  // Uniform integer in [lo, hi].
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    return std::uniform_int_distribution<std::int64_t>(lo, hi)(engine_);
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Derives an independent stream, e.g. one per data worker.
  Rng fork() { return Rng(engine_()); }

  std::mt19937_64& engine() { return engine_; }

  std::string state() const {
    std::ostringstream os;
    os << engine_;
    return os.str();
  }

  void set_state(const std::string& s) {
    std::istringstream is(s);
    is >> engine_;
  }

  friend bool operator==(const Rng& a, const Rng& b) { return a.engine_ == b.engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace dcmcl
