#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <vector>

#include "dcmcl/gradcheck.hpp"
#include "dcmcl/rng.hpp"
#include "dcmcl/tensor.hpp"

namespace dcmcl::test {

inline Mat<double> random_mat(Index r, Index c, Rng& rng, double scale = 1.0) {
  Mat<double> m(r, c);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.normal();
  return m;
}

// Rows are probability vectors.
inline Mat<double> random_dist(Index r, Index c, Rng& rng) {
  Mat<double> m(r, c);
  for (Index i = 0; i < r; ++i) {
    double s = 0;
    for (Index j = 0; j < c; ++j) s += m(i, j) = std::exp(rng.normal());
    m.row(i) /= s;
  }
  return m;
}

struct Leaves {
  std::vector<std::unique_ptr<Parameter<double>>> owned;
  std::vector<Parameter<double>*> ptrs;

  Parameter<double>& add(Mat<double> v) {
    owned.push_back(std::make_unique<Parameter<double>>());
    owned.back()->name = "p" + std::to_string(owned.size());
    owned.back()->value = std::move(v);
    ptrs.push_back(owned.back().get());
    return *owned.back();
  }
};

// Weighted sum with fixed random weights so every output element matters.
inline Var<double> weighted_sum(Var<double> x, std::uint64_t seed) {
  Rng r(seed);
  return sum(mul(x, x.tape->constant(random_mat(x.rows(), x.cols(), r))));
}

inline double max_abs(const Mat<double>& a, const Mat<double>& b) { return (a - b).cwiseAbs().maxCoeff(); }

}  // namespace dcmcl::test
