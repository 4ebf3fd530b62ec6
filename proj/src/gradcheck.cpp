#include "dcmcl/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace dcmcl {

namespace {

double evaluate(const Objective& f, const std::vector<Mat<double>>& frozen) {
  Tape<double> tape(false);
  tape.replay_detached(&frozen);
  const double v = f(tape).item();
  if (!std::isfinite(v)) throw std::runtime_error("non-finite objective");
  return v;
}

}  // namespace

GradCheckResult grad_check(const Objective& f, std::span<Parameter<double>* const> leaves, double eps,
                           std::size_t max_per_leaf, Stencil stencil) {
  for (Parameter<double>* p : leaves) p->zero_grad();
  std::vector<Mat<double>> frozen;
  {
    Tape<double> tape;
    tape.record_detached(&frozen);
    Var<double> loss = f(tape);
    if (!std::isfinite(loss.item())) throw std::runtime_error("non-finite objective");
    tape.backward(loss);
  }

  GradCheckResult result;
  for (Parameter<double>* p : leaves) {
    const Index n = p->value.size();
    const Index stride = (max_per_leaf == 0 || static_cast<Index>(max_per_leaf) >= n)
                             ? 1
                             : n / static_cast<Index>(max_per_leaf);
    for (Index i = 0; i < n; i += stride) {
      double& x = p->value.data()[i];
      const double saved = x;
      auto quotient = [&](double h) {
        x = saved + h;
        const double up = evaluate(f, frozen);
        x = saved - h;
        const double down = evaluate(f, frozen);
        x = saved;
        return (up - down) / (2.0 * h);
      };
      const double coarse = quotient(eps);
      const double numeric = stencil == Stencil::central ? coarse : (4.0 * quotient(eps / 2) - coarse) / 3.0;
      const double analytic = p->grad.data()[i];
      const double abs_err = std::abs(analytic - numeric);
      const double rel_err = abs_err / std::max(1e-8, std::abs(analytic) + std::abs(numeric));
      result.max_abs_error = std::max(result.max_abs_error, abs_err);
      if (rel_err > result.max_rel_error || result.n_checked == 0) {
        result.max_rel_error = rel_err;
        result.worst_leaf = p->name;
        result.worst_index = i;
        result.worst_analytic = analytic;
        result.worst_numeric = numeric;
      }
      ++result.n_checked;
    }
  }
  return result;
}

}  // namespace dcmcl
