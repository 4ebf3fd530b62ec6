#pragma once

#include <functional>
#include <span>
#include <string>

#include "dcmcl/tensor.hpp"

namespace dcmcl {

struct GradCheckResult {
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t n_checked = 0;
  // Element with the largest relative error.
  std::string worst_leaf;
  Index worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

// Builds the objective on the given tape. Leaves must enter the graph through
// tape.param(), so perturbing Parameter::value perturbs the objective.
using Objective = std::function<Var<double>(Tape<double>&)>;

// central: (f(x + eps) - f(x - eps)) / (2 eps).
// richardson: (4 D(eps / 2) - D(eps)) / 3 over the central quotient D.
enum class Stencil { central, richardson };

// Compares tape gradients against finite differences for every element of
// every leaf.
// Relative error is |analytic - numeric| / max(1e-8, |analytic| + |numeric|).
// Stop-gradient values are held at their unperturbed values.
// At most max_per_leaf elements per leaf are probed (0 = all), spread evenly.
GradCheckResult grad_check(const Objective& f, std::span<Parameter<double>* const> leaves, double eps,
                           std::size_t max_per_leaf = 0, Stencil stencil = Stencil::central);

}  // namespace dcmcl
