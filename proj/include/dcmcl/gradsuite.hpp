#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dcmcl/config.hpp"
#include "dcmcl/gradcheck.hpp"

namespace dcmcl {

// d=8, one layer per stack, |V|=8, no dropout, hybrid head built.
TrainConfig tiny_config();

struct GradSuiteEntry {
  std::string name;
  GradCheckResult result;
};

// Finite-difference checks of every loss component, the full objective and
// the hybrid objective on a random two-sentence batch, all parameters probed.
std::vector<GradSuiteEntry> run_gradient_suite(const TrainConfig& config, std::uint64_t seed, double eps,
                                               std::size_t max_per_leaf = 0, Stencil stencil = Stencil::central);

}  // namespace dcmcl
