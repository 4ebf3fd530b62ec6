#pragma once

#include <span>
#include <string>
#include <vector>

#include "dcmcl/rng.hpp"
#include "dcmcl/tensor.hpp"

namespace dcmcl {

// Partition of target positions for one sentence.
//   observed  Y_o : tokens shown to the NAR decoder
//   masked    Y_m : tokens the NAR decoder predicts
//   mutual    Y_ml: positions where the AR and NAR distributions are matched
// contexts is non-empty only for per-position (DisCo) plans, where
// contexts[i] lists the positions visible to position i.
struct MaskPlan {
  int n_target = 0;
  std::vector<int> observed;
  std::vector<int> masked;
  std::vector<int> mutual;
  std::vector<std::vector<int>> contexts;

  bool per_position() const { return !contexts.empty(); }
  // Throws std::logic_error when the partition invariants fail.
  void validate() const;
};

enum class MaskStrategy { cmlm, fixed_ratio, disco };

MaskStrategy parse_mask_strategy(const std::string& s);
const char* to_string(MaskStrategy s);

// n ~ Uniform{1..n_target} positions masked without replacement; Y_ml = Y_m.
MaskPlan cmlm_mask(int n_target, Rng& rng);

// |Y_m| = max(1, round(ratio * n_target)) for ratio > 0; ratio 0 masks nothing.
MaskPlan fixed_ratio_mask(int n_target, double ratio, Rng& rng);

// For each position an independent random subset of the other positions
// (size uniform in 0..n_target-1, then a uniform subset of that size).
std::vector<std::vector<int>> disco_contexts(int n_target, Rng& rng);

// Per-position plan: every position predicted, Y_ml = all positions.
MaskPlan disco_plan(int n_target, Rng& rng);

MaskPlan make_plan(MaskStrategy strategy, int n_target, double ratio, Rng& rng);

// Visibility matrix (padded_len x padded_len) for a per-position plan.
BoolMat context_visibility(const MaskPlan& plan, Index padded_len);

enum class Selection { all, random, high_inter, high_union, low_inter, low_union };

Selection parse_selection(const std::string& s);
const char* to_string(Selection s);

// Reduces plan.mutual by confidence. conf_ar[k] and conf_nar[k] are the gold
// token probabilities at position plan.mutual[k].
//   high-inter: score min(ar, nar), keep the highest
//   high-union: score max(ar, nar), keep the highest
//   low-inter : score max(ar, nar), keep the lowest
//   low-union : score min(ar, nar), keep the lowest
// Keeps ceil(fraction * |Y_ml|) positions (all: unchanged); ties go to the
// lower position. Result is sorted.
std::vector<int> select_confidence(const MaskPlan& plan, std::span<const double> conf_ar,
                                   std::span<const double> conf_nar, Selection strategy, double fraction, Rng& rng);

}  // namespace dcmcl
