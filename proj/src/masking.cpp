#include "dcmcl/masking.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace dcmcl {

namespace {

// k distinct positions from 0..n-1, uniformly, sorted.
std::vector<int> sample_positions(int n, int k, Rng& rng) {
  std::vector<int> all(static_cast<std::size_t>(n));
  std::iota(all.begin(), all.end(), 0);
  // Partial Fisher-Yates.
  for (int i = 0; i < k; ++i) {
    const auto j = static_cast<std::size_t>(rng.uniform_int(i, n - 1));
    std::swap(all[static_cast<std::size_t>(i)], all[j]);
  }
  std::vector<int> picked(all.begin(), all.begin() + k);
  std::sort(picked.begin(), picked.end());
  return picked;
}

MaskPlan plan_from_masked(int n_target, std::vector<int> masked) {
  MaskPlan plan;
  plan.n_target = n_target;
  plan.masked = std::move(masked);
  plan.mutual = plan.masked;
  std::size_t k = 0;
  for (int i = 0; i < n_target; ++i) {
    if (k < plan.masked.size() && plan.masked[k] == i) {
      ++k;
    } else {
      plan.observed.push_back(i);
    }
  }
  return plan;
}

}  // namespace

void MaskPlan::validate() const {
  auto sorted_unique_in_range = [this](const std::vector<int>& v) {
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (v[i] < 0 || v[i] >= n_target) return false;
      if (i > 0 && v[i] <= v[i - 1]) return false;
    }
    return true;
  };
  if (!sorted_unique_in_range(observed) || !sorted_unique_in_range(masked) || !sorted_unique_in_range(mutual)) {
    throw std::logic_error("mask plan: index sets must be sorted, unique and in range");
  }
  if (observed.size() + masked.size() != static_cast<std::size_t>(n_target)) {
    throw std::logic_error("mask plan: observed and masked must partition the target");
  }
  std::vector<int> both;
  std::set_intersection(observed.begin(), observed.end(), masked.begin(), masked.end(), std::back_inserter(both));
  if (!both.empty()) throw std::logic_error("mask plan: observed and masked overlap");
  if (per_position()) {
    if (static_cast<int>(mutual.size()) != n_target) throw std::logic_error("mask plan: per-position plans learn on all positions");
    if (static_cast<int>(contexts.size()) != n_target) throw std::logic_error("mask plan: one context per position");
    for (int i = 0; i < n_target; ++i) {
      for (int j : contexts[static_cast<std::size_t>(i)]) {
        if (j == i || j < 0 || j >= n_target) throw std::logic_error("mask plan: invalid context entry");
      }
    }
  } else if (!std::includes(masked.begin(), masked.end(), mutual.begin(), mutual.end())) {
    throw std::logic_error("mask plan: mutual set must lie inside the masked set");
  }
}

MaskStrategy parse_mask_strategy(const std::string& s) {
  if (s == "cmlm") return MaskStrategy::cmlm;
  if (s == "fixed" || s == "fixed_ratio" || s == "fixed-ratio") return MaskStrategy::fixed_ratio;
  if (s == "disco") return MaskStrategy::disco;
  throw std::invalid_argument("unknown mask strategy '" + s + "' (expected cmlm|fixed|disco)");
}

const char* to_string(MaskStrategy s) {
  switch (s) {
    case MaskStrategy::cmlm: return "cmlm";
    case MaskStrategy::fixed_ratio: return "fixed";
    case MaskStrategy::disco: return "disco";
  }
  return "?";
}

MaskPlan cmlm_mask(int n_target, Rng& rng) {
  if (n_target < 1) throw std::invalid_argument("cmlm_mask: n_target must be >= 1");
  const int n = static_cast<int>(rng.uniform_int(1, n_target));
  return plan_from_masked(n_target, sample_positions(n_target, n, rng));
}

MaskPlan fixed_ratio_mask(int n_target, double ratio, Rng& rng) {
  if (n_target < 1) throw std::invalid_argument("fixed_ratio_mask: n_target must be >= 1");
  if (!(ratio >= 0.0 && ratio <= 1.0)) throw std::invalid_argument("fixed_ratio_mask: ratio must be in [0, 1]");
  if (ratio == 0.0) return plan_from_masked(n_target, {});
  const int k = std::clamp(static_cast<int>(std::lround(ratio * n_target)), 1, n_target);
  return plan_from_masked(n_target, sample_positions(n_target, k, rng));
}

std::vector<std::vector<int>> disco_contexts(int n_target, Rng& rng) {
  if (n_target < 1) throw std::invalid_argument("disco_contexts: n_target must be >= 1");
  std::vector<std::vector<int>> contexts(static_cast<std::size_t>(n_target));
  for (int i = 0; i < n_target; ++i) {
    const int size = static_cast<int>(rng.uniform_int(0, n_target - 1));
    std::vector<int> picked = sample_positions(n_target - 1, size, rng);
    // Map 0..n-2 onto the positions other than i.
    for (int& j : picked)
      if (j >= i) ++j;
    contexts[static_cast<std::size_t>(i)] = std::move(picked);
  }
  return contexts;
}

MaskPlan disco_plan(int n_target, Rng& rng) {
  MaskPlan plan;
  plan.n_target = n_target;
  plan.masked.resize(static_cast<std::size_t>(n_target));
  std::iota(plan.masked.begin(), plan.masked.end(), 0);
  plan.mutual = plan.masked;
  plan.contexts = disco_contexts(n_target, rng);
  return plan;
}

MaskPlan make_plan(MaskStrategy strategy, int n_target, double ratio, Rng& rng) {
  switch (strategy) {
    case MaskStrategy::cmlm: return cmlm_mask(n_target, rng);
    case MaskStrategy::fixed_ratio: return fixed_ratio_mask(n_target, ratio, rng);
    case MaskStrategy::disco: return disco_plan(n_target, rng);
  }
  throw std::logic_error("unknown mask strategy");
}

BoolMat context_visibility(const MaskPlan& plan, Index padded_len) {
  BoolMat vis = BoolMat::Constant(padded_len, padded_len, false);
  for (int i = 0; i < plan.n_target; ++i) {
    for (int j : plan.contexts[static_cast<std::size_t>(i)]) vis(i, j) = true;
  }
  return vis;
}

Selection parse_selection(const std::string& s) {
  if (s == "all") return Selection::all;
  if (s == "random") return Selection::random;
  if (s == "high-inter" || s == "high_inter") return Selection::high_inter;
  if (s == "high-union" || s == "high_union") return Selection::high_union;
  if (s == "low-inter" || s == "low_inter") return Selection::low_inter;
  if (s == "low-union" || s == "low_union") return Selection::low_union;
  throw std::invalid_argument("unknown selection '" + s +
                              "' (expected all|random|high-inter|high-union|low-inter|low-union)");
}

const char* to_string(Selection s) {
  switch (s) {
    case Selection::all: return "all";
    case Selection::random: return "random";
    case Selection::high_inter: return "high-inter";
    case Selection::high_union: return "high-union";
    case Selection::low_inter: return "low-inter";
    case Selection::low_union: return "low-union";
  }
  return "?";
}

std::vector<int> select_confidence(const MaskPlan& plan, std::span<const double> conf_ar,
                                   std::span<const double> conf_nar, Selection strategy, double fraction, Rng& rng) {
  const std::vector<int>& pool = plan.mutual;
  if (pool.empty()) return {};
  if (strategy == Selection::all) return pool;
  if (!(fraction > 0.0 && fraction <= 1.0)) throw std::invalid_argument("select_confidence: fraction must be in (0, 1]");
  if (conf_ar.size() != pool.size() || conf_nar.size() != pool.size()) {
    throw std::invalid_argument("select_confidence: one confidence per mutual-learning position");
  }
  const auto keep = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(pool.size()) - 1e-12));

  std::vector<std::size_t> order(pool.size());
  std::iota(order.begin(), order.end(), 0);
  if (strategy == Selection::random) {
    std::vector<int> picked = sample_positions(static_cast<int>(pool.size()), static_cast<int>(keep), rng);
    std::vector<int> out;
    for (int k : picked) out.push_back(pool[static_cast<std::size_t>(k)]);
    return out;
  }

  const bool use_min = strategy == Selection::high_inter || strategy == Selection::low_union;
  const bool keep_high = strategy == Selection::high_inter || strategy == Selection::high_union;
  std::vector<double> score(pool.size());
  for (std::size_t k = 0; k < pool.size(); ++k) {
    score[k] = use_min ? std::min(conf_ar[k], conf_nar[k]) : std::max(conf_ar[k], conf_nar[k]);
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return keep_high ? score[a] > score[b] : score[a] < score[b];
  });
  std::vector<int> out;
  for (std::size_t k = 0; k < keep; ++k) out.push_back(pool[order[k]]);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace dcmcl
