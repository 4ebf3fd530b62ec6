#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dcmcl/tensor.hpp"

namespace dcmcl {

// Label-smoothed NLL averaged over the selected rows:
//   (1 - eps) * -log p(gold) + eps * mean_v(-log p(v)).
// gold has one entry per row of log_probs; rows picks which rows count.
// An empty selection yields a constant 0 with no gradient.
template <typename S>
Var<S> nll(Var<S> log_probs, std::span<const int> gold, std::span<const int> rows, double eps);

// Same objective from probabilities (log taken with the KL floor).
template <typename S>
Var<S> nll_from_probs(Var<S> probs, std::span<const int> gold, std::span<const int> rows, double eps);

// NLL of the hybrid teacher over every target position.
template <typename S>
Var<S> hybrid_nll(Var<S> log_probs_hyb, std::span<const int> gold, std::span<const int> rows, double eps,
                  bool hybrid_enabled) {
  if (!hybrid_enabled) throw std::logic_error("hybrid_nll: hybrid teacher is disabled");
  return nll(log_probs_hyb, gold, rows, eps);
}

// Mean over rows of D_KL(stopgrad(target_i) || student_i).
template <typename S>
Var<S> mutual_kl(Var<S> target, Var<S> student, std::span<const int> rows);

template <typename S>
struct LossPair {
  Var<S> ar;
  Var<S> nar;
};

// tml_ar = mean D_KL(sg(p_nar) || p_ar), tml_nar = mean D_KL(sg(p_ar) || p_nar)
// over the mutual-learning rows.
template <typename S>
LossPair<S> tml_pair(Var<S> p_ar, Var<S> p_nar, std::span<const int> rows);

// Mean of the rows of h that belong to each sentence: h is packed
// (batch * padded_len) x d, the result batch x d. Padding rows are skipped.
template <typename S>
Var<S> sentence_means(Var<S> h, Index padded_len, std::span<const Index> lengths);

// In-batch contrastive loss with cosine similarity and no temperature:
//   -1/B sum_b log softmax_i(sim(query_b, keys_i))[b]
template <typename S>
Var<S> contrastive(Var<S> queries, Var<S> keys, bool detach_keys);

// scl_ar queries with AR means against NAR means, scl_nar the reverse.
template <typename S>
LossPair<S> scl_pair(Var<S> hbar_ar, Var<S> hbar_nar);

enum class ObjectiveMode { dcmcl, dcmcl_hyb, ar_only, nar_only };

ObjectiveMode parse_objective(const std::string& s);
const char* to_string(ObjectiveMode m);

// Loss terms of one step. In dcmcl_hyb mode the tml_* and scl_* slots hold the
// terms computed against the hybrid teacher.
template <typename T>
struct Components {
  std::optional<T> ml_ar, ml_nar, ml_hyb;
  std::optional<T> tml_ar, tml_nar;
  std::optional<T> scl_ar, scl_nar;
  std::optional<T> length;
};

struct LossWeights {
  double tml = 1.0;
  double scl = 1.0;
  double length = 0.1;
};

namespace detail {
inline double plus(double a, double b) { return a + b; }
inline double times(double w, double a) { return w * a; }
template <typename S>
Var<S> plus(Var<S> a, Var<S> b) {
  return add(a, b);
}
template <typename S>
Var<S> times(double w, Var<S> a) {
  return scale(a, static_cast<S>(w));
}
}  // namespace detail

// Weighted objective:
//   dcmcl     : (ml_ar + ml_nar) + l_tml (tml_ar + tml_nar) + l_scl (scl_ar + scl_nar)
//   dcmcl_hyb : as dcmcl with ml_hyb added to the NLL group
//   ar_only   : ml_ar          nar_only: ml_nar
// Mutual and contrastive terms are required only when their weight is
// nonzero. A present length term is added with its weight.
// Works for plain numbers and for tape variables.
template <typename T>
T compose(const Components<T>& c, const LossWeights& w, ObjectiveMode mode) {
  auto need = [](const std::optional<T>& v, const char* name) -> const T& {
    if (!v) throw std::invalid_argument(std::string("compose: missing component ") + name);
    return *v;
  };
  T total = [&]() -> T {
    switch (mode) {
      case ObjectiveMode::ar_only: return need(c.ml_ar, "ml_ar");
      case ObjectiveMode::nar_only: return need(c.ml_nar, "ml_nar");
      case ObjectiveMode::dcmcl: return detail::plus(need(c.ml_ar, "ml_ar"), need(c.ml_nar, "ml_nar"));
      case ObjectiveMode::dcmcl_hyb:
        return detail::plus(detail::plus(need(c.ml_ar, "ml_ar"), need(c.ml_nar, "ml_nar")), need(c.ml_hyb, "ml_hyb"));
    }
    throw std::logic_error("compose: unknown mode");
  }();
  if (mode == ObjectiveMode::dcmcl || mode == ObjectiveMode::dcmcl_hyb) {
    if (w.tml != 0.0) {
      total = detail::plus(total, detail::times(w.tml, detail::plus(need(c.tml_ar, "tml_ar"), need(c.tml_nar, "tml_nar"))));
    }
    if (w.scl != 0.0) {
      total = detail::plus(total, detail::times(w.scl, detail::plus(need(c.scl_ar, "scl_ar"), need(c.scl_nar, "scl_nar"))));
    }
  }
  if (c.length && w.length != 0.0) total = detail::plus(total, detail::times(w.length, *c.length));
  return total;
}

// Scalar record of one step for logging and invariant checks.
struct LossBundle {
  Components<double> parts;
  LossWeights weights;
  ObjectiveMode mode = ObjectiveMode::dcmcl;
  double total = 0.0;
};

}  // namespace dcmcl
