#include "dcmcl/losses.hpp"

#include <numeric>
#include <stdexcept>

namespace dcmcl {

template <typename S>
Var<S> nll(Var<S> log_probs, std::span<const int> gold, std::span<const int> rows, double eps) {
  if (static_cast<Index>(gold.size()) != log_probs.rows()) throw std::invalid_argument("nll: one gold id per row");
  if (eps < 0.0 || eps >= 1.0) throw std::invalid_argument("nll: smoothing must be in [0, 1)");
  if (rows.empty()) return log_probs.tape->scalar(S(0));
  std::vector<int> picked_gold;
  picked_gold.reserve(rows.size());
  for (int r : rows) {
    if (r < 0 || r >= log_probs.rows()) throw std::out_of_range("nll: row out of range");
    picked_gold.push_back(gold[static_cast<std::size_t>(r)]);
  }
  Var<S> sel = gather_rows(log_probs, rows);
  const S inv_n = S(1) / static_cast<S>(rows.size());
  Var<S> gold_term = scale(sum(pick(sel, std::span<const int>(picked_gold))), static_cast<S>(-(1.0 - eps)) * inv_n);
  if (eps == 0.0) return gold_term;
  Var<S> smooth_term = scale(sum(mean_cols(sel)), static_cast<S>(-eps) * inv_n);
  return add(gold_term, smooth_term);
}

template <typename S>
Var<S> nll_from_probs(Var<S> probs, std::span<const int> gold, std::span<const int> rows, double eps) {
  return nll(log_floor(probs), gold, rows, eps);
}

template <typename S>
Var<S> mutual_kl(Var<S> target, Var<S> student, std::span<const int> rows) {
  if (rows.empty()) return student.tape->scalar(S(0));
  Var<S> kl = kl_rows(gather_rows(detach(target), rows), gather_rows(student, rows), true);
  return scale(sum(kl), S(1) / static_cast<S>(rows.size()));
}

template <typename S>
LossPair<S> tml_pair(Var<S> p_ar, Var<S> p_nar, std::span<const int> rows) {
  return {mutual_kl(p_nar, p_ar, rows), mutual_kl(p_ar, p_nar, rows)};
}

template <typename S>
Var<S> sentence_means(Var<S> h, Index padded_len, std::span<const Index> lengths) {
  const auto batch = static_cast<Index>(lengths.size());
  if (h.rows() != batch * padded_len) throw std::invalid_argument("sentence_means: packed shape mismatch");
  Mat<S> pool = Mat<S>::Zero(batch, batch * padded_len);
  for (Index b = 0; b < batch; ++b) {
    const Index n = lengths[static_cast<std::size_t>(b)];
    if (n < 1 || n > padded_len) throw std::invalid_argument("sentence_means: bad length");
    pool.block(b, b * padded_len, 1, n).setConstant(S(1) / static_cast<S>(n));
  }
  return matmul(h.tape->constant(std::move(pool)), h);
}

template <typename S>
Var<S> contrastive(Var<S> queries, Var<S> keys, bool detach_keys) {
  const Index batch = queries.rows();
  if (batch == 0) throw std::invalid_argument("contrastive: empty batch");
  if (keys.rows() != batch) throw std::invalid_argument("contrastive: query and key counts differ");
  Var<S> sims = pairwise_cosine(queries, detach_keys ? detach(keys) : keys);
  std::vector<int> diag(static_cast<std::size_t>(batch));
  std::iota(diag.begin(), diag.end(), 0);
  Var<S> logp = pick(log_softmax_rows(sims), std::span<const int>(diag));
  return scale(sum(logp), S(-1) / static_cast<S>(batch));
}

template <typename S>
LossPair<S> scl_pair(Var<S> hbar_ar, Var<S> hbar_nar) {
  return {contrastive(hbar_ar, hbar_nar, false), contrastive(hbar_nar, hbar_ar, false)};
}

ObjectiveMode parse_objective(const std::string& s) {
  if (s == "dcmcl") return ObjectiveMode::dcmcl;
  if (s == "dcmcl_hyb" || s == "dcmcl-hyb" || s == "hyb") return ObjectiveMode::dcmcl_hyb;
  if (s == "ar_only" || s == "ar-only" || s == "ar") return ObjectiveMode::ar_only;
  if (s == "nar_only" || s == "nar-only" || s == "nar") return ObjectiveMode::nar_only;
  throw std::invalid_argument("unknown objective '" + s + "' (expected dcmcl|dcmcl_hyb|ar_only|nar_only)");
}

const char* to_string(ObjectiveMode m) {
  switch (m) {
    case ObjectiveMode::dcmcl: return "dcmcl";
    case ObjectiveMode::dcmcl_hyb: return "dcmcl_hyb";
    case ObjectiveMode::ar_only: return "ar_only";
    case ObjectiveMode::nar_only: return "nar_only";
  }
  return "?";
}

#define DCMCL_INSTANTIATE_LOSSES(S)                                                                 \
  template Var<S> nll(Var<S>, std::span<const int>, std::span<const int>, double);                  \
  template Var<S> nll_from_probs(Var<S>, std::span<const int>, std::span<const int>, double);       \
  template Var<S> mutual_kl(Var<S>, Var<S>, std::span<const int>);                                  \
  template LossPair<S> tml_pair(Var<S>, Var<S>, std::span<const int>);                              \
  template Var<S> sentence_means(Var<S>, Index, std::span<const Index>);                            \
  template Var<S> contrastive(Var<S>, Var<S>, bool);                                                \
  template LossPair<S> scl_pair(Var<S>, Var<S>);

DCMCL_INSTANTIATE_LOSSES(float)
DCMCL_INSTANTIATE_LOSSES(double)

#undef DCMCL_INSTANTIATE_LOSSES

}  // namespace dcmcl
