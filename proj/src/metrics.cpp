#include "dcmcl/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "dcmcl/masking.hpp"

namespace dcmcl {

namespace {

using NgramCounts = std::map<std::vector<int>, int>;

NgramCounts ngrams(const Sentence& s, int n) {
  NgramCounts out;
  const auto un = static_cast<std::size_t>(n);
  for (std::size_t i = 0; i + un <= s.size(); ++i) ++out[std::vector<int>(s.begin() + static_cast<long>(i), s.begin() + static_cast<long>(i + un))];
  return out;
}

}  // namespace

double corpus_bleu(std::span<const Sentence> hypotheses, std::span<const Sentence> references, int max_n,
                   bool smoothing) {
  if (hypotheses.empty()) throw std::invalid_argument("corpus_bleu: no hypotheses");
  if (hypotheses.size() != references.size()) throw std::invalid_argument("corpus_bleu: hypothesis and reference counts differ");
  if (max_n < 1) throw std::invalid_argument("corpus_bleu: max_n must be >= 1");

  std::vector<double> matches(static_cast<std::size_t>(max_n), 0.0);
  std::vector<double> totals(static_cast<std::size_t>(max_n), 0.0);
  double hyp_len = 0.0;
  double ref_len = 0.0;
  for (std::size_t s = 0; s < hypotheses.size(); ++s) {
    hyp_len += static_cast<double>(hypotheses[s].size());
    ref_len += static_cast<double>(references[s].size());
    for (int n = 1; n <= max_n; ++n) {
      const NgramCounts h = ngrams(hypotheses[s], n);
      const NgramCounts r = ngrams(references[s], n);
      for (const auto& [g, c] : h) {
        const auto it = r.find(g);
        if (it != r.end()) matches[static_cast<std::size_t>(n - 1)] += std::min(c, it->second);
        totals[static_cast<std::size_t>(n - 1)] += c;
      }
    }
  }
  if (hyp_len == 0.0) return 0.0;

  double log_p = 0.0;
  double smooth = 1.0;
  for (std::size_t k = 0; k < matches.size(); ++k) {
    double m = matches[k];
    const double t = std::max(totals[k], 1.0);
    if (m == 0.0) {
      if (!smoothing) return 0.0;
      smooth *= 2.0;
      m = 1.0 / smooth;
    }
    log_p += std::log(m / t);
  }
  const double bp = std::exp(std::min(0.0, 1.0 - ref_len / hyp_len));
  return 100.0 * bp * std::exp(log_p / static_cast<double>(max_n));
}

double repeated_token_pct(std::span<const Sentence> hypotheses) {
  std::size_t repeats = 0;
  std::size_t total = 0;
  for (const auto& h : hypotheses) {
    total += h.size();
    for (std::size_t i = 1; i < h.size(); ++i) repeats += h[i] == h[i - 1] ? 1 : 0;
  }
  if (total == 0) return 0.0;
  return 100.0 * static_cast<double>(repeats) / static_cast<double>(total);
}

double exact_match(std::span<const Sentence> hypotheses, std::span<const Sentence> references) {
  if (hypotheses.size() != references.size()) throw std::invalid_argument("exact_match: counts differ");
  if (hypotheses.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < hypotheses.size(); ++i) hits += hypotheses[i] == references[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(hypotheses.size());
}

template <typename S>
SimilarityProbe hidden_similarity(const Model<S>& model, const ParallelCorpus& sample, Rng& rng, double nar_mask_ratio,
                                  bool ar_causal) {
  std::vector<std::vector<int>> src, y_in, y_obs;
  std::vector<int> n_target;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const Sentence& y = sample.tgt[i];
    const int n = static_cast<int>(y.size()) + 1;
    src.push_back(sample.src[i]);
    std::vector<int> in{kBos};
    in.insert(in.end(), y.begin(), y.end());
    y_in.push_back(std::move(in));
    std::vector<int> obs(y.begin(), y.end());
    obs.push_back(kEos);
    for (int j : fixed_ratio_mask(n, nar_mask_ratio, rng).masked) obs[static_cast<std::size_t>(j)] = kMask;
    y_obs.push_back(std::move(obs));
    n_target.push_back(n);
  }
  SimilarityProbe probe;
  if (sample.size() == 0) return probe;

  const TokenBatch s = TokenBatch::from(src);
  const TokenBatch a = TokenBatch::from(y_in);
  const TokenBatch o = TokenBatch::from(y_obs);
  Tape<S> tape(false);
  ForwardMode mode;
  mode.ar_causal = ar_causal;
  Var<S> e_ar = model.encode(tape, s, mode);
  Var<S> e_nar = model.nar_encoder_side() == EncoderSide::ar ? e_ar : model.encode(tape, s, mode, EncoderSide::nar);
  const Mat<S> h_ar = model.ar_states(tape, e_ar, s, a, mode).value();
  const Mat<S> h_nar = model.nar_states(tape, e_nar, s, o, mode).value();

  double sum = 0.0;
  for (Index b = 0; b < s.batch; ++b) {
    for (int i = 0; i < n_target[static_cast<std::size_t>(b)]; ++i) {
      const auto u = h_ar.row(a.row(b, i)).template cast<double>();
      const auto v = h_nar.row(o.row(b, i)).template cast<double>();
      sum += u.dot(v) / (u.norm() * v.norm() + kCosineFloor);
      ++probe.positions;
    }
  }
  probe.mean_cosine = sum / static_cast<double>(probe.positions);
  return probe;
}

template SimilarityProbe hidden_similarity(const Model<float>&, const ParallelCorpus&, Rng&, double, bool);
template SimilarityProbe hidden_similarity(const Model<double>&, const ParallelCorpus&, Rng&, double, bool);

}  // namespace dcmcl
