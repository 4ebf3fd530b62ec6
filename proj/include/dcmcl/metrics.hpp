#pragma once

#include <span>
#include <vector>

#include "dcmcl/data.hpp"
#include "dcmcl/model.hpp"
#include "dcmcl/rng.hpp"

namespace dcmcl {

// Corpus BLEU in [0, 100]. With smoothing the k-th n-gram order that has no
// match gets a match count of 1/2^k.
double corpus_bleu(std::span<const Sentence> hypotheses, std::span<const Sentence> references, int max_n = 4,
                   bool smoothing = true);

// 100 * (tokens equal to their left neighbour) / (all tokens).
double repeated_token_pct(std::span<const Sentence> hypotheses);

// Fraction of hypotheses equal to their reference.
double exact_match(std::span<const Sentence> hypotheses, std::span<const Sentence> references);

struct SimilarityProbe {
  double mean_cosine = 0.0;
  std::size_t positions = 0;
};

// Mean cosine between teacher-forced AR states and NAR states (half the target
// masked) over every target position, <eos> slot included.
template <typename S>
SimilarityProbe hidden_similarity(const Model<S>& model, const ParallelCorpus& sample, Rng& rng,
                                  double nar_mask_ratio = 0.5, bool ar_causal = true);

}  // namespace dcmcl
