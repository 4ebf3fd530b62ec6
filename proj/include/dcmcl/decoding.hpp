#pragma once

#include <functional>
#include <span>
#include <vector>

#include "dcmcl/model.hpp"

namespace dcmcl {

struct DecodeConfig {
  int beam_size = 4;
  int length_beam = 5;
  int nar_iterations = 10;
  int max_decode_len = 30;
  double length_alpha = 1.0;

  void validate() const;
};

struct Hypothesis {
  std::vector<int> tokens;  // without <eos>
  double log_prob = 0.0;
  double score = 0.0;  // log_prob / length^alpha, length counting <eos> when finished
  bool finished = false;
};

// Next-token log-probabilities: one row per prefix (prefixes exclude <bos>),
// one column per vocabulary id.
using StepScorer = std::function<Mat<double>(const std::vector<std::vector<int>>& prefixes)>;

// Length-normalized beam search. <pad>, <bos> and [M] are never emitted.
// Candidates are ranked by accumulated log-probability; ties go to the lower
// token id, then the earlier beam.
Hypothesis beam_search(const StepScorer& scorer, const DecodeConfig& config);

// Argmax at every step until <eos> or max_decode_len.
Hypothesis greedy_decode(const StepScorer& scorer, const DecodeConfig& config);

template <typename S>
StepScorer ar_scorer(const Model<S>& model, std::span<const int> source);

template <typename S>
Hypothesis beam_search(const Model<S>& model, std::span<const int> source, const DecodeConfig& config);

// Number of lowest-confidence tokens re-masked after iteration t of T.
int remask_count(int n, int total_iterations, int iteration);

struct MaskPredictStep {
  int length = 0;
  int iteration = 0;
  std::vector<int> tokens;
  std::vector<double> confidence;
  std::vector<int> remasked;
};

struct NarHypothesis {
  std::vector<int> tokens;
  double score = 0.0;  // mean per-token log-probability
  int length = 0;
};

// Iterative mask-predict over the top length_beam predicted lengths. The
// decoder runs on length + 1 slots; the last slot is the <eos> slot and is
// never re-masked. Fills use the argmax over real vocabulary ids.
template <typename S>
NarHypothesis mask_predict(const Model<S>& model, std::span<const int> source, const DecodeConfig& config,
                           std::vector<MaskPredictStep>* trace = nullptr);

}  // namespace dcmcl
