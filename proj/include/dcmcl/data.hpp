#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "dcmcl/decoding.hpp"
#include "dcmcl/model.hpp"
#include "dcmcl/rng.hpp"

namespace dcmcl {

using Sentence = std::vector<int>;

// Aligned sentence pairs over a closed integer vocabulary of vocab_size ids,
// the first kFirstWord of which are reserved.
struct ParallelCorpus {
  int vocab_size = 0;
  std::vector<Sentence> src;
  std::vector<Sentence> tgt;

  std::size_t size() const { return src.size(); }
  void validate() const;
};

// Tokens are written as their decimal ids.
Sentence parse_sentence(const std::string& line, int vocab_size);
std::string format_sentence(std::span<const int> s);

// <prefix>.src / <prefix>.tgt, one sentence per line.
ParallelCorpus read_corpus(const std::filesystem::path& prefix, int vocab_size);
void write_corpus(const std::filesystem::path& prefix, const ParallelCorpus& corpus);
std::vector<Sentence> read_sentences(const std::filesystem::path& path, int vocab_size);
void write_sentences(const std::filesystem::path& path, std::span<const Sentence> sentences);

enum class Task { copy, reverse, lexicon };

Task parse_task(const std::string& s);
const char* to_string(Task t);

// Bijection over real ids: table[v] for v >= kFirstWord; specials map to themselves.
std::vector<int> lexicon_table(int vocab_size, Rng& rng);

// Dictionary image, then adjacent pairs at even offsets swapped.
Sentence lexicon_translate(std::span<const int> src, std::span<const int> table);

// Sentence lengths are uniform in [min_len, max_len]; tokens uniform over the
// real vocabulary. The lexicon dictionary is drawn first from rng.
ParallelCorpus gen_synthetic(Task task, int n_pairs, int vocab_size, int min_len, int max_len, int model_max_len,
                             Rng& rng);

struct Batch {
  std::vector<std::size_t> indices;  // into the corpus
  std::vector<Sentence> src;
  std::vector<Sentence> tgt;

  std::size_t size() const { return indices.size(); }
};

// Sorts by length, then fills batches greedily while the sum of
// max(|src|, |tgt|) stays within budget. With shuffle the batch order is
// permuted.
std::vector<Batch> batch_by_tokens(const ParallelCorpus& corpus, int budget, Rng& rng, bool shuffle);

struct DistillReport {
  ParallelCorpus corpus;
  std::size_t empty_replaced = 0;
  std::size_t truncated = 0;
};

// Replaces every target by the teacher's beam-search output.
template <typename S>
DistillReport distill(const Model<S>& teacher, const ParallelCorpus& corpus, const DecodeConfig& config);

}  // namespace dcmcl
