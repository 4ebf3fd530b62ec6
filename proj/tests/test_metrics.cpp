#include "doctest.h"

#include <algorithm>
#include <cmath>

#include "dcmcl/data.hpp"
#include "dcmcl/metrics.hpp"

using namespace dcmcl;

namespace {

using Corpus = std::vector<Sentence>;

}  // namespace

TEST_CASE("corpus_bleu examples") {
  const Corpus ref{{4, 5, 6, 7, 8}};
  CHECK(corpus_bleu(ref, ref) == doctest::Approx(100.0).epsilon(1e-12));
  CHECK(corpus_bleu(ref, ref, 4, false) == doctest::Approx(100.0).epsilon(1e-12));

  // p1..p4 all 1, brevity penalty exp(1 - 5/4)
  const Corpus hyp{{4, 5, 6, 7}};
  CHECK(std::abs(corpus_bleu(hyp, ref) - 77.88) < 0.01);
  CHECK(corpus_bleu(hyp, ref) == doctest::Approx(100.0 * std::exp(-0.25)).epsilon(1e-12));

  const Corpus disjoint{{9, 10, 11, 12, 13}};
  CHECK(corpus_bleu(disjoint, ref, 4, false) == 0.0);
  CHECK(corpus_bleu(disjoint, ref, 4, true) > 0.0);

  CHECK_THROWS_AS(corpus_bleu(Corpus{}, Corpus{}), std::invalid_argument);
  CHECK_THROWS_AS(corpus_bleu(hyp, Corpus{}), std::invalid_argument);
}

TEST_CASE("corpus_bleu clipping and smoothing") {
  // Unigram 4 appears twice in the hypothesis, once in the reference.
  const Corpus ref{{4, 5, 6, 7}};
  const Corpus hyp{{4, 4, 6, 7}};
  // p1 = 3/4, p2 = 1/3 (6 7), p3 = 0/2, p4 = 0/1; smoothed 1/2 and 1/4 matches.
  const double want = 100.0 * std::exp((std::log(0.75) + std::log(1.0 / 3) + std::log(0.5 / 2) + std::log(0.25 / 1)) / 4);
  CHECK(corpus_bleu(hyp, ref) == doctest::Approx(want).epsilon(1e-12));
  CHECK(corpus_bleu(hyp, ref, 2, false) == doctest::Approx(100.0 * std::sqrt(0.75 / 3)).epsilon(1e-12));
}

TEST_CASE("corpus_bleu is permutation invariant and bounded") {
  Rng rng(1);
  Corpus hyp, ref;
  for (int i = 0; i < 40; ++i) {
    Sentence h(static_cast<std::size_t>(rng.uniform_int(1, 9))), r(static_cast<std::size_t>(rng.uniform_int(1, 9)));
    for (int& t : h) t = static_cast<int>(rng.uniform_int(4, 9));
    for (int& t : r) t = static_cast<int>(rng.uniform_int(4, 9));
    hyp.push_back(h);
    ref.push_back(r);
  }
  const double b = corpus_bleu(hyp, ref);
  CHECK(b >= 0.0);
  CHECK(b <= 100.0);
  std::vector<std::size_t> order(hyp.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (int trial = 0; trial < 5; ++trial) {
    std::shuffle(order.begin(), order.end(), rng.engine());
    Corpus h2, r2;
    for (std::size_t i : order) {
      h2.push_back(hyp[i]);
      r2.push_back(ref[i]);
    }
    CHECK(corpus_bleu(h2, r2) == b);
  }
  CHECK(corpus_bleu(hyp, ref) == b);
}

TEST_CASE("repeated_token_pct examples") {
  CHECK(repeated_token_pct(Corpus{{4, 4, 5}}) == doctest::Approx(100.0 / 3).epsilon(1e-12));
  CHECK(repeated_token_pct(Corpus{{4, 5, 6, 7}}) == 0.0);
  CHECK(repeated_token_pct(Corpus{{9, 9, 9, 9}}) == 75.0);
  CHECK(repeated_token_pct(Corpus{{9}, {9}, {9}}) == 0.0);
  // repeats never cross sentence boundaries
  CHECK(repeated_token_pct(Corpus{{4, 5}, {5, 5}}) == 25.0);
}

TEST_CASE("exact_match") {
  CHECK(exact_match(Corpus{{4}, {5, 6}}, Corpus{{4}, {6, 5}}) == 0.5);
}

TEST_CASE("hidden similarity: identical decoders without the causal mask coincide") {
  for (PositionEncoding pe : {PositionEncoding::sinusoidal, PositionEncoding::learnable}) {
    ModelConfig c;
    c.vocab_size = 16;
    c.d_model = 16;
    c.d_hidden = 24;
    c.max_len = 12;
    c.dropout = 0.0;
    c.ar_pe = c.nar_pe = pe;
    Rng rng(2);
    Model<double> m(c, rng);
    m.copy_nar_decoder_into_ar();
    Rng g(3);
    const ParallelCorpus sample = gen_synthetic(Task::lexicon, 20, 16, 2, 9, 12, g);
    std::vector<std::vector<int>> src, y;
    for (std::size_t i = 0; i < sample.size(); ++i) {
      src.push_back(sample.src[i]);
      y.push_back(sample.tgt[i]);
      y.back().push_back(kEos);
    }
    const TokenBatch s = TokenBatch::from(src), t = TokenBatch::from(y);
    Tape<double> tape(false);
    ForwardMode mode;
    mode.ar_causal = false;
    Var<double> e = m.encode(tape, s, mode);
    const Mat<double> a = m.ar_states(tape, e, s, t, mode).value();
    const Mat<double> n = m.nar_states(tape, e, s, t, mode).value();
    for (Index b = 0; b < t.batch; ++b)
      for (Index i = 0; i < t.lengths[static_cast<std::size_t>(b)]; ++i) {
        const auto u = a.row(t.row(b, i)), v = n.row(t.row(b, i));
        CHECK(u.dot(v) / (u.norm() * v.norm()) == doctest::Approx(1.0).epsilon(1e-6));
      }

    // Causal AR states differ, so the probe falls below 1 but stays a cosine.
    Rng pr(4);
    const SimilarityProbe p = hidden_similarity(m, sample, pr, 0.0);
    CHECK(p.mean_cosine < 1.0);
    CHECK(p.mean_cosine >= -1.0);
  }
}

TEST_CASE("hidden similarity of a random model is near zero") {
  ModelConfig c;
  c.vocab_size = 24;
  Rng rng(5);
  Model<double> m(c, rng);
  Rng g(6);
  const ParallelCorpus sample = gen_synthetic(Task::lexicon, 200, 24, 4, 12, 32, g);
  Rng pr(7);
  const SimilarityProbe p = hidden_similarity(m, sample, pr);
  CHECK(p.positions >= 1000);
  CHECK(std::abs(p.mean_cosine) < 0.2);
  Rng pr2(7);
  CHECK(hidden_similarity(m, sample, pr2).mean_cosine == p.mean_cosine);
}
