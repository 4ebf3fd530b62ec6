#include "dcmcl/decoding.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace dcmcl {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

bool banned(int id) { return id == kPad || id == kBos || id == kMask; }

double normalized(double log_prob, std::size_t length, double alpha) {
  return log_prob / std::pow(static_cast<double>(std::max<std::size_t>(length, 1)), alpha);
}

struct Candidate {
  double log_prob;
  int beam;
  int token;
};

}  // namespace

void DecodeConfig::validate() const {
  if (beam_size < 1 || length_beam < 1 || nar_iterations < 1 || max_decode_len < 1) {
    throw std::invalid_argument("decode config: sizes must be positive");
  }
  if (length_beam > max_decode_len) throw std::invalid_argument("decode config: length_beam exceeds max_decode_len");
  if (length_alpha < 0.0) throw std::invalid_argument("decode config: length_alpha must be nonnegative");
}

Hypothesis beam_search(const StepScorer& scorer, const DecodeConfig& config) {
  config.validate();
  const auto k = static_cast<std::size_t>(config.beam_size);
  std::vector<Hypothesis> beams(1);
  std::vector<Hypothesis> finished;

  for (int step = 0; step < config.max_decode_len && !beams.empty(); ++step) {
    std::vector<std::vector<int>> prefixes;
    prefixes.reserve(beams.size());
    for (const auto& b : beams) prefixes.push_back(b.tokens);
    const Mat<double> lp = scorer(prefixes);
    if (lp.rows() != static_cast<Index>(beams.size())) throw std::logic_error("beam_search: scorer row count");

    std::vector<Candidate> cands;
    for (std::size_t b = 0; b < beams.size(); ++b) {
      for (Index v = 0; v < lp.cols(); ++v) {
        const int id = static_cast<int>(v);
        if (banned(id) || !std::isfinite(lp(static_cast<Index>(b), v))) continue;
        cands.push_back({beams[b].log_prob + lp(static_cast<Index>(b), v), static_cast<int>(b), id});
      }
    }
    std::stable_sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
      if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
      if (a.token != b.token) return a.token < b.token;
      return a.beam < b.beam;
    });

    std::vector<Hypothesis> next;
    for (std::size_t r = 0; r < cands.size(); ++r) {
      const Candidate& c = cands[r];
      const Hypothesis& parent = beams[static_cast<std::size_t>(c.beam)];
      if (c.token == kEos) {
        // An <eos> only finalizes when it ranks within the beam.
        if (r < k) {
          Hypothesis h{parent.tokens, c.log_prob, normalized(c.log_prob, parent.tokens.size() + 1, config.length_alpha), true};
          finished.push_back(std::move(h));
        }
        continue;
      }
      if (next.size() < k) {
        Hypothesis h{parent.tokens, c.log_prob, 0.0, false};
        h.tokens.push_back(c.token);
        next.push_back(std::move(h));
      }
      if (next.size() >= k && r + 1 >= k) break;
    }
    beams = std::move(next);
    if (finished.size() >= k) break;
  }

  if (finished.empty()) {
    for (auto& b : beams) {
      b.score = normalized(b.log_prob, b.tokens.size(), config.length_alpha);
      finished.push_back(b);
    }
  }
  const auto best = std::max_element(finished.begin(), finished.end(), [](const Hypothesis& a, const Hypothesis& b) {
    return a.score < b.score;  // first maximum wins
  });
  return *best;
}

Hypothesis greedy_decode(const StepScorer& scorer, const DecodeConfig& config) {
  Hypothesis h;
  for (int step = 0; step < config.max_decode_len; ++step) {
    const Mat<double> lp = scorer({h.tokens});
    int best = -1;
    double best_lp = kNegInf;
    for (Index v = 0; v < lp.cols(); ++v) {
      if (banned(static_cast<int>(v))) continue;
      if (lp(0, v) > best_lp) {
        best_lp = lp(0, v);
        best = static_cast<int>(v);
      }
    }
    h.log_prob += best_lp;
    if (best == kEos) {
      h.finished = true;
      h.score = normalized(h.log_prob, h.tokens.size() + 1, config.length_alpha);
      return h;
    }
    h.tokens.push_back(best);
  }
  h.score = normalized(h.log_prob, h.tokens.size(), config.length_alpha);
  return h;
}

template <typename S>
StepScorer ar_scorer(const Model<S>& model, std::span<const int> source) {
  TokenBatch src = TokenBatch::from({std::vector<int>(source.begin(), source.end())});
  Mat<S> enc;
  {
    Tape<S> tape(false);
    enc = model.encode(tape, src, ForwardMode{}).value();
  }
  return [&model, src, enc](const std::vector<std::vector<int>>& prefixes) {
    const auto n = static_cast<Index>(prefixes.size());
    std::vector<std::vector<int>> inputs;
    std::vector<std::vector<int>> sources(prefixes.size(), std::vector<int>(src.ids.begin(), src.ids.end()));
    for (const auto& p : prefixes) {
      std::vector<int> in{kBos};
      in.insert(in.end(), p.begin(), p.end());
      inputs.push_back(std::move(in));
    }
    TokenBatch y_in = TokenBatch::from(inputs);
    TokenBatch srcs = TokenBatch::from(sources);
    Tape<S> tape(false);
    Var<S> e = tape.constant(enc.replicate(n, 1));
    Var<S> h = model.ar_states(tape, e, srcs, y_in, ForwardMode{});
    std::vector<int> last_rows;
    for (Index b = 0; b < n; ++b) last_rows.push_back(static_cast<int>(y_in.row(b, y_in.lengths[static_cast<std::size_t>(b)] - 1)));
    Var<S> lp = log_softmax_rows(model.logits(tape, gather_rows(h, std::span<const int>(last_rows)), OutputHead::ar));
    return Mat<double>(lp.value().template cast<double>());
  };
}

template <typename S>
Hypothesis beam_search(const Model<S>& model, std::span<const int> source, const DecodeConfig& config) {
  DecodeConfig capped = config;
  capped.max_decode_len = std::min(config.max_decode_len, model.config().max_len - 1);
  capped.length_beam = std::min(config.length_beam, capped.max_decode_len);
  return beam_search(ar_scorer(model, source), capped);
}

int remask_count(int n, int total_iterations, int iteration) {
  if (total_iterations < 1 || iteration < 1) throw std::invalid_argument("remask_count: iterations start at 1");
  if (iteration > total_iterations) throw std::invalid_argument("remask_count: iteration exceeds total");
  return static_cast<int>((static_cast<long long>(n) * (total_iterations - iteration)) / total_iterations);
}

template <typename S>
NarHypothesis mask_predict(const Model<S>& model, std::span<const int> source, const DecodeConfig& config,
                           std::vector<MaskPredictStep>* trace) {
  config.validate();
  const ModelConfig& mc = model.config();
  TokenBatch src = TokenBatch::from({std::vector<int>(source.begin(), source.end())});
  Mat<S> enc;
  Mat<double> len_lp;
  {
    Tape<S> tape(false);
    Var<S> e = model.encode(tape, src, ForwardMode{}, model.nar_encoder_side());
    enc = e.value();
    len_lp = log_softmax_rows(model.length_logits(tape, e, src)).value().template cast<double>();
  }

  // Candidate lengths: best-scoring first, ties to the shorter length.
  const int max_len = std::min(config.max_decode_len, mc.max_len - 1);
  std::vector<int> lengths(static_cast<std::size_t>(max_len));
  std::iota(lengths.begin(), lengths.end(), 1);
  std::stable_sort(lengths.begin(), lengths.end(), [&](int a, int b) { return len_lp(0, a - 1) > len_lp(0, b - 1); });
  lengths.resize(std::min<std::size_t>(lengths.size(), static_cast<std::size_t>(config.length_beam)));

  const auto n_cand = static_cast<Index>(lengths.size());
  std::vector<std::vector<int>> tokens(lengths.size());
  std::vector<std::vector<double>> logp(lengths.size());
  std::vector<std::vector<double>> conf(lengths.size());
  for (std::size_t c = 0; c < lengths.size(); ++c) {
    tokens[c].assign(static_cast<std::size_t>(lengths[c] + 1), kMask);
    logp[c].assign(static_cast<std::size_t>(lengths[c]), 0.0);
    conf[c].assign(static_cast<std::size_t>(lengths[c]), 0.0);
  }
  std::vector<std::vector<int>> sources(lengths.size(), std::vector<int>(source.begin(), source.end()));
  TokenBatch srcs = TokenBatch::from(sources);
  const int T = config.nar_iterations;

  for (int t = 1; t <= T; ++t) {
    TokenBatch y_obs = TokenBatch::from(tokens);
    Mat<double> lp;
    {
      Tape<S> tape(false);
      Var<S> e = tape.constant(enc.replicate(n_cand, 1));
      Var<S> h = model.nar_states(tape, e, srcs, y_obs, ForwardMode{});
      lp = log_softmax_rows(model.logits(tape, h, OutputHead::nar)).value().template cast<double>();
    }
    for (std::size_t c = 0; c < lengths.size(); ++c) {
      const int L = lengths[c];
      for (int j = 0; j < L; ++j) {
        if (tokens[c][static_cast<std::size_t>(j)] != kMask) continue;
        const Index row = y_obs.row(static_cast<Index>(c), j);
        int best = kFirstWord;
        for (int v = kFirstWord + 1; v < mc.vocab_size; ++v)
          if (lp(row, v) > lp(row, best)) best = v;
        tokens[c][static_cast<std::size_t>(j)] = best;
        logp[c][static_cast<std::size_t>(j)] = lp(row, best);
        conf[c][static_cast<std::size_t>(j)] = std::exp(lp(row, best));
      }
      tokens[c][static_cast<std::size_t>(L)] = kEos;

      MaskPredictStep step;
      if (trace) {
        step.length = L;
        step.iteration = t;
        step.tokens.assign(tokens[c].begin(), tokens[c].begin() + L);
        step.confidence = conf[c];
      }
      if (t < T) {
        const int n = remask_count(L, T, t);
        std::vector<int> order(static_cast<std::size_t>(L));
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
          return conf[c][static_cast<std::size_t>(a)] < conf[c][static_cast<std::size_t>(b)];
        });
        for (int r = 0; r < n; ++r) {
          tokens[c][static_cast<std::size_t>(order[static_cast<std::size_t>(r)])] = kMask;
          if (trace) step.remasked.push_back(order[static_cast<std::size_t>(r)]);
        }
        if (trace) std::sort(step.remasked.begin(), step.remasked.end());
      }
      if (trace) trace->push_back(std::move(step));
    }
  }

  NarHypothesis best;
  best.score = kNegInf;
  for (std::size_t c = 0; c < lengths.size(); ++c) {
    const int L = lengths[c];
    const double mean_lp = std::accumulate(logp[c].begin(), logp[c].end(), 0.0) / L;
    if (mean_lp > best.score) {
      best.score = mean_lp;
      best.length = L;
      best.tokens.assign(tokens[c].begin(), tokens[c].begin() + L);
    }
  }
  return best;
}

template StepScorer ar_scorer(const Model<float>&, std::span<const int>);
template StepScorer ar_scorer(const Model<double>&, std::span<const int>);
template Hypothesis beam_search(const Model<float>&, std::span<const int>, const DecodeConfig&);
template Hypothesis beam_search(const Model<double>&, std::span<const int>, const DecodeConfig&);
template NarHypothesis mask_predict(const Model<float>&, std::span<const int>, const DecodeConfig&,
                                    std::vector<MaskPredictStep>*);
template NarHypothesis mask_predict(const Model<double>&, std::span<const int>, const DecodeConfig&,
                                    std::vector<MaskPredictStep>*);

}  // namespace dcmcl
