#include "dcmcl/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <utility>

#include "json.hpp"

#include "dcmcl/decoding.hpp"
#include "dcmcl/metrics.hpp"

namespace dcmcl {

double lr_at(long step, double peak, int warmup) {
  if (step < 1) throw std::invalid_argument("lr_at: step must be >= 1");
  if (warmup < 1) throw std::invalid_argument("lr_at: warmup must be >= 1");
  const double s = static_cast<double>(step);
  const double w = static_cast<double>(warmup);
  return peak * std::min(s / w, std::sqrt(w / s));
}

PreparedBatch prepare_batch(const Batch& batch, const TrainConfig& config, Rng& rng) {
  PreparedBatch out;
  out.src = batch.src;
  out.tgt = batch.tgt;
  for (const Sentence& y : batch.tgt) {
    if (y.empty()) throw std::invalid_argument("prepare_batch: empty target sentence");
    out.plans.push_back(make_plan(config.mask_strategy, static_cast<int>(y.size()) + 1, config.mask_ratio, rng));
  }
  return out;
}

namespace {

template <typename S>
void put(std::optional<double>& dst, const std::optional<Var<S>>& v) {
  if (v) dst = static_cast<double>(v->item());
}

template <typename S>
Components<double> values_of(const Components<Var<S>>& p) {
  Components<double> c;
  put(c.ml_ar, p.ml_ar);
  put(c.ml_nar, p.ml_nar);
  put(c.ml_hyb, p.ml_hyb);
  put(c.tml_ar, p.tml_ar);
  put(c.tml_nar, p.tml_nar);
  put(c.scl_ar, p.scl_ar);
  put(c.scl_nar, p.scl_nar);
  put(c.length, p.length);
  return c;
}

std::vector<std::pair<const char*, std::optional<double>>> named(const Components<double>& c) {
  return {{"ml_ar", c.ml_ar},   {"ml_nar", c.ml_nar},   {"ml_hyb", c.ml_hyb}, {"tml_ar", c.tml_ar},
          {"tml_nar", c.tml_nar}, {"scl_ar", c.scl_ar}, {"scl_nar", c.scl_nar}, {"length", c.length}};
}

template <typename S>
struct TeacherDists {
  Mat<S> p_ar, p_nar;
};

template <typename S>
TeacherDists<S> teacher_distributions(const Model<S>& teacher, const TokenBatch& src, const TokenBatch& ar_in,
                                      const TokenBatch& nar_in, const std::vector<BoolMat>* contexts) {
  Tape<S> tape(false);
  ForwardMode eval;
  Var<S> e = teacher.encode(tape, src, eval);
  Var<S> e_nar = teacher.nar_encoder_side() == EncoderSide::ar ? e : teacher.encode(tape, src, eval, EncoderSide::nar);
  TeacherDists<S> d;
  d.p_ar = teacher.output_distribution(tape, teacher.ar_states(tape, e, src, ar_in, eval), OutputHead::ar).value();
  d.p_nar = teacher.output_distribution(tape, teacher.nar_states(tape, e_nar, src, nar_in, eval, contexts), OutputHead::nar).value();
  return d;
}

}  // namespace

Components<double> component_values(const Components<Var<double>>& parts) { return values_of(parts); }
Components<double> component_values(const Components<Var<float>>& parts) { return values_of(parts); }

template <typename S>
ObjectiveGraph<S> build_objective(Tape<S>& tape, const Model<S>& model, const TrainConfig& config,
                                  const PreparedBatch& batch, const ForwardMode& mode, Rng* rng, const Model<S>* teacher) {
  const ObjectiveMode obj = config.effective_objective();
  const LossWeights w = config.weights();
  const bool need_ar = obj != ObjectiveMode::nar_only;
  const bool need_nar = obj != ObjectiveMode::ar_only;
  const bool joint = obj == ObjectiveMode::dcmcl || obj == ObjectiveMode::dcmcl_hyb;
  const bool hyb = obj == ObjectiveMode::dcmcl_hyb;
  const std::size_t B = batch.src.size();
  if (B == 0) throw std::invalid_argument("build_objective: empty batch");
  if (batch.tgt.size() != B || batch.plans.size() != B) throw std::invalid_argument("build_objective: misaligned batch");

  std::vector<std::vector<int>> ar_in(B), nar_in(B);
  std::vector<Index> n_target(B);
  bool per_position = false;
  for (std::size_t b = 0; b < B; ++b) {
    const Sentence& y = batch.tgt[b];
    const MaskPlan& plan = batch.plans[b];
    n_target[b] = static_cast<Index>(y.size()) + 1;
    if (plan.n_target != n_target[b]) throw std::invalid_argument("build_objective: mask plan does not fit its target");
    ar_in[b].push_back(kBos);
    ar_in[b].insert(ar_in[b].end(), y.begin(), y.end());
    nar_in[b].assign(y.begin(), y.end());
    nar_in[b].push_back(kEos);
    if (plan.per_position()) {
      per_position = true;
    } else {
      for (int j : plan.masked) nar_in[b][static_cast<std::size_t>(j)] = kMask;
    }
  }
  const TokenBatch src = TokenBatch::from(batch.src);
  const TokenBatch a_in = TokenBatch::from(ar_in);
  const TokenBatch o_in = TokenBatch::from(nar_in);
  const Index N = a_in.length;

  std::vector<BoolMat> contexts;
  if (per_position) {
    for (const MaskPlan& p : batch.plans) contexts.push_back(context_visibility(p, N));
  }
  const std::vector<BoolMat>* ctx = per_position ? &contexts : nullptr;

  std::vector<int> gold(static_cast<std::size_t>(B * N), kPad);
  std::vector<int> all_rows, masked_rows;
  for (std::size_t b = 0; b < B; ++b) {
    const Sentence& y = batch.tgt[b];
    for (Index i = 0; i < n_target[b]; ++i) {
      const auto r = static_cast<int>(a_in.row(static_cast<Index>(b), i));
      gold[static_cast<std::size_t>(r)] = i < static_cast<Index>(y.size()) ? y[static_cast<std::size_t>(i)] : kEos;
      all_rows.push_back(r);
    }
    for (int j : batch.plans[b].masked) masked_rows.push_back(static_cast<int>(a_in.row(static_cast<Index>(b), j)));
  }

  ObjectiveGraph<S> g;
  Components<Var<S>>& parts = g.parts;
  const double eps = config.label_smoothing;

  Var<S> e_ar, e_nar;
  if (need_ar) e_ar = model.encode(tape, src, mode, EncoderSide::ar);
  if (need_nar) {
    e_nar = need_ar && model.nar_encoder_side() == EncoderSide::ar ? e_ar
                                                                   : model.encode(tape, src, mode, model.nar_encoder_side());
  }

  Var<S> h_ar, h_nar, logits_ar, logits_nar;
  if (need_ar) {
    h_ar = model.ar_states(tape, e_ar, src, a_in, mode);
    logits_ar = model.logits(tape, h_ar, OutputHead::ar);
    parts.ml_ar = nll(log_softmax_rows(logits_ar), std::span<const int>(gold), std::span<const int>(all_rows), eps);
    g.ar_tokens = all_rows.size();
  }
  if (need_nar) {
    h_nar = model.nar_states(tape, e_nar, src, o_in, mode, ctx);
    logits_nar = model.logits(tape, h_nar, OutputHead::nar);
    parts.ml_nar = nll(log_softmax_rows(logits_nar), std::span<const int>(gold), std::span<const int>(masked_rows), eps);
    g.nar_tokens = masked_rows.size();
    if (w.length != 0.0) {
      std::vector<int> len_gold(B), len_rows(B);
      for (std::size_t b = 0; b < B; ++b) {
        len_gold[b] = static_cast<int>(batch.tgt[b].size()) - 1;
        len_rows[b] = static_cast<int>(b);
      }
      Var<S> len_logp = log_softmax_rows(model.length_logits(tape, config.detach_length ? detach(e_nar) : e_nar, src));
      parts.length = nll(len_logp, std::span<const int>(len_gold), std::span<const int>(len_rows), 0.0);
    }
  }

  if (joint) {
    Var<S> h_hyb, p_hyb;
    if (hyb) {
      h_hyb = model.hybrid_states(tape, h_ar, h_nar);
      Var<S> logits_hyb = model.logits(tape, h_hyb, OutputHead::hyb);
      parts.ml_hyb = hybrid_nll(log_softmax_rows(logits_hyb), std::span<const int>(gold), std::span<const int>(all_rows), eps,
                                model.config().hybrid_enabled);
      if (w.tml != 0.0) p_hyb = softmax_rows(logits_hyb);
    }
    if (w.tml != 0.0) {
      Var<S> p_ar = softmax_rows(logits_ar);
      Var<S> p_nar = softmax_rows(logits_nar);
      std::vector<int> ml_rows;
      for (std::size_t b = 0; b < B; ++b) {
        const MaskPlan& plan = batch.plans[b];
        std::vector<int> keep = plan.mutual;
        if (config.selection != Selection::all && !plan.mutual.empty()) {
          if (config.selection == Selection::random && rng == nullptr) throw std::invalid_argument("build_objective: random selection needs an rng");
          std::vector<double> c_ar, c_nar;
          for (int j : plan.mutual) {
            const Index r = a_in.row(static_cast<Index>(b), j);
            const int y = gold[static_cast<std::size_t>(r)];
            c_ar.push_back(static_cast<double>(p_ar.value()(r, y)));
            c_nar.push_back(static_cast<double>(p_nar.value()(r, y)));
          }
          Rng dummy(0);
          keep = select_confidence(plan, c_ar, c_nar, config.selection, config.selection_fraction, rng ? *rng : dummy);
        }
        for (int j : keep) ml_rows.push_back(static_cast<int>(a_in.row(static_cast<Index>(b), j)));
      }
      g.mutual_tokens = ml_rows.size();

      Var<S> target_for_ar = p_nar;
      Var<S> target_for_nar = p_ar;
      if (hyb) {
        target_for_ar = p_hyb;
        target_for_nar = p_hyb;
      } else if (teacher) {
        TeacherDists<S> t = teacher_distributions(*teacher, src, a_in, o_in, ctx);
        target_for_ar = tape.constant(std::move(t.p_nar));
        target_for_nar = tape.constant(std::move(t.p_ar));
      }
      const bool to_ar = config.distill_direction == DistillDirection::mutual || config.distill_direction == DistillDirection::nar_to_ar;
      const bool to_nar = config.distill_direction == DistillDirection::mutual || config.distill_direction == DistillDirection::ar_to_nar;
      const std::span<const int> rows(ml_rows);
      parts.tml_ar = to_ar ? mutual_kl(target_for_ar, p_ar, rows) : tape.scalar(S(0));
      parts.tml_nar = to_nar ? mutual_kl(target_for_nar, p_nar, rows) : tape.scalar(S(0));
    }
    if (w.scl != 0.0) {
      const std::span<const Index> lens(n_target);
      Var<S> hbar_ar = sentence_means(h_ar, N, lens);
      Var<S> hbar_nar = sentence_means(h_nar, N, lens);
      if (hyb) {
        Var<S> hbar_hyb = sentence_means(h_hyb, N, lens);
        parts.scl_ar = contrastive(hbar_ar, hbar_hyb, config.detach_hybrid_scl);
        parts.scl_nar = contrastive(hbar_nar, hbar_hyb, config.detach_hybrid_scl);
      } else {
        LossPair<S> scl = scl_pair(hbar_ar, hbar_nar);
        parts.scl_ar = scl.ar;
        parts.scl_nar = scl.nar;
      }
    }
  }
  g.total = compose(parts, w, obj);
  return g;
}

template <typename S>
void Adam<S>::step(const std::vector<Parameter<S>*>& params, double lr) {
  if (m_.empty()) {
    for (const Parameter<S>* p : params) {
      m_.push_back(Mat<S>::Zero(p->value.rows(), p->value.cols()));
      v_.push_back(Mat<S>::Zero(p->value.rows(), p->value.cols()));
    }
  }
  if (m_.size() != params.size()) throw std::logic_error("Adam: parameter list changed");
  ++t_;
  const S b1 = static_cast<S>(beta1_), b2 = static_cast<S>(beta2_);
  const S c1 = static_cast<S>(1.0 - std::pow(beta1_, static_cast<double>(t_)));
  const S c2 = static_cast<S>(1.0 - std::pow(beta2_, static_cast<double>(t_)));
  const S step = static_cast<S>(lr), eps = static_cast<S>(eps_);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter<S>& p = *params[i];
    auto m = m_[i].array();
    auto v = v_[i].array();
    if (p.grad.size() == 0) {
      m *= b1;
      v *= b2;
    } else {
      m = b1 * m + (S(1) - b1) * p.grad.array();
      v = b2 * v + (S(1) - b2) * p.grad.array().square();
    }
    p.value.array() -= step * (m / c1) / ((v / c2).sqrt() + eps);
  }
}

template <typename S>
OptimizerState Adam<S>::state(const std::vector<const Parameter<S>*>& params) const {
  OptimizerState s;
  s.step = t_;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Parameter<S>& p = *params[i];
    if (m_.empty()) {
      s.m.push_back(to_named<S>(p.name, Mat<S>::Zero(p.value.rows(), p.value.cols())));
      s.v.push_back(to_named<S>(p.name, Mat<S>::Zero(p.value.rows(), p.value.cols())));
    } else {
      s.m.push_back(to_named<S>(p.name, m_[i]));
      s.v.push_back(to_named<S>(p.name, v_[i]));
    }
  }
  return s;
}

template <typename S>
void Adam<S>::load(const OptimizerState& state, const std::vector<Parameter<S>*>& params) {
  if (state.m.size() != params.size() || state.v.size() != params.size()) throw std::runtime_error("Adam: state size mismatch");
  m_.clear();
  v_.clear();
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (state.m[i].name != params[i]->name) throw std::runtime_error("Adam: state for '" + state.m[i].name + "' does not match");
    m_.push_back(from_named<S>(state.m[i]));
    v_.push_back(from_named<S>(state.v[i]));
  }
  t_ = state.step;
}

template <typename S>
EvalResult evaluate_model(const Model<S>& model, const ParallelCorpus& corpus, const DecodeConfig& decode,
                          const EvalOptions& options, Rng& rng) {
  EvalResult r;
  const std::size_t n = options.max_sentences ? std::min(options.max_sentences, corpus.size()) : corpus.size();
  if (n == 0) return r;
  ParallelCorpus sample;
  sample.vocab_size = corpus.vocab_size;
  sample.src.assign(corpus.src.begin(), corpus.src.begin() + static_cast<long>(n));
  sample.tgt.assign(corpus.tgt.begin(), corpus.tgt.begin() + static_cast<long>(n));
  if (options.ar) {
    for (const Sentence& s : sample.src) r.hyp_ar.push_back(beam_search(model, s, decode).tokens);
    r.bleu_ar = corpus_bleu(r.hyp_ar, sample.tgt);
  }
  if (options.nar) {
    for (const Sentence& s : sample.src) r.hyp_nar.push_back(mask_predict(model, s, decode).tokens);
    r.bleu_nar = corpus_bleu(r.hyp_nar, sample.tgt);
    r.repeat_nar = repeated_token_pct(r.hyp_nar);
    r.exact_nar = exact_match(r.hyp_nar, sample.tgt);
  }
  if (options.similarity) r.similarity = hidden_similarity(model, sample, rng).mean_cosine;
  return r;
}

template <typename S>
std::unique_ptr<Model<S>> model_from_checkpoint(const Checkpoint& ckpt) {
  Rng init(0);
  auto m = std::make_unique<Model<S>>(ckpt.config, init);
  restore_parameters(*m, ckpt);
  return m;
}

template <typename S>
Trainer<S>::Trainer(const TrainConfig& config)
    : config_(config), rng_(config.seed), adam_(config.adam_beta1, config.adam_beta2, config.adam_eps) {
  config_.validate();
  model_ = std::make_unique<Model<S>>(config_.model, rng_);
  if (!config_.frozen_teacher.empty()) {
    teacher_ = model_from_checkpoint<S>(load_checkpoint(config_.frozen_teacher));
    if (teacher_->config().vocab_size != config_.model.vocab_size) throw std::runtime_error("frozen teacher vocabulary differs");
  }
}

template <typename S>
StepResult Trainer<S>::train_step(const Batch& batch) {
  const PreparedBatch pb = prepare_batch(batch, config_, rng_);
  model_->zero_grad();
  Tape<S> tape;
  ForwardMode mode;
  mode.train = true;
  mode.rng = &rng_;
  ObjectiveGraph<S> g = build_objective(tape, *model_, config_, pb, mode, &rng_, teacher_.get());

  StepResult r;
  r.losses.parts = values_of(g.parts);
  r.losses.weights = config_.weights();
  r.losses.mode = config_.effective_objective();
  r.losses.total = static_cast<double>(g.total.item());
  bool finite = std::isfinite(r.losses.total);
  for (const auto& [name, v] : named(r.losses.parts)) finite = finite && (!v || std::isfinite(*v));
  if (!finite) {
    std::ostringstream os;
    os << "non-finite loss at step " << step_ + 1 << " (batch " << batch_counter_ << ", " << batch.size()
       << " sentences): total=" << r.losses.total;
    for (const auto& [name, v] : named(r.losses.parts))
      if (v) os << ' ' << name << '=' << *v;
    throw std::runtime_error(os.str());
  }
  tape.backward(g.total);
  ++batch_counter_;

  auto params = model_->parameters();
  double sq = 0.0;
  for (const Parameter<S>* p : params)
    if (p->grad.size()) sq += p->grad.template cast<double>().squaredNorm();
  r.grad_norm = std::sqrt(sq);
  r.clipped_norm = r.grad_norm;
  if (r.grad_norm > config_.clip_norm) {
    const S factor = static_cast<S>(config_.clip_norm / r.grad_norm * (1.0 - 1e-6));
    double post = 0.0;
    for (Parameter<S>* p : params) {
      if (!p->grad.size()) continue;
      p->grad *= factor;
      post += p->grad.template cast<double>().squaredNorm();
    }
    r.clipped_norm = std::sqrt(post);
  }
  r.lr = lr_at(step_ + 1, config_.peak_lr, config_.warmup_steps);
  adam_.step(params, r.lr);
  r.step = ++step_;
  return r;
}

template <typename S>
EvalOptions Trainer<S>::eval_options() const {
  EvalOptions o;
  const ObjectiveMode obj = config_.effective_objective();
  o.ar = obj != ObjectiveMode::nar_only;
  o.nar = obj != ObjectiveMode::ar_only;
  o.max_sentences = static_cast<std::size_t>(config_.eval_sentences);
  return o;
}

template <typename S>
EvalResult Trainer<S>::evaluate(const ParallelCorpus& corpus, const EvalOptions& options) {
  // Own stream so evaluation never shifts the training draws.
  Rng eval_rng(config_.seed ^ 0x5eedf00dULL);
  return evaluate_model(*model_, corpus, config_.decode, options, eval_rng);
}

template <typename S>
Checkpoint Trainer<S>::checkpoint() const {
  Checkpoint c;
  c.config = config_.model;
  c.run_config = config_text(config_);
  c.params = snapshot_parameters(*model_);
  c.optimizer = adam_.state(std::as_const(*model_).parameters());
  c.rng_state = rng_.state();
  return c;
}

template <typename S>
void Trainer<S>::load(const Checkpoint& ckpt) {
  restore_parameters(*model_, ckpt);
  if (ckpt.optimizer) {
    adam_.load(*ckpt.optimizer, model_->parameters());
    step_ = ckpt.optimizer->step;
  }
  if (!ckpt.rng_state.empty()) rng_.set_state(ckpt.rng_state);
}

template <typename S>
FitResult Trainer<S>::fit(const ParallelCorpus& train, const ParallelCorpus* valid, const std::filesystem::path& metrics_log) {
  FitResult res;
  std::ofstream log;
  if (!metrics_log.empty()) {
    if (metrics_log.has_parent_path()) std::filesystem::create_directories(metrics_log.parent_path());
    log.open(metrics_log, std::ios::app);
    if (!log) throw std::runtime_error("cannot write metrics log " + metrics_log.string());
  }
  std::vector<std::pair<double, std::filesystem::path>> best;
  Components<double> sums;
  long since_eval = 0;
  auto add = [](std::optional<double>& acc, const std::optional<double>& v) {
    if (v) acc = acc.value_or(0.0) + *v;
  };

  while (step_ < config_.max_steps) {
    const std::vector<Batch> batches = batch_by_tokens(train, config_.token_budget, rng_, true);
    for (const Batch& b : batches) {
      if (step_ >= config_.max_steps) break;
      const StepResult r = train_step(b);
      res.losses.push_back(r.losses.total);
      add(sums.ml_ar, r.losses.parts.ml_ar);
      add(sums.ml_nar, r.losses.parts.ml_nar);
      add(sums.ml_hyb, r.losses.parts.ml_hyb);
      add(sums.tml_ar, r.losses.parts.tml_ar);
      add(sums.tml_nar, r.losses.parts.tml_nar);
      add(sums.scl_ar, r.losses.parts.scl_ar);
      add(sums.scl_nar, r.losses.parts.scl_nar);
      add(sums.length, r.losses.parts.length);
      ++since_eval;

      if (config_.eval_every > 0 && valid != nullptr && step_ % config_.eval_every == 0) {
        const EvalResult e = evaluate(*valid, eval_options());
        double total = 0.0;
        for (std::size_t k = res.losses.size() - static_cast<std::size_t>(since_eval); k < res.losses.size(); ++k) total += res.losses[k];
        nlohmann::json j;
        j["step"] = step_;
        j["lr"] = r.lr;
        j["grad_norm"] = r.grad_norm;
        nlohmann::json loss;
        loss["total"] = total / static_cast<double>(since_eval);
        for (const auto& [name, v] : named(sums)) loss[name] = v ? nlohmann::json(*v / static_cast<double>(since_eval)) : nlohmann::json();
        j["loss"] = loss;
        auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(); };
        j["bleu_ar"] = opt(e.bleu_ar);
        j["bleu_nar"] = opt(e.bleu_nar);
        j["repeat_pct"] = opt(e.repeat_nar);
        j["exact_nar"] = opt(e.exact_nar);
        j["similarity"] = opt(e.similarity);
        j["bleu_smoothing"] = true;
        if (log) log << j.dump() << '\n' << std::flush;
        sums = {};
        since_eval = 0;

        if (!config_.checkpoint_dir.empty()) {
          Checkpoint c = checkpoint();
          c.score = e.bleu_ar.value_or(0.0) + e.bleu_nar.value_or(0.0);
          const std::filesystem::path path = std::filesystem::path(config_.checkpoint_dir) / ("step-" + std::to_string(step_) + ".ckpt");
          save_checkpoint(path, c);
          best.emplace_back(c.score, path);
          std::stable_sort(best.begin(), best.end(), [](const auto& x, const auto& y) { return x.first > y.first; });
          while (best.size() > static_cast<std::size_t>(config_.keep_best_k)) {
            std::filesystem::remove(best.back().second);
            best.pop_back();
          }
        }
      }
    }
  }
  for (const auto& [score, path] : best) res.best.push_back(path);
  return res;
}

template <typename S>
bool Trainer<S>::adopt_average(const FitResult& fit, const ParallelCorpus* valid) {
  if (fit.best.empty()) return false;
  const Checkpoint avg = average_checkpoints(std::span<const std::filesystem::path>(fit.best));
  if (valid == nullptr) {
    restore_parameters(*model_, avg);
    return true;
  }
  EvalOptions o = eval_options();
  o.similarity = false;
  auto score = [&] {
    const EvalResult e = evaluate(*valid, o);
    return e.bleu_ar.value_or(0.0) + e.bleu_nar.value_or(0.0);
  };
  const Checkpoint current = checkpoint();
  const double own = score();
  restore_parameters(*model_, avg);
  if (score() >= own) return true;
  restore_parameters(*model_, current);
  return false;
}

#define DCMCL_INSTANTIATE_TRAINER(S)                                                                              \
  template ObjectiveGraph<S> build_objective(Tape<S>&, const Model<S>&, const TrainConfig&, const PreparedBatch&, \
                                             const ForwardMode&, Rng*, const Model<S>*);                          \
  template class Adam<S>;                                                                                         \
  template class Trainer<S>;                                                                                      \
  template EvalResult evaluate_model(const Model<S>&, const ParallelCorpus&, const DecodeConfig&, const EvalOptions&, Rng&); \
  template std::unique_ptr<Model<S>> model_from_checkpoint(const Checkpoint&);

DCMCL_INSTANTIATE_TRAINER(float)
DCMCL_INSTANTIATE_TRAINER(double)

#undef DCMCL_INSTANTIATE_TRAINER

}  // namespace dcmcl
