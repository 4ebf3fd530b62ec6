#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dcmcl/checkpoint.hpp"
#include "dcmcl/config.hpp"
#include "dcmcl/data.hpp"
#include "dcmcl/losses.hpp"
#include "dcmcl/masking.hpp"
#include "dcmcl/model.hpp"

namespace dcmcl {

// peak * min(step / warmup, sqrt(warmup / step))
double lr_at(long step, double peak, int warmup);

// A batch with its per-sentence mask plans over the N = |y| + 1 target slots.
struct PreparedBatch {
  std::vector<Sentence> src;
  std::vector<Sentence> tgt;
  std::vector<MaskPlan> plans;
};

PreparedBatch prepare_batch(const Batch& batch, const TrainConfig& config, Rng& rng);

template <typename S>
struct ObjectiveGraph {
  Var<S> total;
  Components<Var<S>> parts;
  std::size_t ar_tokens = 0;
  std::size_t nar_tokens = 0;
  std::size_t mutual_tokens = 0;
};

// Records the full objective for one prepared batch on tape. mode.train
// enables dropout; rng drives random token selection (may be null when the
// selection strategy is deterministic). teacher, when given, supplies fixed
// TML targets.
template <typename S>
ObjectiveGraph<S> build_objective(Tape<S>& tape, const Model<S>& model, const TrainConfig& config,
                                  const PreparedBatch& batch, const ForwardMode& mode, Rng* rng,
                                  const Model<S>* teacher = nullptr);

Components<double> component_values(const Components<Var<double>>& parts);
Components<double> component_values(const Components<Var<float>>& parts);

template <typename S>
class Adam {
 public:
  Adam(double beta1, double beta2, double eps) : beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(const std::vector<Parameter<S>*>& params, double lr);
  long steps() const { return t_; }

  OptimizerState state(const std::vector<const Parameter<S>*>& params) const;
  void load(const OptimizerState& state, const std::vector<Parameter<S>*>& params);

 private:
  double beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<Mat<S>> m_, v_;
};

struct StepResult {
  LossBundle losses;
  double grad_norm = 0.0;     // before clipping
  double clipped_norm = 0.0;  // after clipping
  double lr = 0.0;
  long step = 0;
};

struct EvalOptions {
  bool ar = true;
  bool nar = true;
  bool similarity = true;
  std::size_t max_sentences = 0;  // 0: all
};

struct EvalResult {
  std::optional<double> bleu_ar, bleu_nar, repeat_nar, exact_nar, similarity;
  std::vector<Sentence> hyp_ar, hyp_nar;
};

template <typename S>
EvalResult evaluate_model(const Model<S>& model, const ParallelCorpus& corpus, const DecodeConfig& decode,
                          const EvalOptions& options, Rng& rng);

struct FitResult {
  std::vector<double> losses;  // total per step
  std::vector<std::filesystem::path> best;
};

template <typename S>
class Trainer {
 public:
  explicit Trainer(const TrainConfig& config);

  const TrainConfig& config() const { return config_; }
  Model<S>& model() { return *model_; }
  const Model<S>& model() const { return *model_; }
  Rng& rng() { return rng_; }
  long step() const { return step_; }

  void set_teacher(std::unique_ptr<Model<S>> teacher) { teacher_ = std::move(teacher); }

  // Forward, backward, clip, Adam. Throws std::runtime_error with the
  // component values when the loss is not finite.
  StepResult train_step(const Batch& batch);

  // Trains until config.max_steps. Evaluates on valid every eval_every steps,
  // appending one JSON object per evaluation to metrics_log (when non-empty)
  // and keeping the best keep_best_k checkpoints in checkpoint_dir.
  FitResult fit(const ParallelCorpus& train, const ParallelCorpus* valid, const std::filesystem::path& metrics_log = {});

  EvalResult evaluate(const ParallelCorpus& corpus, const EvalOptions& options);

  // Averages fit.best into the model when the average scores at least as well
  // as the current weights on valid (BLEU AR + NAR); otherwise keeps them.
  // Returns true when the average was adopted.
  bool adopt_average(const FitResult& fit, const ParallelCorpus* valid);

  Checkpoint checkpoint() const;
  void load(const Checkpoint& ckpt);

 private:
  EvalOptions eval_options() const;

  TrainConfig config_;
  Rng rng_;
  std::unique_ptr<Model<S>> model_;
  std::unique_ptr<Model<S>> teacher_;
  Adam<S> adam_;
  long step_ = 0;
  long batch_counter_ = 0;
};

// Builds a model of the checkpoint's config and loads its weights.
template <typename S>
std::unique_ptr<Model<S>> model_from_checkpoint(const Checkpoint& ckpt);

}  // namespace dcmcl
