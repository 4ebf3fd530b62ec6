#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "dcmcl/decoding.hpp"
#include "dcmcl/losses.hpp"
#include "dcmcl/masking.hpp"
#include "dcmcl/model.hpp"

namespace dcmcl {

// Which TML directions are trained. nar_to_ar: the AR side learns from NAR
// targets only; ar_to_nar the reverse.
enum class DistillDirection { none, nar_to_ar, ar_to_nar, mutual };

DistillDirection parse_direction(const std::string& s);
const char* to_string(DistillDirection d);

enum class Precision { f32, f64 };

struct TrainConfig {
  ModelConfig model;
  DecodeConfig decode;

  ObjectiveMode objective = ObjectiveMode::dcmcl;  // dcmcl_hyb is implied by use_hybrid
  double lambda_tml = 1.0;
  double lambda_scl = 1.0;
  double length_weight = 0.1;
  bool detach_length = false;  // length head trained on a stop-gradient encoder output
  bool use_tml = true;
  bool use_scl = true;
  bool use_hybrid = false;
  bool detach_hybrid_scl = true;
  DistillDirection distill_direction = DistillDirection::mutual;
  std::string frozen_teacher;  // checkpoint path; empty for none

  MaskStrategy mask_strategy = MaskStrategy::cmlm;
  double mask_ratio = 0.5;
  Selection selection = Selection::all;
  double selection_fraction = 0.5;

  double label_smoothing = 0.1;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.98;
  double adam_eps = 1e-8;
  double peak_lr = 5e-4;
  int warmup_steps = 400;
  double clip_norm = 3.0;
  int max_steps = 3000;
  int eval_every = 200;
  int eval_sentences = 0;  // 0: whole validation set
  int token_budget = 256;
  std::uint64_t seed = 1;
  std::string checkpoint_dir;
  int keep_best_k = 5;
  Precision precision = Precision::f32;

  ObjectiveMode effective_objective() const;
  LossWeights weights() const;
  void validate() const;
};

struct ConfigField {
  std::string key;
  std::string help;
  std::function<void(TrainConfig&, const std::string&)> set;
  std::function<std::string(const TrainConfig&)> get;
};

// Every TrainConfig field, model and decode settings included.
const std::vector<ConfigField>& config_fields();

void set_config_value(TrainConfig& config, const std::string& key, const std::string& value);
std::string get_config_value(const TrainConfig& config, const std::string& key);

// key = value lines; '#' starts a comment.
void apply_config_text(TrainConfig& config, const std::string& text, const std::string& origin = "<text>");
void load_config_file(TrainConfig& config, const std::filesystem::path& path);
std::string config_text(const TrainConfig& config);

// Short hex digest of config_text.
std::string config_digest(const TrainConfig& config);

}  // namespace dcmcl
