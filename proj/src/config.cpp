#include "dcmcl/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace dcmcl {

DistillDirection parse_direction(const std::string& s) {
  if (s == "none") return DistillDirection::none;
  if (s == "nar->ar" || s == "nar_to_ar" || s == "nar-to-ar") return DistillDirection::nar_to_ar;
  if (s == "ar->nar" || s == "ar_to_nar" || s == "ar-to-nar") return DistillDirection::ar_to_nar;
  if (s == "mutual" || s == "nar<->ar") return DistillDirection::mutual;
  throw std::invalid_argument("unknown distill direction '" + s + "' (expected none|nar->ar|ar->nar|mutual)");
}

const char* to_string(DistillDirection d) {
  switch (d) {
    case DistillDirection::none: return "none";
    case DistillDirection::nar_to_ar: return "nar->ar";
    case DistillDirection::ar_to_nar: return "ar->nar";
    case DistillDirection::mutual: return "mutual";
  }
  return "?";
}

ObjectiveMode TrainConfig::effective_objective() const {
  if (objective == ObjectiveMode::dcmcl && use_hybrid) return ObjectiveMode::dcmcl_hyb;
  return objective;
}

LossWeights TrainConfig::weights() const {
  LossWeights w;
  w.tml = use_tml && distill_direction != DistillDirection::none ? lambda_tml : 0.0;
  w.scl = use_scl ? lambda_scl : 0.0;
  w.length = effective_objective() == ObjectiveMode::ar_only ? 0.0 : length_weight;
  return w;
}

void TrainConfig::validate() const {
  model.validate();
  decode.validate();
  if (use_hybrid && !model.hybrid_enabled) throw std::invalid_argument("config: use_hybrid needs hybrid_enabled");
  if (objective == ObjectiveMode::dcmcl_hyb && !use_hybrid) throw std::invalid_argument("config: objective dcmcl_hyb needs use_hybrid");
  if (lambda_tml < 0 || lambda_scl < 0 || length_weight < 0) throw std::invalid_argument("config: loss weights must be nonnegative");
  if (!(mask_ratio >= 0 && mask_ratio <= 1)) throw std::invalid_argument("config: mask_ratio must be in [0, 1]");
  if (!(selection_fraction > 0 && selection_fraction <= 1)) throw std::invalid_argument("config: selection_fraction must be in (0, 1]");
  if (!(label_smoothing >= 0 && label_smoothing < 1)) throw std::invalid_argument("config: label_smoothing must be in [0, 1)");
  if (warmup_steps < 1) throw std::invalid_argument("config: warmup_steps must be >= 1");
  if (!(clip_norm > 0)) throw std::invalid_argument("config: clip_norm must be > 0");
  if (peak_lr <= 0) throw std::invalid_argument("config: peak_lr must be > 0");
  if (max_steps < 0 || eval_every < 0 || eval_sentences < 0) throw std::invalid_argument("config: step counts must be nonnegative");
  if (token_budget < 1) throw std::invalid_argument("config: token_budget must be >= 1");
  if (keep_best_k < 1) throw std::invalid_argument("config: keep_best_k must be >= 1");
  if (!(adam_beta1 >= 0 && adam_beta1 < 1 && adam_beta2 >= 0 && adam_beta2 < 1 && adam_eps > 0)) {
    throw std::invalid_argument("config: bad Adam hyperparameters");
  }
}

namespace {

std::string fmt(double x) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, r.ptr);
}

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
  T x{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc{} || ptr != v.data() + v.size()) throw std::invalid_argument("config: bad value '" + v + "' for " + key);
  return x;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "on" || v == "yes") return true;
  if (v == "0" || v == "false" || v == "off" || v == "no") return false;
  throw std::invalid_argument("config: bad boolean '" + v + "' for " + key);
}

template <typename T>
ConfigField number(std::string key, std::string help, std::function<T&(TrainConfig&)> ref) {
  return {key, std::move(help),
          [key, ref](TrainConfig& c, const std::string& v) { ref(c) = parse_number<T>(key, v); },
          [ref](const TrainConfig& c) {
            if constexpr (std::is_floating_point_v<T>) {
              return fmt(ref(const_cast<TrainConfig&>(c)));
            } else {
              return std::to_string(ref(const_cast<TrainConfig&>(c)));
            }
          }};
}

ConfigField flag(std::string key, std::string help, std::function<bool&(TrainConfig&)> ref) {
  return {key, std::move(help), [key, ref](TrainConfig& c, const std::string& v) { ref(c) = parse_bool(key, v); },
          [ref](const TrainConfig& c) { return std::string(ref(const_cast<TrainConfig&>(c)) ? "true" : "false"); }};
}

template <typename E>
ConfigField choice(std::string key, std::string help, std::function<E&(TrainConfig&)> ref, E (*parse)(const std::string&),
                   const char* (*show)(E)) {
  return {key, std::move(help), [ref, parse](TrainConfig& c, const std::string& v) { ref(c) = parse(v); },
          [ref, show](const TrainConfig& c) { return std::string(show(ref(const_cast<TrainConfig&>(c)))); }};
}

ConfigField text(std::string key, std::string help, std::function<std::string&(TrainConfig&)> ref) {
  return {key, std::move(help), [ref](TrainConfig& c, const std::string& v) { ref(c) = v; },
          [ref](const TrainConfig& c) { return ref(const_cast<TrainConfig&>(c)); }};
}

Precision parse_precision(const std::string& s) {
  if (s == "float" || s == "f32") return Precision::f32;
  if (s == "double" || s == "f64") return Precision::f64;
  throw std::invalid_argument("unknown precision '" + s + "' (expected float|double)");
}

const char* show_precision(Precision p) { return p == Precision::f32 ? "float" : "double"; }

std::vector<ConfigField> build_fields() {
  using C = TrainConfig;
  std::vector<ConfigField> f;
  // model
  f.push_back(number<int>("vocab_size", "vocabulary size, specials included", [](C& c) -> int& { return c.model.vocab_size; }));
  f.push_back(number<int>("d_model", "model width", [](C& c) -> int& { return c.model.d_model; }));
  f.push_back(number<int>("d_hidden", "feed-forward width", [](C& c) -> int& { return c.model.d_hidden; }));
  f.push_back(number<int>("n_heads", "attention heads", [](C& c) -> int& { return c.model.n_heads; }));
  f.push_back(number<int>("n_enc_layers", "encoder layers", [](C& c) -> int& { return c.model.n_enc_layers; }));
  f.push_back(number<int>("n_dec_layers", "layers per decoder", [](C& c) -> int& { return c.model.n_dec_layers; }));
  f.push_back(number<int>("max_len", "longest sequence the model accepts", [](C& c) -> int& { return c.model.max_len; }));
  f.push_back(number<double>("dropout", "dropout rate", [](C& c) -> double& { return c.model.dropout; }));
  f.push_back(choice<PositionEncoding>("enc_pe", "encoder positions: sinusoidal|learnable",
                                       [](C& c) -> PositionEncoding& { return c.model.enc_pe; }, parse_position_encoding, to_string));
  f.push_back(choice<PositionEncoding>("ar_pe", "AR decoder positions: sinusoidal|learnable",
                                       [](C& c) -> PositionEncoding& { return c.model.ar_pe; }, parse_position_encoding, to_string));
  f.push_back(choice<PositionEncoding>("nar_pe", "NAR decoder positions: sinusoidal|learnable",
                                       [](C& c) -> PositionEncoding& { return c.model.nar_pe; }, parse_position_encoding, to_string));
  f.push_back(flag("share_encoder", "one encoder for both decoders", [](C& c) -> bool& { return c.model.share_encoder; }));
  f.push_back(flag("hybrid_enabled", "build the hybrid fusion head", [](C& c) -> bool& { return c.model.hybrid_enabled; }));
  // decoding
  f.push_back(number<int>("beam_size", "AR beam size", [](C& c) -> int& { return c.decode.beam_size; }));
  f.push_back(number<int>("length_beam", "NAR length candidates", [](C& c) -> int& { return c.decode.length_beam; }));
  f.push_back(number<int>("nar_iterations", "mask-predict iterations", [](C& c) -> int& { return c.decode.nar_iterations; }));
  f.push_back(number<int>("max_decode_len", "longest decoded output", [](C& c) -> int& { return c.decode.max_decode_len; }));
  f.push_back(number<double>("length_alpha", "beam length-normalization exponent", [](C& c) -> double& { return c.decode.length_alpha; }));
  // objective
  f.push_back(choice<ObjectiveMode>("objective", "dcmcl|dcmcl_hyb|ar_only|nar_only", [](C& c) -> ObjectiveMode& { return c.objective; },
                                    parse_objective, to_string));
  f.push_back(number<double>("lambda_tml", "token-level mutual learning weight", [](C& c) -> double& { return c.lambda_tml; }));
  f.push_back(number<double>("lambda_scl", "sequence-level contrastive weight", [](C& c) -> double& { return c.lambda_scl; }));
  f.push_back(number<double>("length_weight", "length-head loss weight", [](C& c) -> double& { return c.length_weight; }));
  f.push_back(flag("use_tml", "token-level mutual learning", [](C& c) -> bool& { return c.use_tml; }));
  f.push_back(flag("use_scl", "sequence-level contrastive learning", [](C& c) -> bool& { return c.use_scl; }));
  f.push_back(flag("use_hybrid", "hybrid teacher as the TML/SCL target", [](C& c) -> bool& { return c.use_hybrid; }));
  f.push_back(flag("detach_length", "no gradient from the length loss into the encoder", [](C& c) -> bool& { return c.detach_length; }));
  f.push_back(flag("detach_hybrid_scl", "no gradient through the hybrid SCL key", [](C& c) -> bool& { return c.detach_hybrid_scl; }));
  f.push_back(choice<DistillDirection>("distill_direction", "none|nar->ar|ar->nar|mutual",
                                       [](C& c) -> DistillDirection& { return c.distill_direction; }, parse_direction, to_string));
  f.push_back(text("frozen_teacher", "checkpoint whose distributions serve as fixed TML targets",
                   [](C& c) -> std::string& { return c.frozen_teacher; }));
  f.push_back(choice<MaskStrategy>("mask_strategy", "cmlm|fixed|disco", [](C& c) -> MaskStrategy& { return c.mask_strategy; },
                                   parse_mask_strategy, to_string));
  f.push_back(number<double>("mask_ratio", "ratio for the fixed strategy", [](C& c) -> double& { return c.mask_ratio; }));
  f.push_back(choice<Selection>("selection", "all|random|high-inter|high-union|low-inter|low-union",
                                [](C& c) -> Selection& { return c.selection; }, parse_selection, to_string));
  f.push_back(number<double>("selection_fraction", "fraction of mutual tokens kept", [](C& c) -> double& { return c.selection_fraction; }));
  // optimization
  f.push_back(number<double>("label_smoothing", "label smoothing epsilon", [](C& c) -> double& { return c.label_smoothing; }));
  f.push_back(number<double>("adam_beta1", "Adam beta1", [](C& c) -> double& { return c.adam_beta1; }));
  f.push_back(number<double>("adam_beta2", "Adam beta2", [](C& c) -> double& { return c.adam_beta2; }));
  f.push_back(number<double>("adam_eps", "Adam epsilon", [](C& c) -> double& { return c.adam_eps; }));
  f.push_back(number<double>("peak_lr", "learning rate after warmup", [](C& c) -> double& { return c.peak_lr; }));
  f.push_back(number<int>("warmup_steps", "linear warmup steps", [](C& c) -> int& { return c.warmup_steps; }));
  f.push_back(number<double>("clip_norm", "global gradient-norm clip", [](C& c) -> double& { return c.clip_norm; }));
  f.push_back(number<int>("max_steps", "training steps", [](C& c) -> int& { return c.max_steps; }));
  f.push_back(number<int>("eval_every", "steps between evaluations (0: never)", [](C& c) -> int& { return c.eval_every; }));
  f.push_back(number<int>("eval_sentences", "validation sentences per evaluation (0: all)", [](C& c) -> int& { return c.eval_sentences; }));
  f.push_back(number<int>("token_budget", "tokens per batch", [](C& c) -> int& { return c.token_budget; }));
  f.push_back(number<std::uint64_t>("seed", "random seed", [](C& c) -> std::uint64_t& { return c.seed; }));
  f.push_back(text("checkpoint_dir", "where best-k checkpoints go", [](C& c) -> std::string& { return c.checkpoint_dir; }));
  f.push_back(number<int>("keep_best_k", "checkpoints kept by validation BLEU", [](C& c) -> int& { return c.keep_best_k; }));
  f.push_back(choice<Precision>("precision", "float|double", [](C& c) -> Precision& { return c.precision; }, parse_precision,
                                show_precision));
  return f;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

const std::vector<ConfigField>& config_fields() {
  static const std::vector<ConfigField> fields = build_fields();
  return fields;
}

void set_config_value(TrainConfig& config, const std::string& key, const std::string& value) {
  for (const auto& f : config_fields()) {
    if (f.key == key) {
      f.set(config, value);
      return;
    }
  }
  throw std::invalid_argument("unknown config key '" + key + "'");
}

std::string get_config_value(const TrainConfig& config, const std::string& key) {
  for (const auto& f : config_fields())
    if (f.key == key) return f.get(config);
  throw std::invalid_argument("unknown config key '" + key + "'");
}

void apply_config_text(TrainConfig& config, const std::string& text, const std::string& origin) {
  std::istringstream is(text);
  std::string line;
  int n = 0;
  while (std::getline(is, line)) {
    ++n;
    if (const auto h = line.find('#'); h != std::string::npos) line.resize(h);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw std::invalid_argument(origin + ":" + std::to_string(n) + ": expected key = value");
    try {
      set_config_value(config, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument(origin + ":" + std::to_string(n) + ": " + e.what());
    }
  }
}

void load_config_file(TrainConfig& config, const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open config " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  apply_config_text(config, ss.str(), path.string());
}

std::string config_text(const TrainConfig& config) {
  std::string out;
  for (const auto& f : config_fields()) out += f.key + " = " + f.get(config) + "\n";
  return out;
}

std::string config_digest(const TrainConfig& config) {
  // FNV-1a
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : config_text(config)) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace dcmcl
