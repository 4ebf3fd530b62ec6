#include "dcmcl/cli.hpp"

#include <chrono>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "dcmcl/checkpoint.hpp"
#include "dcmcl/config.hpp"
#include "dcmcl/data.hpp"
#include "dcmcl/decoding.hpp"
#include "dcmcl/gradsuite.hpp"
#include "dcmcl/metrics.hpp"
#include "dcmcl/trainer.hpp"

namespace dcmcl {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

struct Common {
  std::uint64_t seed = 0;
  std::string config;
  std::string out_dir = ".";
  std::map<std::string, std::string> values;
  std::vector<std::pair<CLI::Option*, std::string>> fields;
  CLI::Option* seed_opt = nullptr;
};

std::string dashed(std::string key) {
  for (char& c : key)
    if (c == '_') c = '-';
  return key;
}

void add_common(CLI::App* app, Common& c, bool with_fields) {
  c.seed_opt = app->add_option("--seed", c.seed, "random seed");
  app->add_option("--config", c.config, "key = value config file")->check(CLI::ExistingFile);
  app->add_option("--out-dir", c.out_dir, "directory for every output file")->capture_default_str();
  if (!with_fields) return;
  for (const ConfigField& f : config_fields()) {
    if (f.key == "seed") continue;
    CLI::Option* o = app->add_option("--" + dashed(f.key), c.values[f.key], f.help)->group("Config overrides");
    c.fields.emplace_back(o, f.key);
  }
}

TrainConfig resolve(const Common& c, TrainConfig cfg = {}) {
  if (!c.config.empty()) load_config_file(cfg, c.config);
  for (const auto& [opt, key] : c.fields)
    if (opt->count() > 0) set_config_value(cfg, key, c.values.at(key));
  if (c.seed_opt && c.seed_opt->count() > 0) cfg.seed = c.seed;
  return cfg;
}

template <typename F>
decltype(auto) with_precision(Precision p, F&& f) {
  if (p == Precision::f64) return f.template operator()<double>();
  return f.template operator()<float>();
}

fs::path out_path(const Common& c, const fs::path& name) {
  if (name.is_absolute()) throw std::invalid_argument("output names must be relative to --out-dir: " + name.string());
  fs::create_directories(c.out_dir);
  return fs::path(c.out_dir) / name;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << text;
}

json eval_json(const EvalResult& e) {
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(); };
  return {{"bleu_ar", opt(e.bleu_ar)},       {"bleu_nar", opt(e.bleu_nar)}, {"repeat_pct", opt(e.repeat_nar)},
          {"exact_nar", opt(e.exact_nar)}, {"similarity", opt(e.similarity)}};
}

// --- gen-data ---------------------------------------------------------------

struct GenArgs {
  std::string task = "lexicon";
  int min_len = 4;
  int max_len = 12;
  int n_train = 2000;
  int n_valid = 200;
  int n_test = 200;
};

void cmd_gen_data(const Common& c, const GenArgs& a) {
  TrainConfig cfg = resolve(c);
  if (c.seed_opt->count() == 0) cfg.seed = 1;
  Rng rng(cfg.seed);
  const int total = a.n_train + a.n_valid + a.n_test;
  ParallelCorpus all = gen_synthetic(parse_task(a.task), total, cfg.model.vocab_size, a.min_len, a.max_len, cfg.model.max_len, rng);
  auto slice = [&all](int from, int n) {
    ParallelCorpus p;
    p.vocab_size = all.vocab_size;
    p.src.assign(all.src.begin() + from, all.src.begin() + from + n);
    p.tgt.assign(all.tgt.begin() + from, all.tgt.begin() + from + n);
    return p;
  };
  write_corpus(out_path(c, "train"), slice(0, a.n_train));
  if (a.n_valid > 0) write_corpus(out_path(c, "valid"), slice(a.n_train, a.n_valid));
  if (a.n_test > 0) write_corpus(out_path(c, "test"), slice(a.n_train + a.n_valid, a.n_test));
  std::cout << json{{"task", a.task}, {"train", a.n_train}, {"valid", a.n_valid}, {"test", a.n_test},
                    {"vocab_size", cfg.model.vocab_size}, {"seed", cfg.seed}}
                   .dump()
            << '\n';
}

// --- train ------------------------------------------------------------------

template <typename S>
EvalResult train_run(TrainConfig cfg, const fs::path& dir, const ParallelCorpus& train, const ParallelCorpus* valid,
                     const ParallelCorpus* test) {
  fs::create_directories(dir);
  if (cfg.checkpoint_dir.empty()) cfg.checkpoint_dir = "checkpoints";
  if (fs::path(cfg.checkpoint_dir).is_absolute()) throw std::invalid_argument("checkpoint_dir must be relative to --out-dir");
  cfg.checkpoint_dir = (dir / cfg.checkpoint_dir).string();
  write_text(dir / "config.txt", config_text(cfg));

  Trainer<S> trainer(cfg);
  const auto t0 = std::chrono::steady_clock::now();
  FitResult fit = trainer.fit(train, valid, dir / "metrics.jsonl");
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  save_checkpoint(dir / "model.ckpt", trainer.checkpoint());
  if (!fit.best.empty()) save_checkpoint(dir / "averaged.ckpt", average_checkpoints(std::span<const fs::path>(fit.best)));
  const bool averaged = trainer.adopt_average(fit, valid);
  EvalResult e;
  const ParallelCorpus* final_set = test ? test : valid;
  if (final_set) {
    EvalOptions o;
    const ObjectiveMode obj = cfg.effective_objective();
    o.ar = obj != ObjectiveMode::nar_only;
    o.nar = obj != ObjectiveMode::ar_only;
    e = trainer.evaluate(*final_set, o);
  }
  json summary = eval_json(e);
  summary["steps"] = trainer.step();
  summary["seconds"] = seconds;
  summary["final_loss"] = fit.losses.empty() ? json() : json(fit.losses.back());
  summary["averaged"] = averaged;
  summary["config"] = config_digest(cfg);
  write_text(dir / "final.json", summary.dump() + "\n");
  std::cout << summary.dump() << '\n';
  return e;
}

struct DataArgs {
  std::string data_dir;
};

struct Splits {
  ParallelCorpus train;
  std::optional<ParallelCorpus> valid, test;
};

Splits load_splits(const std::string& dir, int vocab_size) {
  Splits s;
  s.train = read_corpus(fs::path(dir) / "train", vocab_size);
  if (fs::exists(fs::path(dir) / "valid.src")) s.valid = read_corpus(fs::path(dir) / "valid", vocab_size);
  if (fs::exists(fs::path(dir) / "test.src")) s.test = read_corpus(fs::path(dir) / "test", vocab_size);
  return s;
}

void cmd_train(const Common& c, const DataArgs& d) {
  const TrainConfig cfg = resolve(c);
  cfg.validate();
  const Splits s = load_splits(d.data_dir, cfg.model.vocab_size);
  with_precision(cfg.precision, [&]<typename S>() {
    return train_run<S>(cfg, c.out_dir, s.train, s.valid ? &*s.valid : nullptr, s.test ? &*s.test : nullptr);
  });
}

// --- evaluate / decode / distill ------------------------------------------------

struct ModelArgs {
  std::string checkpoint;
  std::string data;
  std::string input;
  std::string output = "hyps.txt";
  std::string mode = "nar";
  std::string iteration_sweep;
  std::size_t max_sentences = 0;
};

TrainConfig config_for_checkpoint(const Common& c, const Checkpoint& ckpt) {
  TrainConfig base;
  apply_config_text(base, ckpt.run_config, "checkpoint");
  TrainConfig cfg = resolve(c, base);
  cfg.model = ckpt.config;
  return cfg;
}

std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stoi(item));
  return out;
}

void cmd_evaluate(const Common& c, const ModelArgs& a) {
  const Checkpoint ckpt = load_checkpoint(a.checkpoint);
  const TrainConfig cfg = config_for_checkpoint(c, ckpt);
  const ParallelCorpus data = read_corpus(a.data, cfg.model.vocab_size);
  with_precision(cfg.precision, [&]<typename S>() {
    auto model = model_from_checkpoint<S>(ckpt);
    Rng rng(cfg.seed);
    EvalOptions o;
    o.max_sentences = a.max_sentences;
    const EvalResult e = evaluate_model(*model, data, cfg.decode, o, rng);
    const std::string digest = config_digest(cfg);
    std::ofstream log(out_path(c, "evaluate.jsonl"));
    const json metrics = eval_json(e);
    for (const auto& [name, value] : metrics.items()) {
      const std::string line = json{{"name", name}, {"value", value}, {"config", digest}, {"bleu_smoothing", true}}.dump();
      std::cout << line << '\n';
      log << line << '\n';
    }
    if (!a.iteration_sweep.empty()) {
      std::ofstream csv(out_path(c, "iteration_sweep.csv"));
      csv << "iterations,bleu_nar,exact_nar,repeat_pct\n";
      EvalOptions nar_only = o;
      nar_only.ar = false;
      nar_only.similarity = false;
      for (int t : parse_int_list(a.iteration_sweep)) {
        DecodeConfig d = cfg.decode;
        d.nar_iterations = t;
        const EvalResult r = evaluate_model(*model, data, d, nar_only, rng);
        csv << t << ',' << *r.bleu_nar << ',' << *r.exact_nar << ',' << *r.repeat_nar << '\n';
      }
    }
    return 0;
  });
}

void cmd_decode(const Common& c, const ModelArgs& a) {
  const Checkpoint ckpt = load_checkpoint(a.checkpoint);
  const TrainConfig cfg = config_for_checkpoint(c, ckpt);
  const std::vector<Sentence> input = read_sentences(a.input, cfg.model.vocab_size);
  if (a.mode != "ar" && a.mode != "nar") throw CLI::ValidationError("--mode", "expected ar or nar");
  with_precision(cfg.precision, [&]<typename S>() {
    auto model = model_from_checkpoint<S>(ckpt);
    std::vector<Sentence> hyps;
    for (const Sentence& s : input) {
      hyps.push_back(a.mode == "ar" ? beam_search(*model, s, cfg.decode).tokens : mask_predict(*model, s, cfg.decode).tokens);
    }
    write_sentences(out_path(c, a.output), hyps);
    return 0;
  });
}

void cmd_distill(const Common& c, const ModelArgs& a) {
  const Checkpoint ckpt = load_checkpoint(a.checkpoint);
  const TrainConfig cfg = config_for_checkpoint(c, ckpt);
  const ParallelCorpus data = read_corpus(a.data, cfg.model.vocab_size);
  with_precision(cfg.precision, [&]<typename S>() {
    auto model = model_from_checkpoint<S>(ckpt);
    const DistillReport r = distill(*model, data, cfg.decode);
    write_corpus(out_path(c, "distill"), r.corpus);
    std::cout << json{{"sentences", r.corpus.size()}, {"empty_replaced", r.empty_replaced}, {"truncated", r.truncated}}.dump()
              << '\n';
    return 0;
  });
}

// --- ablate -----------------------------------------------------------------

struct AblateArgs {
  std::string data_dir;
  std::string axes = "se,tml,scl";
};

struct Variant {
  std::string name;
  std::vector<std::pair<std::string, std::string>> settings;
};

std::vector<Variant> ablation_variants(const std::string& axes) {
  std::vector<Variant> out;
  if (axes == "mask-ratio") {
    for (const char* r : {"0.1", "0.3", "0.5", "0.7", "0.9"})
      out.push_back({std::string("ratio-") + r, {{"mask_strategy", "fixed"}, {"mask_ratio", r}}});
    return out;
  }
  if (axes == "pe") {
    for (const char* enc : {"sinusoidal", "learnable"}) {
      for (auto [ar, nar] : {std::pair{"sinusoidal", "sinusoidal"}, {"sinusoidal", "learnable"}, {"learnable", "learnable"}}) {
        out.push_back({std::string("enc-") + enc + "_ar-" + ar + "_nar-" + nar, {{"enc_pe", enc}, {"ar_pe", ar}, {"nar_pe", nar}}});
      }
    }
    return out;
  }
  if (axes == "direction") {
    for (const char* d : {"none", "nar-to-ar", "ar-to-nar", "mutual"}) out.push_back({std::string("dir-") + d, {{"distill_direction", d}}});
    return out;
  }
  if (axes == "selection") {
    for (const char* s : {"all", "random", "high-inter", "high-union", "low-inter", "low-union"})
      out.push_back({std::string("sel-") + s, {{"selection", s}}});
    return out;
  }
  // Toggle axes: every on/off combination.
  std::vector<std::string> toggles;
  std::stringstream ss(axes);
  std::string item;
  while (std::getline(ss, item, ',')) {
    static const std::map<std::string, std::string> keys = {{"se", "share_encoder"}, {"tml", "use_tml"}, {"scl", "use_scl"},
                                                            {"hyb", "use_hybrid"}};
    const auto it = keys.find(item);
    if (it == keys.end()) throw CLI::ValidationError("--axes", "unknown axis '" + item + "' (se, tml, scl, hyb, mask-ratio, pe, direction, selection)");
    toggles.push_back(item);
  }
  if (toggles.empty()) throw CLI::ValidationError("--axes", "no axes given");
  for (unsigned mask = 0; mask < (1u << toggles.size()); ++mask) {
    Variant v;
    for (std::size_t k = 0; k < toggles.size(); ++k) {
      const bool on = (mask >> (toggles.size() - 1 - k)) & 1u;
      static const std::map<std::string, std::string> keys = {{"se", "share_encoder"}, {"tml", "use_tml"}, {"scl", "use_scl"},
                                                              {"hyb", "use_hybrid"}};
      v.name += (v.name.empty() ? "" : "_") + toggles[k] + (on ? "-on" : "-off");
      v.settings.emplace_back(keys.at(toggles[k]), on ? "true" : "false");
      if (toggles[k] == "hyb" && on) v.settings.emplace_back("hybrid_enabled", "true");
    }
    out.push_back(std::move(v));
  }
  return out;
}

void cmd_ablate(const Common& c, const AblateArgs& a) {
  const TrainConfig base = resolve(c);
  const std::vector<Variant> variants = ablation_variants(a.axes);
  const Splits s = load_splits(a.data_dir, base.model.vocab_size);
  std::ofstream csv(out_path(c, "ablation.csv"));
  csv << "run,bleu_ar,bleu_nar,repeat_pct,exact_nar,similarity\n";
  for (const Variant& v : variants) {
    TrainConfig cfg = base;
    for (const auto& [k, val] : v.settings) set_config_value(cfg, k, val);
    cfg.validate();
    const EvalResult e = with_precision(cfg.precision, [&]<typename S>() {
      return train_run<S>(cfg, fs::path(c.out_dir) / v.name, s.train, s.valid ? &*s.valid : nullptr, s.test ? &*s.test : nullptr);
    });
    auto f = [](const std::optional<double>& x) { return x ? std::to_string(*x) : std::string(); };
    csv << v.name << ',' << f(e.bleu_ar) << ',' << f(e.bleu_nar) << ',' << f(e.repeat_nar) << ',' << f(e.exact_nar) << ','
        << f(e.similarity) << '\n'
        << std::flush;
  }
}

// --- gradcheck --------------------------------------------------------------

struct GradArgs {
  double eps = 1e-3;
  double tolerance = 1e-3;
  bool richardson = false;
};

int cmd_gradcheck(const Common& c, const GradArgs& a) {
  const TrainConfig cfg = resolve(c, tiny_config());
  const auto entries = run_gradient_suite(cfg, cfg.seed, a.eps, 0, a.richardson ? Stencil::richardson : Stencil::central);
  double worst = 0.0;
  json report = json::array();
  for (const auto& e : entries) {
    worst = std::max(worst, e.result.max_rel_error);
    report.push_back({{"objective", e.name}, {"max_rel_error", e.result.max_rel_error}, {"checked", e.result.n_checked},
                      {"worst", {{"leaf", e.result.worst_leaf}, {"index", e.result.worst_index},
                                 {"analytic", e.result.worst_analytic}, {"numeric", e.result.worst_numeric}}}});
  }
  std::cout << json{{"max_rel_error", worst}, {"eps", a.eps}, {"stencil", a.richardson ? "richardson" : "central"}, {"pass", worst < a.tolerance}, {"objectives", report}}.dump() << '\n';
  return worst < a.tolerance ? 0 : 2;
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"Joint AR / NAR translation training with mutual and contrastive learning"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "help for every subcommand");

  Common gen_c, train_c, eval_c, decode_c, distill_c, ablate_c, grad_c;
  GenArgs gen;
  DataArgs data;
  ModelArgs eval_a, decode_a, distill_a;
  AblateArgs ablate;
  GradArgs grad;

  CLI::App* g = app.add_subcommand("gen-data", "write a synthetic parallel corpus");
  add_common(g, gen_c, true);
  g->add_option("--task", gen.task, "copy|reverse|lexicon")->capture_default_str();
  g->add_option("--min-length", gen.min_len, "shortest sentence")->capture_default_str();
  g->add_option("--max-length", gen.max_len, "longest sentence")->capture_default_str();
  g->add_option("--train", gen.n_train, "training pairs")->capture_default_str();
  g->add_option("--valid", gen.n_valid, "validation pairs")->capture_default_str();
  g->add_option("--test", gen.n_test, "test pairs")->capture_default_str();

  CLI::App* t = app.add_subcommand("train", "train a model; writes checkpoints and a metrics log");
  add_common(t, train_c, true);
  t->add_option("--data-dir", data.data_dir, "directory with train/valid/test .src/.tgt")->required()->check(CLI::ExistingDirectory);

  CLI::App* e = app.add_subcommand("evaluate", "BLEU, repetition and similarity of a checkpoint");
  add_common(e, eval_c, true);
  e->add_option("--checkpoint", eval_a.checkpoint)->required()->check(CLI::ExistingFile);
  e->add_option("--data", eval_a.data, "corpus prefix, e.g. data/test")->required();
  e->add_option("--max-sentences", eval_a.max_sentences, "0: all");
  e->add_option("--iteration-sweep", eval_a.iteration_sweep, "comma-separated NAR iteration counts; writes iteration_sweep.csv");

  CLI::App* d = app.add_subcommand("decode", "translate one sentence per line");
  add_common(d, decode_c, true);
  d->add_option("--checkpoint", decode_a.checkpoint)->required()->check(CLI::ExistingFile);
  d->add_option("--input", decode_a.input, "source sentences")->required()->check(CLI::ExistingFile);
  d->add_option("--output", decode_a.output, "hypothesis file name inside --out-dir")->capture_default_str();
  d->add_option("--mode", decode_a.mode, "ar|nar")->capture_default_str();

  CLI::App* k = app.add_subcommand("distill", "replace targets with a teacher's beam outputs");
  add_common(k, distill_c, true);
  k->add_option("--checkpoint", distill_a.checkpoint, "AR teacher")->required()->check(CLI::ExistingFile);
  k->add_option("--data", distill_a.data, "corpus prefix")->required();

  CLI::App* a = app.add_subcommand("ablate", "train one run per ablation setting");
  add_common(a, ablate_c, true);
  a->add_option("--data-dir", ablate.data_dir)->required()->check(CLI::ExistingDirectory);
  a->add_option("--axes", ablate.axes, "se,tml,scl[,hyb] | mask-ratio | pe | direction | selection")->capture_default_str();

  CLI::App* r = app.add_subcommand("gradcheck", "finite-difference check of every loss on a tiny model");
  add_common(r, grad_c, true);
  r->add_option("--eps", grad.eps)->capture_default_str();
  r->add_option("--tolerance", grad.tolerance)->capture_default_str();
  r->add_flag("--richardson", grad.richardson, "extrapolate the central quotient from eps and eps/2");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& ex) {
    return app.exit(ex);
  } catch (const CLI::CallForAllHelp& ex) {
    return app.exit(ex);
  } catch (const CLI::ParseError& ex) {
    app.exit(ex);
    return 1;
  }

  try {
    if (g->parsed()) cmd_gen_data(gen_c, gen);
    if (t->parsed()) cmd_train(train_c, data);
    if (e->parsed()) cmd_evaluate(eval_c, eval_a);
    if (d->parsed()) cmd_decode(decode_c, decode_a);
    if (k->parsed()) cmd_distill(distill_c, distill_a);
    if (a->parsed()) cmd_ablate(ablate_c, ablate);
    if (r->parsed()) return cmd_gradcheck(grad_c, grad);
  } catch (const CLI::ParseError& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return 1;
  } catch (const std::invalid_argument& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return 1;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return 2;
  }
  return 0;
}

}  // namespace dcmcl
