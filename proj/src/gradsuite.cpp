#include "dcmcl/gradsuite.hpp"

#include <stdexcept>

#include "dcmcl/data.hpp"
#include "dcmcl/trainer.hpp"

namespace dcmcl {

TrainConfig tiny_config() {
  TrainConfig c;
  c.model.vocab_size = 8;
  c.model.d_model = 8;
  c.model.d_hidden = 16;
  c.model.n_heads = 2;
  c.model.n_enc_layers = 1;
  c.model.n_dec_layers = 1;
  c.model.max_len = 8;
  c.model.dropout = 0.0;
  c.model.hybrid_enabled = true;
  c.decode.max_decode_len = 6;
  c.decode.length_beam = 3;
  return c;
}

namespace {

using Pick = std::optional<Var<double>> Components<Var<double>>::*;

}  // namespace

std::vector<GradSuiteEntry> run_gradient_suite(const TrainConfig& config, std::uint64_t seed, double eps,
                                               std::size_t max_per_leaf, Stencil stencil) {
  TrainConfig base = config;
  base.model.dropout = 0.0;
  base.model.hybrid_enabled = true;
  base.use_hybrid = false;
  base.objective = ObjectiveMode::dcmcl;
  base.validate();

  Rng rng(seed);
  Model<double> model(base.model, rng);
  // Nudge every parameter off its init so biases and gains are generic.
  for (Parameter<double>* p : model.parameters())
    for (Index i = 0; i < p->value.size(); ++i) p->value.data()[i] += 0.05 * rng.normal();

  const int max_tok = std::min(4, base.model.max_len - 2);
  Batch batch;
  for (int b = 0; b < 2; ++b) {
    Sentence s(static_cast<std::size_t>(rng.uniform_int(2, max_tok)));
    Sentence t(static_cast<std::size_t>(rng.uniform_int(2, max_tok)));
    for (int& x : s) x = static_cast<int>(rng.uniform_int(kFirstWord, base.model.vocab_size - 1));
    for (int& x : t) x = static_cast<int>(rng.uniform_int(kFirstWord, base.model.vocab_size - 1));
    batch.indices.push_back(static_cast<std::size_t>(b));
    batch.src.push_back(std::move(s));
    batch.tgt.push_back(std::move(t));
  }
  const PreparedBatch prepared = prepare_batch(batch, base, rng);

  TrainConfig hyb = base;
  hyb.use_hybrid = true;

  auto params = model.parameters();
  std::vector<GradSuiteEntry> out;
  auto check = [&](const std::string& name, const TrainConfig& cfg, Pick pick) {
    Objective f = [&model, &cfg, &prepared, pick](Tape<double>& tape) {
      ObjectiveGraph<double> g = build_objective(tape, model, cfg, prepared, ForwardMode{}, nullptr);
      if (pick == nullptr) return g.total;
      const std::optional<Var<double>>& v = g.parts.*pick;
      if (!v) throw std::logic_error("gradient suite: component missing");
      return *v;
    };
    out.push_back({name, grad_check(f, params, eps, max_per_leaf, stencil)});
  };
  using C = Components<Var<double>>;
  check("ml_ar", base, &C::ml_ar);
  check("ml_nar", base, &C::ml_nar);
  check("length", base, &C::length);
  check("tml_ar", base, &C::tml_ar);
  check("tml_nar", base, &C::tml_nar);
  check("scl_ar", base, &C::scl_ar);
  check("scl_nar", base, &C::scl_nar);
  check("dcmcl", base, nullptr);
  check("ml_hyb", hyb, &C::ml_hyb);
  check("tml_ar_hyb", hyb, &C::tml_ar);
  check("tml_nar_hyb", hyb, &C::tml_nar);
  check("scl_ar_hyb", hyb, &C::scl_ar);
  check("scl_nar_hyb", hyb, &C::scl_nar);
  check("dcmcl_hyb", hyb, nullptr);
  return out;
}

}  // namespace dcmcl
