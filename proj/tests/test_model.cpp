#include "doctest.h"

#include <cmath>

#include "dcmcl/losses.hpp"
#include "dcmcl/model.hpp"
#include "support.hpp"

using namespace dcmcl;
using M = Mat<double>;

namespace {

ModelConfig tiny(int heads = 1) {
  ModelConfig c;
  c.vocab_size = 10;
  c.d_model = 8;
  c.d_hidden = 12;
  c.n_heads = heads;
  c.n_enc_layers = 1;
  c.n_dec_layers = 1;
  c.max_len = 8;
  c.dropout = 0.0;
  c.hybrid_enabled = true;
  return c;
}

// Randomizes every parameter so biases and gains are not at their init.
void jitter(Model<double>& m, std::uint64_t seed) {
  Rng r(seed);
  for (auto* p : m.parameters())
    for (Index i = 0; i < p->value.size(); ++i) p->value.data()[i] += 0.3 * r.normal();
}

// Straight-line reference forward over one sequence, read from parameters by name.
struct Reference {
  Model<double>& m;
  const ModelConfig& c;

  const M& w(const std::string& n) const {
    const Parameter<double>* p = m.find(n);
    REQUIRE_MESSAGE(p != nullptr, n);
    return p->value;
  }
  M lin(const M& x, const std::string& n) const {
    return (x * w(n + ".weight")).rowwise() + w(n + ".bias").row(0);
  }
  M ln(const M& x, const std::string& n) const {
    M y(x.rows(), x.cols());
    for (Index i = 0; i < x.rows(); ++i) {
      const double mu = x.row(i).mean();
      const double var = (x.row(i).array() - mu).square().mean();
      for (Index j = 0; j < x.cols(); ++j)
        y(i, j) = (x(i, j) - mu) / std::sqrt(var + 1e-5) * w(n + ".gain")(0, j) + w(n + ".bias")(0, j);
    }
    return y;
  }
  static M gelu(const M& x) {
    M y = x;
    for (Index i = 0; i < y.size(); ++i) {
      const double v = x.data()[i];
      y.data()[i] = 0.5 * v * (1.0 + std::tanh(std::sqrt(2.0 / M_PI) * (v + 0.044715 * v * v * v)));
    }
    return y;
  }
  M attn(const M& x, const M& kv, const std::string& n, bool causal) const {
    const M q = lin(x, n + ".q"), k = lin(kv, n + ".k"), v = lin(kv, n + ".v");
    const Index dh = c.d_model / c.n_heads;
    M out(x.rows(), c.d_model);
    for (int h = 0; h < c.n_heads; ++h) {
      M s = q.middleCols(h * dh, dh) * k.middleCols(h * dh, dh).transpose() / std::sqrt(static_cast<double>(dh));
      for (Index i = 0; i < s.rows(); ++i) {
        double mx = -1e300;
        for (Index j = 0; j < s.cols(); ++j)
          if (!causal || j <= i) mx = std::max(mx, s(i, j));
        double z = 0;
        for (Index j = 0; j < s.cols(); ++j) z += s(i, j) = (causal && j > i) ? 0.0 : std::exp(s(i, j) - mx);
        s.row(i) /= z;
      }
      out.middleCols(h * dh, dh) = s * v.middleCols(h * dh, dh);
    }
    return lin(out, n + ".o");
  }
  M embed(const std::vector<int>& ids, const std::string& prefix, PositionEncoding pe) const {
    M x(static_cast<Index>(ids.size()), c.d_model);
    for (Index i = 0; i < x.rows(); ++i) {
      x.row(i) = std::sqrt(static_cast<double>(c.d_model)) * w(prefix + ".embed").row(ids[static_cast<std::size_t>(i)]);
      for (int k = 0; k < c.d_model / 2; ++k) {
        const double a = static_cast<double>(i) / std::pow(10000.0, 2.0 * k / c.d_model);
        if (pe == PositionEncoding::sinusoidal) {
          x(i, 2 * k) += std::sin(a);
          x(i, 2 * k + 1) += std::cos(a);
        }
      }
      if (pe == PositionEncoding::learnable) x.row(i) += w(prefix + ".pos").row(i);
    }
    return x;
  }
  M encode(const std::vector<int>& src) const {
    M x = embed(src, "encoder", c.enc_pe);
    const std::string n = "encoder.layers.0";
    x = ln(x + attn(x, x, n + ".self_attn", false), n + ".ln_attn");
    return ln(x + lin(gelu(lin(x, n + ".ffn_in")), n + ".ffn_out"), n + ".ln_ffn");
  }
  M decode(const M& e, const std::vector<int>& y, const std::string& prefix, PositionEncoding pe, bool causal) const {
    M x = embed(y, prefix, pe);
    const std::string n = prefix + ".layers.0";
    x = ln(x + attn(x, x, n + ".self_attn", causal), n + ".ln_self");
    x = ln(x + attn(x, e, n + ".cross_attn", false), n + ".ln_cross");
    return ln(x + lin(gelu(lin(x, n + ".ffn_in")), n + ".ffn_out"), n + ".ln_ffn");
  }
};

}  // namespace

TEST_CASE("sinusoidal_pe examples") {
  const M pe = sinusoidal_pe<double>(4096, 16);
  for (int i = 0; i < 8; ++i) {
    CHECK(pe(0, 2 * i) == 0.0);
    CHECK(pe(0, 2 * i + 1) == 1.0);
  }
  CHECK(pe(1, 0) == doctest::Approx(0.84147).epsilon(1e-5));
  CHECK(pe(1, 1) == doctest::Approx(0.54030).epsilon(1e-5));
  CHECK(pe.cwiseAbs().maxCoeff() <= 1.0);
  CHECK_THROWS_AS(sinusoidal_pe<double>(4, 7), std::invalid_argument);
}

TEST_CASE("encode shape, position sensitivity and vocabulary errors") {
  Rng rng(1);
  const ModelConfig c = tiny();
  Model<double> m(c, rng);
  Tape<double> t(false);
  const Var<double> e = m.encode(t, TokenBatch::from({{4, 5, 6, 7, 8}}), {});
  CHECK(e.rows() == 5);
  CHECK(e.cols() == c.d_model);
  const M a = e.value();
  const M b = m.encode(t, TokenBatch::from({{5, 4, 6, 7, 8}}), {}).value();
  CHECK(test::max_abs(a, b) > 1e-6);
  CHECK_THROWS_WITH(m.encode(t, TokenBatch::from({{4, 5, 99}}), {}), doctest::Contains("position 2"));
  CHECK_THROWS_AS(m.encode(t, TokenBatch::from({std::vector<int>(9, 4)}), {}), std::invalid_argument);
}

TEST_CASE("forward matches a straight-line reference") {
  for (int heads : {1, 2}) {
    for (PositionEncoding nar_pe : {PositionEncoding::sinusoidal, PositionEncoding::learnable}) {
      CAPTURE(heads);
      ModelConfig c = tiny(heads);
      c.nar_pe = nar_pe;
      Rng rng(3);
      Model<double> m(c, rng);
      jitter(m, 11);
      Reference ref{m, c};
      const std::vector<int> src{4, 9, 6, 5, 7};
      const std::vector<int> y_in{kBos, 8, 5, 6};
      const std::vector<int> y_obs{kMask, 5, kMask, kEos};

      Tape<double> t(false);
      const Var<double> e = m.encode(t, TokenBatch::from({src}), {});
      const M e_ref = ref.encode(src);
      CHECK(test::max_abs(e.value(), e_ref) < 1e-6);
      const M h_ar = m.ar_states(t, e, TokenBatch::from({src}), TokenBatch::from({y_in}), {}).value();
      CHECK(test::max_abs(h_ar, ref.decode(e_ref, y_in, "ar_decoder", c.ar_pe, true)) < 1e-6);
      const M h_nar = m.nar_states(t, e, TokenBatch::from({src}), TokenBatch::from({y_obs}), {}).value();
      CHECK(test::max_abs(h_nar, ref.decode(e_ref, y_obs, "nar_decoder", c.nar_pe, false)) < 1e-6);

      const M h_hyb = m.hybrid_states(t, t.constant(h_ar), t.constant(h_nar)).value();
      M cat(h_ar.rows(), 2 * c.d_model);
      cat << h_ar, h_nar;
      CHECK(test::max_abs(h_hyb, ref.lin(Reference::gelu(ref.lin(cat, "hybrid.fc1")), "hybrid.fc2")) < 1e-8);
    }
  }
}

TEST_CASE("AR states are causal: later inputs never reach earlier positions") {
  Rng rng(5);
  ModelConfig c = tiny(2);
  c.n_dec_layers = 2;
  Model<double> m(c, rng);
  jitter(m, 6);
  Rng pick(8);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<int> y{kBos, 4, 5, 6, 7, 8};
    Tape<double> t(false);
    const TokenBatch src = TokenBatch::from({{4, 5, 6}});
    const Var<double> e = m.encode(t, src, {});
    const M base = m.ar_states(t, e, src, TokenBatch::from({y}), {}).value();
    const int cut = static_cast<int>(pick.uniform_int(0, 4));
    for (std::size_t j = static_cast<std::size_t>(cut) + 1; j < y.size(); ++j) y[j] = static_cast<int>(pick.uniform_int(4, 9));
    const M other = m.ar_states(t, e, src, TokenBatch::from({y}), {}).value();
    CHECK((base.topRows(cut + 1).array() == other.topRows(cut + 1).array()).all());
  }
}

TEST_CASE("NAR states ignore the gold identity of masked slots and accept all-masked input") {
  Rng rng(2);
  Model<double> m(tiny(), rng);
  Tape<double> t(false);
  const TokenBatch src = TokenBatch::from({{4, 5, 6}});
  const Var<double> e = m.encode(t, src, {});
  // Gold [7, 8, eos] and [9, 4, eos] with slot 0 masked present identical inputs.
  const M a = m.nar_states(t, e, src, TokenBatch::from({{kMask, 8, kEos}}), {}).value();
  const M b = m.nar_states(t, e, src, TokenBatch::from({{kMask, 8, kEos}}), {}).value();
  CHECK((a.array() == b.array()).all());
  const M all = m.nar_states(t, e, src, TokenBatch::from({std::vector<int>(5, kMask)}), {}).value();
  CHECK(all.rows() == 5);
  CHECK(all.allFinite());
}

TEST_CASE("output distributions") {
  Rng rng(4);
  const ModelConfig c = tiny();
  Model<double> m(c, rng);
  Tape<double> t(false);
  const M h = test::random_mat(6, c.d_model, rng);
  for (OutputHead head : {OutputHead::ar, OutputHead::nar, OutputHead::hyb}) {
    const M p = m.output_distribution(t, t.constant(h), head).value();
    CHECK((p.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-6);
  }
  const M u = m.output_distribution(t, t.constant(M::Zero(3, c.d_model)), OutputHead::ar).value();
  CHECK((u.array() - 1.0 / c.vocab_size).abs().maxCoeff() < 1e-15);

  const M before = m.output_distribution(t, t.constant(h), OutputHead::nar).value();
  m.find("nar_decoder.out.weight")->value *= 2.0;
  const M after = m.output_distribution(t, t.constant(h), OutputHead::nar).value();
  for (Index i = 0; i < h.rows(); ++i) {
    Index x, y;
    before.row(i).maxCoeff(&x);
    after.row(i).maxCoeff(&y);
    CHECK(x == y);
  }

  ModelConfig plain = c;
  plain.hybrid_enabled = false;
  Rng r2(1);
  Model<double> no_hyb(plain, r2);
  CHECK_THROWS_AS(no_hyb.output_distribution(t, t.constant(h), OutputHead::hyb), std::logic_error);
  CHECK_THROWS_AS(no_hyb.hybrid_states(t, t.constant(h), t.constant(h)), std::logic_error);
}

TEST_CASE("hybrid states are per position") {
  Rng rng(9);
  const ModelConfig c = tiny();
  Model<double> m(c, rng);
  jitter(m, 2);
  Tape<double> t(false);
  M a = test::random_mat(5, c.d_model, rng);
  const M b = test::random_mat(5, c.d_model, rng);
  const M h0 = m.hybrid_states(t, t.constant(a), t.constant(b)).value();
  CHECK(h0.rows() == 5);
  CHECK(h0.cols() == c.d_model);
  a(2, 3) += 1.0;
  const M h1 = m.hybrid_states(t, t.constant(a), t.constant(b)).value();
  for (Index i = 0; i < 5; ++i) {
    if (i == 2)
      CHECK(test::max_abs(h0.row(i), h1.row(i)) > 0.0);
    else
      CHECK((h0.row(i).array() == h1.row(i).array()).all());
  }
  CHECK_THROWS_AS(m.hybrid_states(t, t.constant(a), t.constant(b.topRows(4).eval())), std::invalid_argument);
}

TEST_CASE("length logits: shape and invariance to the order of encoder rows") {
  Rng rng(7);
  const ModelConfig c = tiny();
  Model<double> m(c, rng);
  jitter(m, 3);
  Tape<double> t(false);
  const TokenBatch src = TokenBatch::from({{4, 5, 6, 7}});
  const M e = m.encode(t, src, {}).value();
  const M l0 = m.length_logits(t, t.constant(e), src).value();
  CHECK(l0.rows() == 1);
  CHECK(l0.cols() == c.max_len);
  M perm = e;
  perm.row(0).swap(perm.row(3));
  perm.row(1).swap(perm.row(2));
  CHECK(test::max_abs(l0, m.length_logits(t, t.constant(perm), src).value()) < 1e-12);
}

namespace {

// Gradient of ML_AR or ML_NAR alone, built by hand.
void ml_gradient(Model<double>& m, bool ar) {
  m.zero_grad();
  Tape<double> t;
  const TokenBatch src = TokenBatch::from({{4, 5, 6}, {7, 8}});
  const Var<double> e = m.encode(t, src, {}, ar ? EncoderSide::ar : m.nar_encoder_side());
  const TokenBatch y = ar ? TokenBatch::from({{kBos, 6, 7}, {kBos, 9, 5}}) : TokenBatch::from({{kMask, 7, kEos}, {9, kMask, kEos}});
  const std::vector<int> gold = ar ? std::vector<int>{6, 7, kEos, 9, 5, kEos} : std::vector<int>{6, 7, kEos, 9, 5, kEos};
  const std::vector<int> rows = ar ? std::vector<int>{0, 1, 2, 3, 4, 5} : std::vector<int>{0, 4};
  const Var<double> h = ar ? m.ar_states(t, e, src, y, {}) : m.nar_states(t, e, src, y, {});
  const Var<double> loss = nll(log_softmax_rows(m.logits(t, h, ar ? OutputHead::ar : OutputHead::nar)), gold, rows, 0.1);
  t.backward(loss);
}

bool all_zero(const Parameter<double>* p) { return (p->grad.array() == 0.0).all(); }

}  // namespace

TEST_CASE("parameter partition: each NLL touches only its own blocks") {
  for (bool shared : {true, false}) {
    CAPTURE(shared);
    ModelConfig c = tiny(2);
    c.share_encoder = shared;
    Rng rng(12);
    Model<double> m(c, rng);
    jitter(m, 13);
    for (bool ar : {true, false}) {
      CAPTURE(ar);
      ml_gradient(m, ar);
      bool encoder_touched = false;
      for (const Parameter<double>* p : std::as_const(m).parameters()) {
        switch (p->group) {
          case ParamGroup::ar_decoder: CHECK_MESSAGE((ar || all_zero(p)), p->name); break;
          case ParamGroup::nar_decoder: CHECK_MESSAGE((!ar || all_zero(p)), p->name); break;
          case ParamGroup::hybrid:
          case ParamGroup::length_head: CHECK_MESSAGE(all_zero(p), p->name); break;
          case ParamGroup::encoder:
            if (!shared && !ar) CHECK_MESSAGE(all_zero(p), p->name);
            if (ar || shared) encoder_touched = encoder_touched || !all_zero(p);
            break;
          case ParamGroup::encoder_nar:
            if (ar) CHECK_MESSAGE(all_zero(p), p->name);
            else encoder_touched = encoder_touched || !all_zero(p);
            break;
        }
      }
      CHECK(encoder_touched);
    }
  }
}

TEST_CASE("all positional-encoding combinations construct and run") {
  for (PositionEncoding enc : {PositionEncoding::sinusoidal, PositionEncoding::learnable}) {
    for (auto [ar, nar] : {std::pair{PositionEncoding::sinusoidal, PositionEncoding::sinusoidal},
                           {PositionEncoding::sinusoidal, PositionEncoding::learnable},
                           {PositionEncoding::learnable, PositionEncoding::learnable}}) {
      ModelConfig c = tiny();
      c.enc_pe = enc;
      c.ar_pe = ar;
      c.nar_pe = nar;
      Rng rng(1);
      Model<double> m(c, rng);
      Tape<double> t(false);
      const TokenBatch src = TokenBatch::from({{4, 5}});
      const Var<double> e = m.encode(t, src, {});
      CHECK(m.ar_states(t, e, src, TokenBatch::from({{kBos, 4}}), {}).value().allFinite());
      CHECK(m.nar_states(t, e, src, TokenBatch::from({{kMask, kEos}}), {}).value().allFinite());
    }
  }
}

TEST_CASE("eval-mode forward is bit-deterministic and training mode draws dropout") {
  ModelConfig c = tiny();
  c.dropout = 0.3;
  Rng rng(1);
  Model<double> m(c, rng);
  const TokenBatch src = TokenBatch::from({{4, 5, 6, 7}});
  Tape<double> t(false);
  const M a = m.encode(t, src, {}).value();
  const M b = m.encode(t, src, {}).value();
  CHECK((a.array() == b.array()).all());
  Rng d(3);
  ForwardMode train{true, &d, true};
  CHECK(test::max_abs(a, m.encode(t, src, train).value()) > 0.0);
  CHECK_THROWS_AS(m.encode(t, src, ForwardMode{true, nullptr, true}), std::logic_error);
}

TEST_CASE("padding does not change a sentence's states") {
  Rng rng(21);
  Model<double> m(tiny(2), rng);
  jitter(m, 4);
  Tape<double> t(false);
  const TokenBatch one = TokenBatch::from({{4, 5, 6}});
  const TokenBatch two = TokenBatch::from({{4, 5, 6}, {7, 8, 9, 4, 5}});
  const M e1 = m.encode(t, one, {}).value();
  const M e2 = m.encode(t, two, {}).value();
  CHECK(test::max_abs(e1, e2.topRows(3)) < 1e-12);
}
