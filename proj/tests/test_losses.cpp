#include "doctest.h"

#include <cmath>
#include <numbers>

#include "dcmcl/losses.hpp"
#include "dcmcl/model.hpp"
#include "support.hpp"

using namespace dcmcl;
using M = Mat<double>;

namespace {

double nll_oracle(const M& p, const std::vector<int>& gold, const std::vector<int>& rows, double eps) {
  double s = 0;
  for (int r : rows) {
    double smooth = 0;
    for (Index v = 0; v < p.cols(); ++v) smooth += -std::log(p(r, v));
    s += (1 - eps) * -std::log(p(r, gold[static_cast<std::size_t>(r)])) + eps * smooth / static_cast<double>(p.cols());
  }
  return s / static_cast<double>(rows.size());
}

double cos(const M& a, const M& b) { return a.row(0).dot(b.row(0)) / (a.norm() * b.norm() + 1e-12); }

double contrastive_oracle(const M& q, const M& k) {
  const Index n = q.rows();
  double s = 0;
  for (Index b = 0; b < n; ++b) {
    double z = 0;
    for (Index i = 0; i < n; ++i) z += std::exp(cos(q.row(b), k.row(i)));
    s += -std::log(std::exp(cos(q.row(b), k.row(b))) / z);
  }
  return s / static_cast<double>(n);
}

}  // namespace

TEST_CASE("nll examples") {
  Tape<double> t(false);
  M one_hot = M::Constant(1, 4, 1e-12);
  one_hot(0, 2) = 1 - 3e-12;
  const std::vector<int> g{2};
  const std::vector<int> r{0};
  CHECK(nll(t.constant(one_hot.array().log().matrix()), g, r, 0.0).item() == doctest::Approx(0.0));
  CHECK(nll(t.constant(M::Constant(1, 4, std::log(0.25))), g, r, 0.0).item() ==
        doctest::Approx(std::log(4.0)).epsilon(1e-15));

  Rng rng(3);
  const M p = test::random_dist(6, 5, rng);
  const std::vector<int> gold{0, 4, 2, 2, 1, 3};
  const std::vector<int> rows{0, 2, 3, 5};
  CHECK(std::abs(nll(t.constant(M(p.array().log())), gold, rows, 0.1).item() - nll_oracle(p, gold, rows, 0.1)) < 1e-10);
  CHECK(std::abs(nll_from_probs(t.constant(p), gold, rows, 0.1).item() - nll_oracle(p, gold, rows, 0.1)) < 1e-10);
  // eps = 0 is plain cross-entropy
  CHECK(std::abs(nll(t.constant(M(p.array().log())), gold, rows, 0.0).item() - nll_oracle(p, gold, rows, 0.0)) < 1e-12);
}

TEST_CASE("nll on an empty selection is zero without gradient") {
  test::Leaves l;
  Rng rng(1);
  l.add(test::random_mat(3, 4, rng));
  Tape<double> t;
  const std::vector<int> gold{1, 2, 3};
  const Var<double> loss = nll(log_softmax_rows(t.param(*l.ptrs[0])), gold, {}, 0.1);
  CHECK(loss.item() == 0.0);
  CHECK_FALSE(loss.requires_grad());
}

TEST_CASE("tml_pair examples") {
  Tape<double> t(false);
  Rng rng(11);
  const M pa = test::random_dist(5, 6, rng), pn = test::random_dist(5, 6, rng);
  const std::vector<int> rows{1, 3, 4};
  LossPair<double> same = tml_pair(t.constant(pa), t.constant(pa), rows);
  CHECK(same.ar.item() == 0.0);
  CHECK(same.nar.item() == 0.0);

  M half(1, 2), hot(1, 2);
  half << 0.5, 0.5;
  hot << 1.0, 0.0;
  const std::vector<int> r0{0};
  CHECK(tml_pair(t.constant(half), t.constant(hot), r0).ar.item() == doctest::Approx(std::numbers::ln2).epsilon(1e-14));

  const LossPair<double> lp = tml_pair(t.constant(pa), t.constant(pn), rows);
  double ar = 0, nar = 0;
  for (int r : rows) {
    for (Index v = 0; v < 6; ++v) {
      ar += pn(r, v) * std::log(pn(r, v) / pa(r, v));
      nar += pa(r, v) * std::log(pa(r, v) / pn(r, v));
    }
  }
  CHECK(std::abs(lp.ar.item() - ar / 3) < 1e-10);
  CHECK(std::abs(lp.nar.item() - nar / 3) < 1e-10);
  CHECK(lp.ar.item() >= -1e-9);

  const LossPair<double> empty = tml_pair(t.constant(pa), t.constant(pn), {});
  CHECK(empty.ar.item() == 0.0);
  CHECK(empty.nar.item() == 0.0);
}

TEST_CASE("tml stop-gradient: each direction only moves its student") {
  Rng rng(2);
  test::Leaves l;
  Parameter<double>& za = l.add(test::random_mat(4, 5, rng));
  Parameter<double>& zn = l.add(test::random_mat(4, 5, rng));
  const std::vector<int> rows{0, 2, 3};
  for (bool ar_dir : {true, false}) {
    za.zero_grad();
    zn.zero_grad();
    Tape<double> t;
    const LossPair<double> lp = tml_pair(softmax_rows(t.param(za)), softmax_rows(t.param(zn)), rows);
    t.backward(ar_dir ? lp.ar : lp.nar);
    const Parameter<double>& teacher = ar_dir ? zn : za;
    const Parameter<double>& student = ar_dir ? za : zn;
    CHECK((teacher.grad.array() == 0.0).all());
    CHECK(student.grad.cwiseAbs().maxCoeff() > 0.0);
  }
}

TEST_CASE("scl examples") {
  Tape<double> t(false);
  Rng rng(5);
  const M one = test::random_mat(1, 6, rng);
  const LossPair<double> b1 = scl_pair(t.constant(one), t.constant(test::random_mat(1, 6, rng)));
  CHECK(std::abs(b1.ar.item()) < 1e-15);
  CHECK(std::abs(b1.nar.item()) < 1e-15);

  for (int b : {2, 3, 7}) {
    const M same = one.replicate(b, 1);
    const LossPair<double> lp = scl_pair(t.constant(same), t.constant(same));
    CHECK(std::abs(lp.ar.item() - std::log(static_cast<double>(b))) < 1e-9);
    CHECK(std::abs(lp.nar.item() - std::log(static_cast<double>(b))) < 1e-9);
  }

  Rng r5(5);
  const M q = test::random_mat(3, 6, r5), k = test::random_mat(3, 6, r5);
  const LossPair<double> lp = scl_pair(t.constant(q), t.constant(k));
  CHECK(std::abs(lp.ar.item() - contrastive_oracle(q, k)) < 1e-10);
  CHECK(std::abs(lp.nar.item() - contrastive_oracle(k, q)) < 1e-10);
  CHECK_THROWS_AS(contrastive(t.constant(M(0, 6)), t.constant(M(0, 6)), false), std::invalid_argument);

  for (int i = 0; i < 100; ++i) {
    const LossPair<double> x = scl_pair(t.constant(test::random_mat(4, 5, rng)), t.constant(test::random_mat(4, 5, rng)));
    CHECK(x.ar.item() >= -1e-9);
    CHECK(x.nar.item() >= -1e-9);
  }
}

TEST_CASE("scl gradients reach both encodings; detached keys get none") {
  Rng rng(8);
  test::Leaves l;
  Parameter<double>& a = l.add(test::random_mat(3, 4, rng));
  Parameter<double>& b = l.add(test::random_mat(3, 4, rng));
  {
    Tape<double> t;
    t.backward(scl_pair(t.param(a), t.param(b)).ar);
    CHECK(a.grad.cwiseAbs().maxCoeff() > 0.0);
    CHECK(b.grad.cwiseAbs().maxCoeff() > 0.0);
  }
  a.zero_grad();
  b.zero_grad();
  Tape<double> t;
  t.backward(contrastive(t.param(a), t.param(b), true));
  CHECK(a.grad.cwiseAbs().maxCoeff() > 0.0);
  CHECK((b.grad.array() == 0.0).all());
}

TEST_CASE("sentence means skip padding") {
  Tape<double> t(false);
  M h(6, 2);
  h << 1, 2, 3, 4, 100, 100, 5, 6, 7, 8, 9, 10;
  const Index lens[] = {2, 3};
  const M m = sentence_means(t.constant(h), 3, lens).value();
  CHECK(m(0, 0) == 2.0);
  CHECK(m(0, 1) == 3.0);
  CHECK(m(1, 0) == doctest::Approx(7.0));
  CHECK(m(1, 1) == doctest::Approx(8.0));
}

TEST_CASE("hybrid nll") {
  Tape<double> t(false);
  const std::vector<int> gold{1, 3};
  const std::vector<int> rows{0, 1};
  CHECK(hybrid_nll(t.constant(M::Constant(2, 4, std::log(0.25))), gold, rows, 0.0, true).item() ==
        doctest::Approx(std::log(4.0)).epsilon(1e-15));
  M perfect = M::Constant(2, 4, std::log(1e-13));
  perfect(0, 1) = perfect(1, 3) = std::log(1 - 3e-13);
  CHECK(hybrid_nll(t.constant(perfect), gold, rows, 0.0, true).item() == doctest::Approx(0.0));
  CHECK_THROWS_AS(hybrid_nll(t.constant(perfect), gold, rows, 0.0, false), std::logic_error);
}

TEST_CASE("hybrid nll gradient reaches the AR decoder") {
  ModelConfig c;
  c.vocab_size = 8;
  c.d_model = 8;
  c.d_hidden = 8;
  c.n_heads = 2;
  c.n_enc_layers = c.n_dec_layers = 1;
  c.max_len = 6;
  c.dropout = 0;
  c.hybrid_enabled = true;
  Rng rng(4);
  Model<double> m(c, rng);
  const TokenBatch src = TokenBatch::from({{4, 5, 6}});
  const std::vector<int> gold{6, 7, kEos};
  const std::vector<int> rows{0, 1, 2};
  auto loss = [&](Tape<double>& t) {
    const Var<double> e = m.encode(t, src, {});
    const Var<double> ha = m.ar_states(t, e, src, TokenBatch::from({{kBos, 6, 7}}), {});
    const Var<double> hn = m.nar_states(t, e, src, TokenBatch::from({{kMask, 7, kEos}}), {});
    return hybrid_nll(log_softmax_rows(m.logits(t, m.hybrid_states(t, ha, hn), OutputHead::hyb)), gold, rows, 0.1, true);
  };
  m.zero_grad();
  Tape<double> t;
  t.backward(loss(t));
  Parameter<double>* w = m.find("ar_decoder.layers.0.ffn_out.weight");
  Index at;
  w->grad.cwiseAbs().reshaped().maxCoeff(&at);
  const double analytic = w->grad.data()[at];
  CHECK(std::abs(analytic) > 0.0);
  const double eps = 1e-5, saved = w->value.data()[at];
  w->value.data()[at] = saved + eps;
  Tape<double> up(false);
  const double fu = loss(up).item();
  w->value.data()[at] = saved - eps;
  Tape<double> down(false);
  const double fd = loss(down).item();
  w->value.data()[at] = saved;
  CHECK(std::abs((fu - fd) / (2 * eps) - analytic) < 1e-6 * std::max(1.0, std::abs(analytic)));
  CHECK(m.find("nar_decoder.layers.0.ffn_out.weight")->grad.cwiseAbs().maxCoeff() > 0.0);
  CHECK(m.find("hybrid.fc1.weight")->grad.cwiseAbs().maxCoeff() > 0.0);
  CHECK(m.find("encoder.embed")->grad.cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("compose examples") {
  Components<double> c;
  c.ml_ar = 1.25;
  c.ml_nar = 2.5;
  c.tml_ar = 0.3;
  c.tml_nar = 0.7;
  c.scl_ar = 1.1;
  c.scl_nar = 0.9;
  CHECK(compose(c, {0.0, 0.0, 0.0}, ObjectiveMode::dcmcl) == 3.75);

  Components<double> ones;
  ones.ml_ar = ones.ml_nar = ones.tml_ar = ones.tml_nar = ones.scl_ar = ones.scl_nar = 1.0;
  CHECK(compose(ones, {1.0, 1.0, 0.1}, ObjectiveMode::dcmcl) == 6.0);

  Rng rng(9);
  Components<double> r;
  r.ml_ar = rng.uniform();
  r.ml_nar = rng.uniform();
  r.ml_hyb = rng.uniform();
  r.tml_ar = rng.uniform();
  r.tml_nar = rng.uniform();
  r.scl_ar = rng.uniform();
  r.scl_nar = rng.uniform();
  const double hand = (*r.ml_ar + *r.ml_nar) + 0.5 * (*r.tml_ar + *r.tml_nar) + 1.0 * (*r.scl_ar + *r.scl_nar);
  CHECK(std::abs(compose(r, {0.5, 1.0, 0.1}, ObjectiveMode::dcmcl) - hand) < 1e-12);
  CHECK(std::abs(compose(r, {0.5, 1.0, 0.1}, ObjectiveMode::dcmcl_hyb) - (hand + *r.ml_hyb)) < 1e-12);
  CHECK(compose(r, {0.5, 1.0, 0.1}, ObjectiveMode::ar_only) == *r.ml_ar);
  CHECK(compose(r, {0.5, 1.0, 0.1}, ObjectiveMode::nar_only) == *r.ml_nar);

  r.length = 2.0;
  CHECK(std::abs(compose(r, {0.5, 1.0, 0.1}, ObjectiveMode::dcmcl) - (hand + 0.2)) < 1e-12);

  Components<double> missing = ones;
  missing.scl_nar.reset();
  CHECK_THROWS_WITH(compose(missing, {1.0, 1.0, 0.1}, ObjectiveMode::dcmcl), doctest::Contains("scl_nar"));
  CHECK_NOTHROW(compose(missing, {1.0, 0.0, 0.1}, ObjectiveMode::dcmcl));
  CHECK_THROWS_WITH(compose(ones, {1.0, 1.0, 0.1}, ObjectiveMode::dcmcl_hyb), doctest::Contains("ml_hyb"));
}

TEST_CASE("compose is linear in each component") {
  Rng rng(10);
  for (int trial = 0; trial < 50; ++trial) {
    Components<double> c;
    c.ml_ar = rng.uniform();
    c.ml_nar = rng.uniform();
    c.tml_ar = rng.uniform();
    c.tml_nar = rng.uniform();
    c.scl_ar = rng.uniform();
    c.scl_nar = rng.uniform();
    const LossWeights w{rng.uniform(), rng.uniform(), 0.1};
    const double base = compose(c, w, ObjectiveMode::dcmcl);
    const double slope[] = {1, 1, w.tml, w.tml, w.scl, w.scl};
    std::optional<double> Components<double>::*slots[] = {&Components<double>::ml_ar,  &Components<double>::ml_nar,
                                                          &Components<double>::tml_ar, &Components<double>::tml_nar,
                                                          &Components<double>::scl_ar, &Components<double>::scl_nar};
    for (int k = 0; k < 6; ++k) {
      Components<double> d = c;
      *(d.*slots[k]) += 2.0;
      CHECK(std::abs(compose(d, w, ObjectiveMode::dcmcl) - base - 2.0 * slope[k]) < 1e-12);
    }
  }
}

TEST_CASE("tape composition of losses agrees with the scalar composition") {
  Tape<double> t(false);
  Components<Var<double>> v;
  Components<double> d;
  double x = 0.5;
  for (auto slot : {&Components<Var<double>>::ml_ar, &Components<Var<double>>::ml_nar, &Components<Var<double>>::tml_ar,
                    &Components<Var<double>>::tml_nar, &Components<Var<double>>::scl_ar, &Components<Var<double>>::scl_nar})
    v.*slot = t.scalar(x += 0.25);
  d.ml_ar = v.ml_ar->item();
  d.ml_nar = v.ml_nar->item();
  d.tml_ar = v.tml_ar->item();
  d.tml_nar = v.tml_nar->item();
  d.scl_ar = v.scl_ar->item();
  d.scl_nar = v.scl_nar->item();
  CHECK(std::abs(compose(v, {0.5, 2.0, 0.1}, ObjectiveMode::dcmcl).item() - compose(d, {0.5, 2.0, 0.1}, ObjectiveMode::dcmcl)) <
        1e-12);
}
