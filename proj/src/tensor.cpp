#include "dcmcl/tensor.hpp"

#include <cmath>
#include <limits>
#include <memory>

namespace dcmcl {

const char* to_string(ParamGroup g) {
  switch (g) {
    case ParamGroup::encoder: return "encoder";
    case ParamGroup::encoder_nar: return "encoder_nar";
    case ParamGroup::ar_decoder: return "ar_decoder";
    case ParamGroup::nar_decoder: return "nar_decoder";
    case ParamGroup::hybrid: return "hybrid";
    case ParamGroup::length_head: return "length_head";
  }
  return "?";
}

namespace {

template <typename S>
void require_same_shape(const Mat<S>& a, const Mat<S>& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch (" + std::to_string(a.rows()) + "x" +
                                std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                                std::to_string(b.cols()) + ")");
  }
}

}  // namespace

template <typename S>
Var<S> detach(Var<S> a) {
  return a.tape->detached(a.value());
}

template <typename S>
Var<S> matmul(Var<S> a, Var<S> b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("matmul: inner dimensions differ");
  Mat<S> out = a.value() * b.value();
  return a.tape->record(std::move(out), {a, b}, [a, b](Tape<S>& t, const Mat<S>& g) {
    if (t.requires_grad(a)) t.accumulate(a, g * t.value(b).transpose());
    if (t.requires_grad(b)) t.accumulate(b, t.value(a).transpose() * g);
  });
}

template <typename S>
Var<S> add(Var<S> a, Var<S> b) {
  require_same_shape(a.value(), b.value(), "add");
  Mat<S> out = a.value() + b.value();
  return a.tape->record(std::move(out), {a, b}, [a, b](Tape<S>& t, const Mat<S>& g) {
    t.accumulate(a, g);
    t.accumulate(b, g);
  });
}

template <typename S>
Var<S> sub(Var<S> a, Var<S> b) {
  require_same_shape(a.value(), b.value(), "sub");
  Mat<S> out = a.value() - b.value();
  return a.tape->record(std::move(out), {a, b}, [a, b](Tape<S>& t, const Mat<S>& g) {
    t.accumulate(a, g);
    t.accumulate(b, -g);
  });
}

template <typename S>
Var<S> mul(Var<S> a, Var<S> b) {
  require_same_shape(a.value(), b.value(), "mul");
  Mat<S> out = a.value().cwiseProduct(b.value());
  return a.tape->record(std::move(out), {a, b}, [a, b](Tape<S>& t, const Mat<S>& g) {
    if (t.requires_grad(a)) t.accumulate(a, g.cwiseProduct(t.value(b)));
    if (t.requires_grad(b)) t.accumulate(b, g.cwiseProduct(t.value(a)));
  });
}

template <typename S>
Var<S> scale(Var<S> a, S factor) {
  Mat<S> out = a.value() * factor;
  return a.tape->record(std::move(out), {a}, [a, factor](Tape<S>& t, const Mat<S>& g) {
    t.accumulate(a, g * factor);
  });
}

template <typename S>
Var<S> add_row(Var<S> a, Var<S> row) {
  if (row.rows() != 1 || row.cols() != a.cols()) throw std::invalid_argument("add_row: row must be 1 x cols");
  Mat<S> out = a.value().rowwise() + row.value().row(0);
  return a.tape->record(std::move(out), {a, row}, [a, row](Tape<S>& t, const Mat<S>& g) {
    t.accumulate(a, g);
    if (t.requires_grad(row)) t.accumulate(row, g.colwise().sum());
  });
}

template <typename S>
Var<S> sum(Var<S> a) {
  Mat<S> out(1, 1);
  out(0, 0) = a.value().sum();
  const Index r = a.rows(), c = a.cols();
  return a.tape->record(std::move(out), {a}, [a, r, c](Tape<S>& t, const Mat<S>& g) {
    t.accumulate(a, Mat<S>::Constant(r, c, g(0, 0)));
  });
}

template <typename S>
Var<S> mean_rows(Var<S> a) {
  const Index r = a.rows();
  if (r == 0) throw std::invalid_argument("mean_rows: no rows");
  Mat<S> out = a.value().colwise().sum() / static_cast<S>(r);
  return a.tape->record(std::move(out), {a}, [a, r](Tape<S>& t, const Mat<S>& g) {
    Mat<S> d = g.replicate(r, 1) / static_cast<S>(r);
    t.accumulate(a, d);
  });
}

template <typename S>
Var<S> mean_cols(Var<S> a) {
  const Index c = a.cols();
  if (c == 0) throw std::invalid_argument("mean_cols: no columns");
  Mat<S> out = a.value().rowwise().sum() / static_cast<S>(c);
  return a.tape->record(std::move(out), {a}, [a, c](Tape<S>& t, const Mat<S>& g) {
    Mat<S> d = g.replicate(1, c) / static_cast<S>(c);
    t.accumulate(a, d);
  });
}

template <typename S>
Var<S> concat_cols(Var<S> a, Var<S> b) {
  if (a.rows() != b.rows()) throw std::invalid_argument("concat_cols: row counts differ");
  const Index ca = a.cols(), cb = b.cols();
  Mat<S> out(a.rows(), ca + cb);
  out.leftCols(ca) = a.value();
  out.rightCols(cb) = b.value();
  return a.tape->record(std::move(out), {a, b}, [a, b, ca, cb](Tape<S>& t, const Mat<S>& g) {
    if (t.requires_grad(a)) t.accumulate(a, g.leftCols(ca));
    if (t.requires_grad(b)) t.accumulate(b, g.rightCols(cb));
  });
}

template <typename S>
Var<S> gather_rows(Var<S> a, std::span<const int> rows) {
  const Mat<S>& av = a.value();
  Mat<S> out(static_cast<Index>(rows.size()), av.cols());
  for (Index i = 0; i < out.rows(); ++i) {
    const int r = rows[static_cast<std::size_t>(i)];
    if (r < 0 || r >= av.rows()) throw std::out_of_range("gather_rows: row " + std::to_string(r) + " out of range");
    out.row(i) = av.row(r);
  }
  std::vector<int> idx(rows.begin(), rows.end());
  const Index ar = av.rows();
  return a.tape->record(std::move(out), {a}, [a, idx = std::move(idx), ar](Tape<S>& t, const Mat<S>& g) {
    Mat<S> d = Mat<S>::Zero(ar, g.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) d.row(idx[i]) += g.row(static_cast<Index>(i));
    t.accumulate(a, d);
  });
}

template <typename S>
Var<S> pick(Var<S> a, std::span<const int> cols) {
  const Mat<S>& av = a.value();
  if (static_cast<Index>(cols.size()) != av.rows()) throw std::invalid_argument("pick: one column per row required");
  Mat<S> out(av.rows(), 1);
  for (Index i = 0; i < av.rows(); ++i) {
    const int c = cols[static_cast<std::size_t>(i)];
    if (c < 0 || c >= av.cols()) throw std::out_of_range("pick: column " + std::to_string(c) + " out of range");
    out(i, 0) = av(i, c);
  }
  std::vector<int> idx(cols.begin(), cols.end());
  const Index r = av.rows(), c = av.cols();
  return a.tape->record(std::move(out), {a}, [a, idx = std::move(idx), r, c](Tape<S>& t, const Mat<S>& g) {
    Mat<S> d = Mat<S>::Zero(r, c);
    for (Index i = 0; i < r; ++i) d(i, idx[static_cast<std::size_t>(i)]) = g(i, 0);
    t.accumulate(a, d);
  });
}

template <typename S>
Var<S> gelu(Var<S> a) {
  // tanh approximation
  const S kC = static_cast<S>(0.7978845608028654);
  const S kA = static_cast<S>(0.044715);
  const auto x = a.value().array();
  Mat<S> th = (kC * (x + kA * x.cube())).tanh().matrix();
  Mat<S> out = (S(0.5) * x * (S(1) + th.array())).matrix();
  return a.tape->record(std::move(out), {a}, [a, kC, kA, th = std::move(th)](Tape<S>& t, const Mat<S>& g) {
    const auto x = t.value(a).array();
    const auto tt = th.array();
    Mat<S> d = (g.array() * (S(0.5) * (S(1) + tt) +
                             S(0.5) * x * (S(1) - tt.square()) * kC * (S(1) + S(3) * kA * x.square())))
                   .matrix();
    t.accumulate(a, d);
  });
}

template <typename S>
Var<S> dropout(Var<S> a, double p, Rng& rng, bool train) {
  if (p < 0.0 || p >= 1.0) throw std::invalid_argument("dropout: p must be in [0, 1)");
  if (!train || p == 0.0) return a;
  const Mat<S>& av = a.value();
  Mat<S> mask(av.rows(), av.cols());
  const S keep_scale = static_cast<S>(1.0 / (1.0 - p));
  for (Index i = 0; i < mask.size(); ++i) mask.data()[i] = rng.uniform() < p ? S(0) : keep_scale;
  Mat<S> out = av.cwiseProduct(mask);
  return a.tape->record(std::move(out), {a}, [a, mask = std::move(mask)](Tape<S>& t, const Mat<S>& g) {
    t.accumulate(a, g.cwiseProduct(mask));
  });
}

template <typename S>
Var<S> log_floor(Var<S> a, double floor) {
  const S f = static_cast<S>(floor);
  Mat<S> clamped = a.value().cwiseMax(f);
  Mat<S> out = clamped.array().log().matrix();
  return a.tape->record(std::move(out), {a}, [a, f, clamped = std::move(clamped)](Tape<S>& t, const Mat<S>& g) {
    const auto& av = t.value(a);
    Mat<S> d = (av.array() > f).select(g.array() / clamped.array(), S(0)).matrix();
    t.accumulate(a, d);
  });
}

template <typename S>
Var<S> softmax_rows(Var<S> logits) {
  const Mat<S>& x = logits.value();
  if (x.cols() == 0) throw std::invalid_argument("empty distribution");
  Mat<S> out = (x.colwise() - x.rowwise().maxCoeff()).array().exp().matrix();
  out.array().colwise() /= out.rowwise().sum().array();
  Mat<S> saved = logits.requires_grad() ? out : Mat<S>();
  return logits.tape->record(std::move(out), {logits}, [logits, yv = std::move(saved)](Tape<S>& t, const Mat<S>& g) {
    Mat<S> gy = g.cwiseProduct(yv);
    Mat<S> d = gy - (yv.array().colwise() * gy.rowwise().sum().array()).matrix();
    t.accumulate(logits, d);
  });
}

template <typename S>
Var<S> log_softmax_rows(Var<S> logits) {
  const Mat<S>& x = logits.value();
  if (x.cols() == 0) throw std::invalid_argument("empty distribution");
  Mat<S> shifted = x.colwise() - x.rowwise().maxCoeff();
  Mat<S> lse = shifted.array().exp().rowwise().sum().log().matrix();
  Mat<S> out = shifted.colwise() - lse.col(0);
  Mat<S> probs = out.array().exp().matrix();
  return logits.tape->record(std::move(out), {logits}, [logits, probs = std::move(probs)](Tape<S>& t, const Mat<S>& g) {
    Mat<S> d = g - (probs.array().colwise() * g.rowwise().sum().array()).matrix();
    t.accumulate(logits, d);
  });
}

template <typename S>
Var<S> layer_norm(Var<S> x, Var<S> gain, Var<S> bias) {
  const Mat<S>& xv = x.value();
  const Index d = xv.cols();
  if (d < 1) throw std::invalid_argument("layer_norm: empty feature axis");
  if (gain.rows() != 1 || gain.cols() != d || bias.rows() != 1 || bias.cols() != d) {
    throw std::invalid_argument("layer_norm: gain/bias must be 1 x d");
  }
  Mat<S> mean = xv.rowwise().sum() / static_cast<S>(d);
  Mat<S> centered = xv.colwise() - mean.col(0);
  Mat<S> inv_std =
      ((centered.array().square().rowwise().sum() / static_cast<S>(d)) + static_cast<S>(kLayerNormEps)).rsqrt().matrix();
  Mat<S> xhat = (centered.array().colwise() * inv_std.col(0).array()).matrix();
  Mat<S> out = (xhat.array().rowwise() * gain.value().row(0).array()).matrix();
  out.rowwise() += bias.value().row(0);
  return x.tape->record(std::move(out), {x, gain, bias},
                        [x, gain, bias, d, xhat = std::move(xhat), inv_std = std::move(inv_std)](Tape<S>& t, const Mat<S>& g) {
                          if (t.requires_grad(gain)) t.accumulate(gain, g.cwiseProduct(xhat).colwise().sum());
                          if (t.requires_grad(bias)) t.accumulate(bias, g.colwise().sum());
                          if (!t.requires_grad(x)) return;
                          Mat<S> dxhat = (g.array().rowwise() * t.value(gain).row(0).array()).matrix();
                          Mat<S> m1 = dxhat.rowwise().sum() / static_cast<S>(d);
                          Mat<S> m2 = dxhat.cwiseProduct(xhat).rowwise().sum() / static_cast<S>(d);
                          Mat<S> dx = dxhat;
                          dx.colwise() -= m1.col(0);
                          dx -= (xhat.array().colwise() * m2.col(0).array()).matrix();
                          dx.array().colwise() *= inv_std.col(0).array();
                          t.accumulate(x, dx);
                        });
}

template <typename S>
Var<S> kl_rows(Var<S> p, Var<S> q, bool detach_p) {
  const Mat<S>& pv = p.value();
  const Mat<S>& qv = q.value();
  require_same_shape(pv, qv, "kl_rows");
  const S floor = static_cast<S>(kKlFloor);
  Mat<S> q_safe = qv;
  std::size_t clamped = 0;
  Mat<S> out = Mat<S>::Zero(pv.rows(), 1);
  for (Index i = 0; i < pv.rows(); ++i) {
    S acc = 0;
    for (Index j = 0; j < pv.cols(); ++j) {
      const S pj = pv(i, j);
      if (pj <= S(0)) continue;
      if (q_safe(i, j) < floor) {
        q_safe(i, j) = floor;
        ++clamped;
      }
      acc += pj * std::log(pj / q_safe(i, j));
    }
    out(i, 0) = acc;
  }
  p.tape->counters().kl_clamp += clamped;
  return p.tape->record(std::move(out), {p, q},
                        [p, q, detach_p, floor, q_safe = std::move(q_safe)](Tape<S>& t, const Mat<S>& g) {
                          const Mat<S>& pv = t.value(p);
                          const Mat<S>& qv = t.value(q);
                          if (t.requires_grad(q)) {
                            Mat<S> dq = Mat<S>::Zero(qv.rows(), qv.cols());
                            for (Index i = 0; i < qv.rows(); ++i) {
                              for (Index j = 0; j < qv.cols(); ++j) {
                                if (pv(i, j) > S(0) && qv(i, j) >= floor) dq(i, j) = -g(i, 0) * pv(i, j) / qv(i, j);
                              }
                            }
                            t.accumulate(q, dq);
                          }
                          if (!detach_p && t.requires_grad(p)) {
                            Mat<S> dp = Mat<S>::Zero(pv.rows(), pv.cols());
                            for (Index i = 0; i < pv.rows(); ++i) {
                              for (Index j = 0; j < pv.cols(); ++j) {
                                if (pv(i, j) > S(0)) dp(i, j) = g(i, 0) * (std::log(pv(i, j) / q_safe(i, j)) + S(1));
                              }
                            }
                            t.accumulate(p, dp);
                          }
                        });
}

template <typename S>
Var<S> cosine_sim(Var<S> u, Var<S> v) {
  if (u.value().size() != v.value().size() || u.value().size() == 0) {
    throw std::invalid_argument("cosine_sim: vectors must have equal nonzero length");
  }
  const auto uv = u.value().reshaped();
  const auto vv = v.value().reshaped();
  const S nu = uv.norm(), nv = vv.norm();
  const S dot = uv.dot(vv);
  const S den = nu * nv + static_cast<S>(kCosineFloor);
  if (nu == S(0) || nv == S(0)) ++u.tape->counters().degenerate_cosine;
  Mat<S> out(1, 1);
  out(0, 0) = dot / den;
  return u.tape->record(std::move(out), {u, v}, [u, v, nu, nv, dot, den](Tape<S>& t, const Mat<S>& g) {
    const S gs = g(0, 0);
    const Mat<S>& uv = t.value(u);
    const Mat<S>& vv = t.value(v);
    if (t.requires_grad(u)) {
      Mat<S> du = vv / den;
      if (nu > S(0)) du -= uv * (dot * nv / (nu * den * den));
      t.accumulate(u, du * gs);
    }
    if (t.requires_grad(v)) {
      Mat<S> dv = uv / den;
      if (nv > S(0)) dv -= vv * (dot * nu / (nv * den * den));
      t.accumulate(v, dv * gs);
    }
  });
}

template <typename S>
Var<S> pairwise_cosine(Var<S> a, Var<S> c) {
  const Mat<S>& av = a.value();
  const Mat<S>& cv = c.value();
  if (av.cols() != cv.cols()) throw std::invalid_argument("pairwise_cosine: feature sizes differ");
  Mat<S> na = av.rowwise().norm();
  Mat<S> nc = cv.rowwise().norm();
  std::size_t degenerate = 0;
  for (Index i = 0; i < na.rows(); ++i) degenerate += na(i, 0) == S(0);
  for (Index j = 0; j < nc.rows(); ++j) degenerate += nc(j, 0) == S(0);
  a.tape->counters().degenerate_cosine += degenerate;
  Mat<S> den = (na * nc.transpose()).array() + static_cast<S>(kCosineFloor);
  Mat<S> out = (av * cv.transpose()).cwiseQuotient(den);
  return a.tape->record(
      out, {a, c},
      [a, c, na = std::move(na), nc = std::move(nc), den = std::move(den), sims = out](Tape<S>& t, const Mat<S>& g) {
        const Mat<S>& av = t.value(a);
        const Mat<S>& cv = t.value(c);
        Mat<S> w = g.cwiseQuotient(den);
        Mat<S> ws = w.cwiseProduct(sims);
        if (t.requires_grad(a)) {
          Mat<S> da = w * cv;
          Mat<S> coef = ws * nc;  // R x 1
          for (Index i = 0; i < av.rows(); ++i) {
            if (na(i, 0) > S(0)) da.row(i) -= av.row(i) * (coef(i, 0) / na(i, 0));
          }
          t.accumulate(a, da);
        }
        if (t.requires_grad(c)) {
          Mat<S> dc = w.transpose() * av;
          Mat<S> coef = ws.transpose() * na;  // K x 1
          for (Index j = 0; j < cv.rows(); ++j) {
            if (nc(j, 0) > S(0)) dc.row(j) -= cv.row(j) * (coef(j, 0) / nc(j, 0));
          }
          t.accumulate(c, dc);
        }
      });
}

template <typename S>
Var<S> attention(Var<S> q, Var<S> k, Var<S> v, int n_heads, const AttentionMask& mask) {
  const Mat<S>& qv = q.value();
  const Mat<S>& kv = k.value();
  const Mat<S>& vv = v.value();
  const Index d = qv.cols();
  const Index B = mask.batch, Lq = mask.q_len, Lk = mask.k_len;
  if (n_heads < 1 || d % n_heads != 0) throw std::invalid_argument("attention: d not divisible by heads");
  if (qv.rows() != B * Lq || kv.rows() != B * Lk || vv.rows() != B * Lk || kv.cols() != d || vv.cols() != d) {
    throw std::invalid_argument("attention: packed shapes do not match the mask layout");
  }
  if (static_cast<Index>(mask.key_lengths.size()) != B) throw std::invalid_argument("attention: key_lengths size");
  const Index dk = d / n_heads;
  const S inv_sqrt = static_cast<S>(1.0 / std::sqrt(static_cast<double>(dk)));

  // Visibility per batch item; shared across heads.
  std::vector<BoolMat> vis(static_cast<std::size_t>(B));
  for (Index b = 0; b < B; ++b) {
    BoolMat m(Lq, Lk);
    for (Index i = 0; i < Lq; ++i)
      for (Index j = 0; j < Lk; ++j) m(i, j) = mask.allows(b, i, j);
    vis[static_cast<std::size_t>(b)] = std::move(m);
  }

  auto probs = std::make_shared<std::vector<Mat<S>>>(static_cast<std::size_t>(B * n_heads));
  Mat<S> out = Mat<S>::Zero(B * Lq, d);
  const S neg_inf = -std::numeric_limits<S>::infinity();
  for (Index b = 0; b < B; ++b) {
    const BoolMat& m = vis[static_cast<std::size_t>(b)];
    for (Index h = 0; h < n_heads; ++h) {
      auto qh = qv.block(b * Lq, h * dk, Lq, dk);
      auto kh = kv.block(b * Lk, h * dk, Lk, dk);
      auto vh = vv.block(b * Lk, h * dk, Lk, dk);
      Mat<S> s = (qh * kh.transpose()) * inv_sqrt;
      s = m.select(s, neg_inf);
      for (Index i = 0; i < Lq; ++i) {
        const S mx = s.row(i).maxCoeff();
        if (mx == neg_inf) {
          s.row(i).setZero();  // nothing visible: zero output
          continue;
        }
        s.row(i) = (s.row(i).array() - mx).exp().matrix();
        s.row(i) /= s.row(i).sum();
      }
      out.block(b * Lq, h * dk, Lq, dk).noalias() = s * vh;
      (*probs)[static_cast<std::size_t>(b * n_heads + h)] = std::move(s);
    }
  }
  return q.tape->record(
      std::move(out), {q, k, v}, [q, k, v, n_heads, B, Lq, Lk, dk, inv_sqrt, probs](Tape<S>& t, const Mat<S>& g) {
        const Mat<S>& qv = t.value(q);
        const Mat<S>& kv = t.value(k);
        const Mat<S>& vv = t.value(v);
        const bool gq = t.requires_grad(q), gk = t.requires_grad(k), gv = t.requires_grad(v);
        Mat<S> dq = gq ? Mat<S>::Zero(qv.rows(), qv.cols()) : Mat<S>();
        Mat<S> dk_all = gk ? Mat<S>::Zero(kv.rows(), kv.cols()) : Mat<S>();
        Mat<S> dv = gv ? Mat<S>::Zero(vv.rows(), vv.cols()) : Mat<S>();
        for (Index b = 0; b < B; ++b) {
          for (Index h = 0; h < n_heads; ++h) {
            const Mat<S>& p = (*probs)[static_cast<std::size_t>(b * n_heads + h)];
            auto go = g.block(b * Lq, h * dk, Lq, dk);
            auto vh = vv.block(b * Lk, h * dk, Lk, dk);
            if (gv) dv.block(b * Lk, h * dk, Lk, dk).noalias() += p.transpose() * go;
            if (!gq && !gk) continue;
            Mat<S> dp = go * vh.transpose();
            Mat<S> ds = p.cwiseProduct(dp);
            ds -= (p.array().colwise() * ds.rowwise().sum().array()).matrix();
            ds *= inv_sqrt;
            if (gq) dq.block(b * Lq, h * dk, Lq, dk).noalias() += ds * kv.block(b * Lk, h * dk, Lk, dk);
            if (gk) dk_all.block(b * Lk, h * dk, Lk, dk).noalias() += ds.transpose() * qv.block(b * Lq, h * dk, Lq, dk);
          }
        }
        if (gq) t.accumulate(q, dq);
        if (gk) t.accumulate(k, dk_all);
        if (gv) t.accumulate(v, dv);
      });
}

#define DCMCL_INSTANTIATE_OPS(S)                                                          \
  template Var<S> detach(Var<S>);                                                         \
  template Var<S> matmul(Var<S>, Var<S>);                                                 \
  template Var<S> add(Var<S>, Var<S>);                                                    \
  template Var<S> sub(Var<S>, Var<S>);                                                    \
  template Var<S> mul(Var<S>, Var<S>);                                                    \
  template Var<S> scale(Var<S>, S);                                                       \
  template Var<S> add_row(Var<S>, Var<S>);                                                \
  template Var<S> sum(Var<S>);                                                            \
  template Var<S> mean_rows(Var<S>);                                                      \
  template Var<S> mean_cols(Var<S>);                                                      \
  template Var<S> concat_cols(Var<S>, Var<S>);                                            \
  template Var<S> gather_rows(Var<S>, std::span<const int>);                              \
  template Var<S> pick(Var<S>, std::span<const int>);                                     \
  template Var<S> gelu(Var<S>);                                                           \
  template Var<S> dropout(Var<S>, double, Rng&, bool);                                    \
  template Var<S> log_floor(Var<S>, double);                                              \
  template Var<S> softmax_rows(Var<S>);                                                   \
  template Var<S> log_softmax_rows(Var<S>);                                               \
  template Var<S> layer_norm(Var<S>, Var<S>, Var<S>);                                     \
  template Var<S> kl_rows(Var<S>, Var<S>, bool);                                          \
  template Var<S> cosine_sim(Var<S>, Var<S>);                                             \
  template Var<S> pairwise_cosine(Var<S>, Var<S>);                                        \
  template Var<S> attention(Var<S>, Var<S>, Var<S>, int, const AttentionMask&);

DCMCL_INSTANTIATE_OPS(float)
DCMCL_INSTANTIATE_OPS(double)

#undef DCMCL_INSTANTIATE_OPS

}  // namespace dcmcl
