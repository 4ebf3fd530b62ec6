#pragma once

// Dense tensors on a reverse-mode tape.
//
// Every value is a row-major matrix; vectors are 1 x d and scalars 1 x 1.
// Batched sequences are packed as (batch * length) x d with per-item padding.
// Ops are free functions templated on the scalar type and explicitly
// instantiated for float (training) and double (tests, gradient checks).

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "dcmcl/rng.hpp"

namespace dcmcl {

using Index = Eigen::Index;

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using BoolMat = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Shape {
  Index rows = 0;
  Index cols = 0;
  friend bool operator==(const Shape&, const Shape&) = default;
};

template <typename Scalar>
Shape shape_of(const Mat<Scalar>& m) {
  return {m.rows(), m.cols()};
}

// Which block of the model a parameter belongs to. The partition is used by
// the zero-gradient invariants and by checkpoint validation.
enum class ParamGroup { encoder, encoder_nar, ar_decoder, nar_decoder, hybrid, length_head };

const char* to_string(ParamGroup g);

template <typename Scalar>
struct Parameter {
  std::string name;
  ParamGroup group = ParamGroup::encoder;
  Mat<Scalar> value;
  Mat<Scalar> grad;

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

// Soft-failure counters for guarded numerics (clamped KL, zero-norm cosine).
struct Counters {
  std::size_t kl_clamp = 0;
  std::size_t degenerate_cosine = 0;
};

template <typename Scalar>
class Tape;

template <typename Scalar>
struct Var {
  Tape<Scalar>* tape = nullptr;
  int id = -1;

  const Mat<Scalar>& value() const { return tape->value(*this); }
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  Scalar item() const {
    if (rows() != 1 || cols() != 1) throw std::invalid_argument("item() on non-scalar tensor");
    return value()(0, 0);
  }
  bool requires_grad() const { return tape->requires_grad(*this); }
};

template <typename Scalar>
class Tape {
 public:
  using Backward = std::function<void(Tape&, const Mat<Scalar>&)>;

  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<Scalar> leaf(Mat<Scalar> value, bool requires_grad = false) {
    nodes_.push_back(Node{std::move(value), {}, requires_grad && grad_enabled_, nullptr, {}});
    return {this, static_cast<int>(nodes_.size()) - 1};
  }

  Var<Scalar> constant(Mat<Scalar> value) { return leaf(std::move(value), false); }

  Var<Scalar> scalar(Scalar s) {
    Mat<Scalar> m(1, 1);
    m(0, 0) = s;
    return constant(std::move(m));
  }

  // Registers a parameter as a leaf. Repeated calls return the same node, and
  // backward() adds the leaf gradient into Parameter::grad.
  Var<Scalar> param(Parameter<Scalar>& p) {
    if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) return {this, it->second};
    nodes_.push_back(Node{p.value, {}, grad_enabled_, &p, {}});
    const int id = static_cast<int>(nodes_.size()) - 1;
    param_nodes_.emplace(&p, id);
    return {this, id};
  }

  // Appends an op output. The backward closure is kept only if some input
  // needs a gradient.
  Var<Scalar> record(Mat<Scalar> value, std::initializer_list<Var<Scalar>> inputs, Backward fn) {
    bool needs = false;
    if (grad_enabled_) {
      for (const auto& in : inputs) needs = needs || nodes_.at(in.id).requires_grad;
    }
    nodes_.push_back(Node{std::move(value), {}, needs, nullptr, needs ? std::move(fn) : Backward{}});
    return {this, static_cast<int>(nodes_.size()) - 1};
  }

  // Stop-gradient values. With a record list, every detach() appends its
  // value; with a replay list, the k-th detach() returns the k-th entry.
  void record_detached(std::vector<Mat<Scalar>>* out) { detach_record_ = out; }
  void replay_detached(const std::vector<Mat<Scalar>>* in) {
    detach_replay_ = in;
    detach_next_ = 0;
  }
  Var<Scalar> detached(const Mat<Scalar>& value) {
    if (detach_replay_) {
      if (detach_next_ >= detach_replay_->size()) throw std::logic_error("detach replay exhausted");
      const Mat<Scalar>& v = (*detach_replay_)[detach_next_++];
      if (v.rows() != value.rows() || v.cols() != value.cols()) throw std::logic_error("detach replay shape mismatch");
      return constant(v);
    }
    if (detach_record_) detach_record_->push_back(value);
    return constant(value);
  }

  const Mat<Scalar>& value(Var<Scalar> v) const { return nodes_[v.id].value; }
  bool requires_grad(Var<Scalar> v) const { return nodes_[v.id].requires_grad; }

  // Empty matrix when no gradient reached the node.
  const Mat<Scalar>& grad(Var<Scalar> v) const { return nodes_[v.id].grad; }

  template <typename Expr>
  void accumulate(Var<Scalar> v, const Expr& g) {
    Node& n = nodes_[v.id];
    if (!n.requires_grad) return;
    if (n.grad.size() == 0) {
      n.grad = g;
    } else {
      n.grad += g;
    }
  }

  // Accumulates d(loss)/d(node) into every reachable node, then flushes leaf
  // gradients into their Parameters. A tape supports one backward pass.
  void backward(Var<Scalar> loss) {
    if (backward_done_) throw std::logic_error("backward already ran on this tape; re-record the graph");
    if (!grad_enabled_) throw std::logic_error("backward on a tape recorded without gradients");
    const Mat<Scalar>& lv = nodes_.at(loss.id).value;
    if (lv.rows() != 1 || lv.cols() != 1) throw std::invalid_argument("backward needs a scalar loss");
    backward_done_ = true;
    visits_ = 0;
    if (!nodes_[loss.id].requires_grad) return;
    nodes_[loss.id].grad = Mat<Scalar>::Ones(1, 1);
    for (int i = loss.id; i >= 0; --i) {
      Node& n = nodes_[i];
      if (!n.requires_grad || n.grad.size() == 0) continue;
      ++visits_;
      if (n.backward) {
        n.backward(*this, n.grad);
        // Intermediate gradients are dead once propagated.
        if (!n.param) n.grad.resize(0, 0);
      }
    }
    for (auto& [param, id] : param_nodes_) {
      const Mat<Scalar>& g = nodes_[id].grad;
      if (g.size() == 0) continue;
      if (param->grad.size() == 0) {
        param->grad = g;
      } else {
        param->grad += g;
      }
    }
  }

  bool grad_enabled() const { return grad_enabled_; }
  bool backward_done() const { return backward_done_; }
  std::size_t size() const { return nodes_.size(); }
  std::size_t last_backward_visits() const { return visits_; }
  Counters& counters() { return counters_; }
  const Counters& counters() const { return counters_; }

 private:
  struct Node {
    Mat<Scalar> value;
    Mat<Scalar> grad;
    bool requires_grad = false;
    Parameter<Scalar>* param = nullptr;
    Backward backward;
  };

  std::vector<Node> nodes_;
  std::unordered_map<Parameter<Scalar>*, int> param_nodes_;
  bool grad_enabled_;
  std::vector<Mat<Scalar>>* detach_record_ = nullptr;
  const std::vector<Mat<Scalar>>* detach_replay_ = nullptr;
  std::size_t detach_next_ = 0;
  bool backward_done_ = false;
  std::size_t visits_ = 0;
  Counters counters_;
};

// Attention visibility for packed batches: queries are (batch * q_len) rows,
// keys (batch * k_len) rows. Keys at or beyond key_lengths[b] are padding.
struct AttentionMask {
  Index batch = 1;
  Index q_len = 0;
  Index k_len = 0;
  std::vector<Index> key_lengths;
  bool causal = false;
  // Optional per-item q_len x k_len visibility, intersected with the above.
  std::vector<BoolMat> allowed;

  bool allows(Index b, Index i, Index j) const {
    if (j >= key_lengths[static_cast<std::size_t>(b)]) return false;
    if (causal && j > i) return false;
    if (!allowed.empty() && !allowed[static_cast<std::size_t>(b)](i, j)) return false;
    return true;
  }
};

inline constexpr double kKlFloor = 1e-12;
inline constexpr double kCosineFloor = 1e-12;
inline constexpr double kLayerNormEps = 1e-5;

template <typename S> Var<S> detach(Var<S> a);
template <typename S> Var<S> matmul(Var<S> a, Var<S> b);
template <typename S> Var<S> add(Var<S> a, Var<S> b);
template <typename S> Var<S> sub(Var<S> a, Var<S> b);
template <typename S> Var<S> mul(Var<S> a, Var<S> b);
template <typename S> Var<S> scale(Var<S> a, S factor);
// a (R x C) + row (1 x C) broadcast over rows.
template <typename S> Var<S> add_row(Var<S> a, Var<S> row);
template <typename S> Var<S> sum(Var<S> a);
// Mean over axis 0 (R x C -> 1 x C).
template <typename S> Var<S> mean_rows(Var<S> a);
// Mean over axis 1 (R x C -> R x 1).
template <typename S> Var<S> mean_cols(Var<S> a);
template <typename S> Var<S> concat_cols(Var<S> a, Var<S> b);
// out.row(i) = a.row(rows[i]); also serves as the embedding lookup.
template <typename S> Var<S> gather_rows(Var<S> a, std::span<const int> rows);
// out(i) = a(i, cols[i]) as an R x 1 column.
template <typename S> Var<S> pick(Var<S> a, std::span<const int> cols);
template <typename S> Var<S> gelu(Var<S> a);
template <typename S> Var<S> dropout(Var<S> a, double p, Rng& rng, bool train);
template <typename S> Var<S> log_floor(Var<S> a, double floor = kKlFloor);
template <typename S> Var<S> softmax_rows(Var<S> logits);
template <typename S> Var<S> log_softmax_rows(Var<S> logits);
template <typename S> Var<S> layer_norm(Var<S> x, Var<S> gain, Var<S> bias);
// Per-row D_KL(p || q) as an R x 1 column.
template <typename S> Var<S> kl_rows(Var<S> p, Var<S> q, bool detach_p);
template <typename S> Var<S> cosine_sim(Var<S> u, Var<S> v);
// out(i, j) = cosine_sim(a.row(i), c.row(j)).
template <typename S> Var<S> pairwise_cosine(Var<S> a, Var<S> c);
// Scaled dot-product attention over n_heads column groups of q, k, v.
template <typename S> Var<S> attention(Var<S> q, Var<S> k, Var<S> v, int n_heads, const AttentionMask& mask);

template <typename S> Var<S> operator+(Var<S> a, Var<S> b) { return add(a, b); }
template <typename S> Var<S> operator-(Var<S> a, Var<S> b) { return sub(a, b); }

}  // namespace dcmcl
