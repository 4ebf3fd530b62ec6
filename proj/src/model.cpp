#include "dcmcl/model.hpp"

#include <cmath>
#include <stdexcept>

namespace dcmcl {

const char* to_string(PositionEncoding pe) {
  return pe == PositionEncoding::sinusoidal ? "sinusoidal" : "learnable";
}

PositionEncoding parse_position_encoding(const std::string& s) {
  if (s == "sinusoidal" || s == "spe" || s == "SPE") return PositionEncoding::sinusoidal;
  if (s == "learnable" || s == "lpe" || s == "LPE") return PositionEncoding::learnable;
  throw std::invalid_argument("unknown positional encoding '" + s + "' (expected sinusoidal|learnable)");
}

void ModelConfig::validate() const {
  auto require = [](bool ok, const std::string& msg) {
    if (!ok) throw std::invalid_argument("model config: " + msg);
  };
  require(vocab_size > kFirstWord, "vocab_size must exceed the reserved ids");
  require(d_model > 0 && d_hidden > 0 && n_heads > 0, "dimensions must be positive");
  require(d_model % n_heads == 0, "d_model must be divisible by n_heads");
  require(d_model % 2 == 0, "d_model must be even for sinusoidal positions");
  require(n_enc_layers > 0 && n_dec_layers > 0, "layer counts must be positive");
  require(max_len > 2, "max_len must leave room for specials");
  require(dropout >= 0.0 && dropout < 1.0, "dropout must be in [0, 1)");
}

TokenBatch TokenBatch::from(const std::vector<std::vector<int>>& seqs) {
  TokenBatch tb;
  tb.batch = static_cast<Index>(seqs.size());
  for (const auto& s : seqs) tb.length = std::max<Index>(tb.length, static_cast<Index>(s.size()));
  tb.ids.assign(static_cast<std::size_t>(tb.batch * tb.length), kPad);
  tb.lengths.reserve(seqs.size());
  for (Index b = 0; b < tb.batch; ++b) {
    const auto& s = seqs[static_cast<std::size_t>(b)];
    if (s.empty()) throw std::invalid_argument("TokenBatch: empty sequence at item " + std::to_string(b));
    tb.lengths.push_back(static_cast<Index>(s.size()));
    for (std::size_t i = 0; i < s.size(); ++i) tb.ids[static_cast<std::size_t>(b * tb.length) + i] = s[i];
  }
  return tb;
}

template <typename S>
Mat<S> sinusoidal_pe(int n_positions, int d_model) {
  if (d_model <= 0 || d_model % 2 != 0) throw std::invalid_argument("sinusoidal_pe: d_model must be even");
  if (n_positions < 0) throw std::invalid_argument("sinusoidal_pe: negative position count");
  Mat<S> pe(n_positions, d_model);
  for (int pos = 0; pos < n_positions; ++pos) {
    for (int i = 0; i < d_model / 2; ++i) {
      const double angle = pos / std::pow(10000.0, (2.0 * i) / d_model);
      pe(pos, 2 * i) = static_cast<S>(std::sin(angle));
      pe(pos, 2 * i + 1) = static_cast<S>(std::cos(angle));
    }
  }
  return pe;
}

template <typename S>
Model<S>::Model(const ModelConfig& config, Rng& rng) : config_(config) {
  config_.validate();
  sinusoid_ = sinusoidal_pe<S>(config_.max_len, config_.d_model);
  encoder_ = make_encoder("encoder", ParamGroup::encoder, rng);
  if (!config_.share_encoder) encoder_nar_ = make_encoder("encoder_nar", ParamGroup::encoder_nar, rng);
  ar_decoder_ = make_decoder("ar_decoder", ParamGroup::ar_decoder, config_.ar_pe, rng);
  nar_decoder_ = make_decoder("nar_decoder", ParamGroup::nar_decoder, config_.nar_pe, rng);
  if (config_.hybrid_enabled) {
    hyb_fc1_ = make_linear("hybrid.fc1", ParamGroup::hybrid, 2 * config_.d_model, config_.d_model, rng);
    hyb_fc2_ = make_linear("hybrid.fc2", ParamGroup::hybrid, config_.d_model, config_.d_model, rng);
    hyb_out_ = make_linear("hybrid.out", ParamGroup::hybrid, config_.d_model, config_.vocab_size, rng);
  }
  length_head_ = make_linear("length_head", ParamGroup::length_head, config_.d_model, config_.max_len, rng);
}

template <typename S>
Parameter<S>* Model<S>::make(const std::string& name, ParamGroup group, Index rows, Index cols, Rng& rng,
                             double init) {
  auto p = std::make_unique<Parameter<S>>();
  p->name = name;
  p->group = group;
  p->value.resize(rows, cols);
  if (std::isnan(init)) {
    for (Index i = 0; i < p->value.size(); ++i) p->value.data()[i] = static_cast<S>(rng.truncated_normal(0.02));
  } else {
    p->value.setConstant(static_cast<S>(init));
  }
  p->zero_grad();
  params_.push_back(std::move(p));
  return params_.back().get();
}

template <typename S>
Linear<S> Model<S>::make_linear(const std::string& name, ParamGroup group, Index in, Index out, Rng& rng) {
  Linear<S> l;
  l.weight = make(name + ".weight", group, in, out, rng, std::nan(""));
  l.bias = make(name + ".bias", group, 1, out, rng, 0.0);
  return l;
}

template <typename S>
LayerNormParams<S> Model<S>::make_ln(const std::string& name, ParamGroup group, Index d) {
  Rng unused;
  LayerNormParams<S> ln;
  ln.gain = make(name + ".gain", group, 1, d, unused, 1.0);
  ln.bias = make(name + ".bias", group, 1, d, unused, 0.0);
  return ln;
}

template <typename S>
AttentionParams<S> Model<S>::make_attention(const std::string& name, ParamGroup group, Rng& rng) {
  const Index d = config_.d_model;
  return {make_linear(name + ".q", group, d, d, rng), make_linear(name + ".k", group, d, d, rng),
          make_linear(name + ".v", group, d, d, rng), make_linear(name + ".o", group, d, d, rng)};
}

template <typename S>
EncoderParams<S> Model<S>::make_encoder(const std::string& prefix, ParamGroup group, Rng& rng) {
  EncoderParams<S> enc;
  enc.embed = make(prefix + ".embed", group, config_.vocab_size, config_.d_model, rng, std::nan(""));
  if (config_.enc_pe == PositionEncoding::learnable) {
    enc.pos = make(prefix + ".pos", group, config_.max_len, config_.d_model, rng, std::nan(""));
  }
  for (int l = 0; l < config_.n_enc_layers; ++l) {
    const std::string n = prefix + ".layers." + std::to_string(l);
    EncoderLayer<S> layer;
    layer.self_attn = make_attention(n + ".self_attn", group, rng);
    layer.ln_attn = make_ln(n + ".ln_attn", group, config_.d_model);
    layer.ffn_in = make_linear(n + ".ffn_in", group, config_.d_model, config_.d_hidden, rng);
    layer.ffn_out = make_linear(n + ".ffn_out", group, config_.d_hidden, config_.d_model, rng);
    layer.ln_ffn = make_ln(n + ".ln_ffn", group, config_.d_model);
    enc.layers.push_back(layer);
  }
  return enc;
}

template <typename S>
DecoderParams<S> Model<S>::make_decoder(const std::string& prefix, ParamGroup group, PositionEncoding pe, Rng& rng) {
  DecoderParams<S> dec;
  dec.embed = make(prefix + ".embed", group, config_.vocab_size, config_.d_model, rng, std::nan(""));
  if (pe == PositionEncoding::learnable) {
    dec.pos = make(prefix + ".pos", group, config_.max_len, config_.d_model, rng, std::nan(""));
  }
  for (int l = 0; l < config_.n_dec_layers; ++l) {
    const std::string n = prefix + ".layers." + std::to_string(l);
    DecoderLayer<S> layer;
    layer.self_attn = make_attention(n + ".self_attn", group, rng);
    layer.ln_self = make_ln(n + ".ln_self", group, config_.d_model);
    layer.cross_attn = make_attention(n + ".cross_attn", group, rng);
    layer.ln_cross = make_ln(n + ".ln_cross", group, config_.d_model);
    layer.ffn_in = make_linear(n + ".ffn_in", group, config_.d_model, config_.d_hidden, rng);
    layer.ffn_out = make_linear(n + ".ffn_out", group, config_.d_hidden, config_.d_model, rng);
    layer.ln_ffn = make_ln(n + ".ln_ffn", group, config_.d_model);
    dec.layers.push_back(layer);
  }
  dec.out = make_linear(prefix + ".out", group, config_.d_model, config_.vocab_size, rng);
  return dec;
}

template <typename S>
void Model<S>::check_tokens(const TokenBatch& tokens, const char* what) const {
  if (tokens.length > config_.max_len) {
    throw std::invalid_argument(std::string(what) + ": length " + std::to_string(tokens.length) + " exceeds max_len " +
                                std::to_string(config_.max_len));
  }
  for (Index b = 0; b < tokens.batch; ++b) {
    for (Index i = 0; i < tokens.lengths[static_cast<std::size_t>(b)]; ++i) {
      const int id = tokens.at(b, i);
      if (id < 0 || id >= config_.vocab_size) {
        throw std::out_of_range(std::string(what) + ": token id " + std::to_string(id) + " at position " +
                                std::to_string(i) + " of item " + std::to_string(b) + " is out of vocabulary");
      }
    }
  }
}

template <typename S>
Var<S> Model<S>::linear(Tape<S>& tape, const Linear<S>& l, Var<S> x) const {
  return add_row(matmul(x, param_leaf(tape, l.weight)), param_leaf(tape, l.bias));
}

template <typename S>
Var<S> Model<S>::norm(Tape<S>& tape, const LayerNormParams<S>& ln, Var<S> x) const {
  return layer_norm(x, param_leaf(tape, ln.gain), param_leaf(tape, ln.bias));
}

template <typename S>
Var<S> Model<S>::drop(Var<S> x, const ForwardMode& mode) const {
  if (!mode.train || config_.dropout == 0.0) return x;
  if (!mode.rng) throw std::logic_error("training forward requires an Rng");
  return dropout(x, config_.dropout, *mode.rng, true);
}

template <typename S>
Var<S> Model<S>::ffn(Tape<S>& tape, const Linear<S>& in, const Linear<S>& out, Var<S> x,
                     const ForwardMode& mode) const {
  return linear(tape, out, drop(gelu(linear(tape, in, x)), mode));
}

template <typename S>
Var<S> Model<S>::mha(Tape<S>& tape, const AttentionParams<S>& p, Var<S> x, Var<S> kv,
                     const AttentionMask& mask) const {
  Var<S> q = linear(tape, p.q, x);
  Var<S> k = linear(tape, p.k, kv);
  Var<S> v = linear(tape, p.v, kv);
  return linear(tape, p.o, attention(q, k, v, config_.n_heads, mask));
}

template <typename S>
Var<S> Model<S>::embed(Tape<S>& tape, Parameter<S>* table, Parameter<S>* pos, PositionEncoding pe,
                       const TokenBatch& tokens, const ForwardMode& mode, bool dropout_on) const {
  const S emb_scale = static_cast<S>(std::sqrt(static_cast<double>(config_.d_model)));
  Var<S> x = scale(gather_rows(param_leaf(tape, table), std::span<const int>(tokens.ids)), emb_scale);
  if (pe == PositionEncoding::sinusoidal) {
    Mat<S> tiled(tokens.batch * tokens.length, config_.d_model);
    for (Index b = 0; b < tokens.batch; ++b) tiled.middleRows(b * tokens.length, tokens.length) = sinusoid_.topRows(tokens.length);
    x = add(x, tape.constant(std::move(tiled)));
  } else {
    std::vector<int> positions(static_cast<std::size_t>(tokens.batch * tokens.length));
    for (std::size_t r = 0; r < positions.size(); ++r) positions[r] = static_cast<int>(r % static_cast<std::size_t>(tokens.length));
    x = add(x, gather_rows(param_leaf(tape, pos), std::span<const int>(positions)));
  }
  return dropout_on ? drop(x, mode) : x;
}

template <typename S>
Var<S> Model<S>::encode(Tape<S>& tape, const TokenBatch& src, const ForwardMode& mode, EncoderSide side) const {
  check_tokens(src, "encode");
  const EncoderParams<S>& enc = (side == EncoderSide::nar && encoder_nar_) ? *encoder_nar_ : encoder_;
  Var<S> x = embed(tape, enc.embed, enc.pos, config_.enc_pe, src, mode, true);
  AttentionMask mask;
  mask.batch = src.batch;
  mask.q_len = mask.k_len = src.length;
  mask.key_lengths = src.lengths;
  for (const auto& layer : enc.layers) {
    x = norm(tape, layer.ln_attn, add(x, drop(mha(tape, layer.self_attn, x, x, mask), mode)));
    x = norm(tape, layer.ln_ffn, add(x, drop(ffn(tape, layer.ffn_in, layer.ffn_out, x, mode), mode)));
  }
  return x;
}

template <typename S>
Var<S> Model<S>::run_decoder(Tape<S>& tape, const DecoderParams<S>& dec, PositionEncoding pe, Var<S> enc,
                             const TokenBatch& src, const TokenBatch& tokens, const ForwardMode& mode, bool causal,
                             const std::vector<BoolMat>* contexts) const {
  if (tokens.batch != src.batch) throw std::invalid_argument("decoder: source and target batch sizes differ");
  if (enc.rows() != src.batch * src.length) throw std::invalid_argument("decoder: encoder output does not match source");
  Var<S> x = embed(tape, dec.embed, dec.pos, pe, tokens, mode, true);
  std::optional<Var<S>> kv_input;
  if (contexts) {
    if (static_cast<Index>(contexts->size()) != tokens.batch) throw std::invalid_argument("decoder: one context mask per item");
    kv_input = x;
    TokenBatch queries = tokens;
    for (Index b = 0; b < queries.batch; ++b)
      for (Index i = 0; i < queries.lengths[static_cast<std::size_t>(b)]; ++i) queries.ids[static_cast<std::size_t>(queries.row(b, i))] = kMask;
    x = embed(tape, dec.embed, dec.pos, pe, queries, mode, true);
  }
  AttentionMask self_mask;
  self_mask.batch = tokens.batch;
  self_mask.q_len = self_mask.k_len = tokens.length;
  self_mask.key_lengths = tokens.lengths;
  self_mask.causal = causal;
  if (contexts) self_mask.allowed = *contexts;
  AttentionMask cross_mask;
  cross_mask.batch = tokens.batch;
  cross_mask.q_len = tokens.length;
  cross_mask.k_len = src.length;
  cross_mask.key_lengths = src.lengths;
  for (const auto& layer : dec.layers) {
    Var<S> kv = kv_input ? *kv_input : x;
    x = norm(tape, layer.ln_self, add(x, drop(mha(tape, layer.self_attn, x, kv, self_mask), mode)));
    x = norm(tape, layer.ln_cross, add(x, drop(mha(tape, layer.cross_attn, x, enc, cross_mask), mode)));
    x = norm(tape, layer.ln_ffn, add(x, drop(ffn(tape, layer.ffn_in, layer.ffn_out, x, mode), mode)));
  }
  return x;
}

template <typename S>
Var<S> Model<S>::ar_states(Tape<S>& tape, Var<S> enc, const TokenBatch& src, const TokenBatch& y_in,
                           const ForwardMode& mode) const {
  check_tokens(y_in, "ar_states");
  return run_decoder(tape, ar_decoder_, config_.ar_pe, enc, src, y_in, mode, mode.ar_causal, nullptr);
}

template <typename S>
Var<S> Model<S>::nar_states(Tape<S>& tape, Var<S> enc, const TokenBatch& src, const TokenBatch& y_obs,
                            const ForwardMode& mode, const std::vector<BoolMat>* contexts) const {
  check_tokens(y_obs, "nar_states");
  return run_decoder(tape, nar_decoder_, config_.nar_pe, enc, src, y_obs, mode, false, contexts);
}

template <typename S>
Var<S> Model<S>::hybrid_states(Tape<S>& tape, Var<S> h_ar, Var<S> h_nar) const {
  if (!config_.hybrid_enabled) throw std::logic_error("hybrid head is disabled in this model");
  if (h_ar.rows() != h_nar.rows() || h_ar.cols() != h_nar.cols()) {
    throw std::invalid_argument("hybrid_states: AR and NAR states differ in shape");
  }
  return linear(tape, hyb_fc2_, gelu(linear(tape, hyb_fc1_, concat_cols(h_ar, h_nar))));
}

template <typename S>
Var<S> Model<S>::logits(Tape<S>& tape, Var<S> h, OutputHead head) const {
  switch (head) {
    case OutputHead::ar: return linear(tape, ar_decoder_.out, h);
    case OutputHead::nar: return linear(tape, nar_decoder_.out, h);
    case OutputHead::hyb:
      if (!config_.hybrid_enabled) throw std::logic_error("hybrid head is disabled in this model");
      return linear(tape, hyb_out_, h);
  }
  throw std::logic_error("unknown output head");
}

template <typename S>
Var<S> Model<S>::output_distribution(Tape<S>& tape, Var<S> h, OutputHead head) const {
  return softmax_rows(logits(tape, h, head));
}

template <typename S>
Var<S> Model<S>::length_logits(Tape<S>& tape, Var<S> enc, const TokenBatch& src) const {
  Mat<S> pool = Mat<S>::Zero(src.batch, src.batch * src.length);
  for (Index b = 0; b < src.batch; ++b) {
    const Index m = src.lengths[static_cast<std::size_t>(b)];
    pool.block(b, b * src.length, 1, m).setConstant(S(1) / static_cast<S>(m));
  }
  return linear(tape, length_head_, matmul(tape.constant(std::move(pool)), enc));
}

template <typename S>
std::vector<Parameter<S>*> Model<S>::parameters() {
  std::vector<Parameter<S>*> out;
  out.reserve(params_.size());
  for (auto& p : params_) out.push_back(p.get());
  return out;
}

template <typename S>
std::vector<const Parameter<S>*> Model<S>::parameters() const {
  std::vector<const Parameter<S>*> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p.get());
  return out;
}

template <typename S>
Parameter<S>* Model<S>::find(const std::string& name) {
  for (auto& p : params_)
    if (p->name == name) return p.get();
  return nullptr;
}

template <typename S>
void Model<S>::zero_grad() {
  for (auto& p : params_) p->zero_grad();
}

template <typename S>
void Model<S>::copy_nar_decoder_into_ar() {
  const std::string from = "nar_decoder.", to = "ar_decoder.";
  for (auto& p : params_) {
    if (p->name.rfind(from, 0) != 0) continue;
    Parameter<S>* target = find(to + p->name.substr(from.size()));
    if (!target) continue;
    if (target->value.rows() != p->value.rows() || target->value.cols() != p->value.cols()) {
      throw std::logic_error("copy_nar_decoder_into_ar: shape mismatch at " + p->name);
    }
    target->value = p->value;
  }
}

template Mat<float> sinusoidal_pe<float>(int, int);
template Mat<double> sinusoidal_pe<double>(int, int);
template class Model<float>;
template class Model<double>;

}  // namespace dcmcl
