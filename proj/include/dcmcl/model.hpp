#pragma once

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dcmcl/rng.hpp"
#include "dcmcl/tensor.hpp"

namespace dcmcl {

// Reserved ids; real vocabulary starts at kFirstWord.
inline constexpr int kPad = 0;
inline constexpr int kBos = 1;
inline constexpr int kEos = 2;
inline constexpr int kMask = 3;
inline constexpr int kFirstWord = 4;

inline bool is_special(int id) { return id < kFirstWord; }

enum class PositionEncoding { sinusoidal, learnable };

const char* to_string(PositionEncoding pe);
PositionEncoding parse_position_encoding(const std::string& s);

struct ModelConfig {
  int vocab_size = 28;
  int d_model = 64;
  int d_hidden = 128;
  int n_heads = 2;
  int n_enc_layers = 2;
  int n_dec_layers = 2;
  int max_len = 32;
  double dropout = 0.1;
  PositionEncoding enc_pe = PositionEncoding::sinusoidal;
  PositionEncoding ar_pe = PositionEncoding::sinusoidal;
  PositionEncoding nar_pe = PositionEncoding::learnable;
  bool share_encoder = true;
  bool hybrid_enabled = false;

  void validate() const;
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// A padded batch of token sequences, row-major (batch x length).
struct TokenBatch {
  Index batch = 0;
  Index length = 0;
  std::vector<int> ids;
  std::vector<Index> lengths;

  static TokenBatch from(const std::vector<std::vector<int>>& seqs);
  int at(Index b, Index i) const { return ids[static_cast<std::size_t>(b * length + i)]; }
  // Packed row index of (item, position).
  Index row(Index b, Index i) const { return b * length + i; }
};

struct ForwardMode {
  bool train = false;
  Rng* rng = nullptr;  // required when train is set (dropout)
  bool ar_causal = true;  // diagnostic switch; training and decoding keep it on
};

enum class OutputHead { ar, nar, hyb };

// Which encoder copy to run when encoders are not shared.
enum class EncoderSide { ar, nar };

// Fixed sinusoidal table: (pos, 2i) = sin(pos / 10000^(2i/d)), (pos, 2i+1) = cos(...).
template <typename S>
Mat<S> sinusoidal_pe(int n_positions, int d_model);

template <typename S>
struct Linear {
  Parameter<S>* weight = nullptr;  // in x out
  Parameter<S>* bias = nullptr;    // 1 x out
};

template <typename S>
struct LayerNormParams {
  Parameter<S>* gain = nullptr;
  Parameter<S>* bias = nullptr;
};

template <typename S>
struct AttentionParams {
  Linear<S> q, k, v, o;
};

template <typename S>
struct EncoderLayer {
  AttentionParams<S> self_attn;
  LayerNormParams<S> ln_attn;
  Linear<S> ffn_in, ffn_out;
  LayerNormParams<S> ln_ffn;
};

template <typename S>
struct DecoderLayer {
  AttentionParams<S> self_attn;
  LayerNormParams<S> ln_self;
  AttentionParams<S> cross_attn;
  LayerNormParams<S> ln_cross;
  Linear<S> ffn_in, ffn_out;
  LayerNormParams<S> ln_ffn;
};

template <typename S>
struct EncoderParams {
  Parameter<S>* embed = nullptr;
  Parameter<S>* pos = nullptr;  // learnable positions only
  std::vector<EncoderLayer<S>> layers;
};

template <typename S>
struct DecoderParams {
  Parameter<S>* embed = nullptr;
  Parameter<S>* pos = nullptr;
  std::vector<DecoderLayer<S>> layers;
  Linear<S> out;
};

// Shared-encoder / dual-decoder transformer with optional hybrid fusion head
// and a length classifier over 1..max_len.
//
// Sequences are packed (batch * length) x d_model. Forward methods are const:
// the model is read-only during a forward pass, and gradients land in
// Parameter::grad only when the caller runs backward on a grad-enabled tape.
template <typename S>
class Model {
 public:
  Model(const ModelConfig& config, Rng& rng);

  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  const ModelConfig& config() const { return config_; }

  // E for the source batch: (batch * M) x d.
  Var<S> encode(Tape<S>& tape, const TokenBatch& src, const ForwardMode& mode,
                EncoderSide side = EncoderSide::ar) const;

  // Teacher-forced AR decoder states; y_in is <bos>-prefixed.
  Var<S> ar_states(Tape<S>& tape, Var<S> enc, const TokenBatch& src, const TokenBatch& y_in,
                   const ForwardMode& mode) const;

  // Bidirectional NAR decoder states; masked slots carry kMask. When contexts
  // is given (one N x N visibility per item), the decoder runs in per-position
  // context mode: queries start from [M] plus position, and self-attention
  // reads keys and values from the token embedding layer under that mask.
  Var<S> nar_states(Tape<S>& tape, Var<S> enc, const TokenBatch& src, const TokenBatch& y_obs,
                    const ForwardMode& mode, const std::vector<BoolMat>* contexts = nullptr) const;

  Var<S> hybrid_states(Tape<S>& tape, Var<S> h_ar, Var<S> h_nar) const;

  Var<S> logits(Tape<S>& tape, Var<S> h, OutputHead head) const;
  Var<S> output_distribution(Tape<S>& tape, Var<S> h, OutputHead head) const;

  // batch x max_len logits; column k scores target length k + 1.
  Var<S> length_logits(Tape<S>& tape, Var<S> enc, const TokenBatch& src) const;

  // Encoder output that feeds the NAR decoder and the length head.
  EncoderSide nar_encoder_side() const { return config_.share_encoder ? EncoderSide::ar : EncoderSide::nar; }

  // Stable order: construction order. Names are unique.
  std::vector<Parameter<S>*> parameters();
  std::vector<const Parameter<S>*> parameters() const;
  Parameter<S>* find(const std::string& name);
  void zero_grad();

  // Diagnostic: copy every NAR decoder weight onto the AR decoder (same shapes
  // required; positional tables included when both are learnable).
  void copy_nar_decoder_into_ar();

 private:
  Parameter<S>* make(const std::string& name, ParamGroup group, Index rows, Index cols, Rng& rng, double init);
  Linear<S> make_linear(const std::string& name, ParamGroup group, Index in, Index out, Rng& rng);
  LayerNormParams<S> make_ln(const std::string& name, ParamGroup group, Index d);
  AttentionParams<S> make_attention(const std::string& name, ParamGroup group, Rng& rng);
  EncoderParams<S> make_encoder(const std::string& prefix, ParamGroup group, Rng& rng);
  DecoderParams<S> make_decoder(const std::string& prefix, ParamGroup group, PositionEncoding pe, Rng& rng);

  Var<S> embed(Tape<S>& tape, Parameter<S>* table, Parameter<S>* pos, PositionEncoding pe, const TokenBatch& tokens,
               const ForwardMode& mode, bool dropout_on) const;
  Var<S> mha(Tape<S>& tape, const AttentionParams<S>& p, Var<S> x, Var<S> kv, const AttentionMask& mask) const;
  Var<S> linear(Tape<S>& tape, const Linear<S>& l, Var<S> x) const;
  Var<S> norm(Tape<S>& tape, const LayerNormParams<S>& ln, Var<S> x) const;
  Var<S> drop(Var<S> x, const ForwardMode& mode) const;
  Var<S> ffn(Tape<S>& tape, const Linear<S>& in, const Linear<S>& out, Var<S> x, const ForwardMode& mode) const;
  Var<S> run_decoder(Tape<S>& tape, const DecoderParams<S>& dec, PositionEncoding pe, Var<S> enc, const TokenBatch& src,
                     const TokenBatch& tokens, const ForwardMode& mode, bool causal,
                     const std::vector<BoolMat>* contexts) const;
  void check_tokens(const TokenBatch& tokens, const char* what) const;

  ModelConfig config_;
  std::vector<std::unique_ptr<Parameter<S>>> params_;
  Mat<S> sinusoid_;
  EncoderParams<S> encoder_;
  std::optional<EncoderParams<S>> encoder_nar_;
  DecoderParams<S> ar_decoder_;
  DecoderParams<S> nar_decoder_;
  Linear<S> hyb_fc1_, hyb_fc2_, hyb_out_;
  Linear<S> length_head_;
};

// Reads a parameter through a const model; see Model.
template <typename S>
Var<S> param_leaf(Tape<S>& tape, const Parameter<S>* p) {
  return tape.param(*const_cast<Parameter<S>*>(p));
}

}  // namespace dcmcl
