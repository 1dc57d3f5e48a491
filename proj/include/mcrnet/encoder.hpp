#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "mcrnet/rng.hpp"
#include "mcrnet/tensor.hpp"
#include "mcrnet/tokenizer.hpp"

namespace mcrnet {

struct EncoderConfig {
  int hidden = 64;
  int layers = 2;
  int heads = 4;
  int max_seq_len = 128;
  int vocab_size = 0;
  double dropout = 0.1;
  int ffn_mult = 4;

  void validate() const {
    require(hidden > 0 && heads > 0 && hidden % heads == 0,
            "encoder: hidden size must be divisible by head count");
    require(layers >= 0, "encoder: negative layer count");
    require(max_seq_len >= 4, "encoder: max sequence length too small");
    require(vocab_size > Vocab::kSep, "encoder: vocab size not set");
    require(dropout >= 0.0 && dropout < 1.0, "encoder: dropout out of range");
  }
};

// Token layout of one encoder input: [CLS] question [SEP] (passage [SEP]),
// right-padded to pad_to when requested.
struct SequenceLayout {
  std::vector<int> ids;
  Mask mask;                // true at real tokens, false at padding
  int length = 0;           // unpadded length including specials
  int passage_begin = 0;    // [begin, end) range of passage tokens
  int passage_end = 0;
  bool truncated = false;

  int padded_length() const { return static_cast<int>(ids.size()); }
};

inline SequenceLayout make_question_layout(const std::vector<int>& q_ids,
                                           int max_len, int pad_to = 0) {
  SequenceLayout out;
  int m = static_cast<int>(q_ids.size());
  if (m + 2 > max_len) {
    m = max_len - 2;
    out.truncated = true;
  }
  out.ids.push_back(Vocab::kCls);
  out.ids.insert(out.ids.end(), q_ids.begin(), q_ids.begin() + m);
  out.ids.push_back(Vocab::kSep);
  out.length = m + 2;
  out.mask.assign(out.ids.size(), 1);
  for (int i = out.length; i < pad_to; ++i) {
    out.ids.push_back(Vocab::kPad);
    out.mask.push_back(0);
  }
  return out;
}

inline SequenceLayout make_joint_layout(const std::vector<int>& q_ids,
                                        const std::vector<int>& p_ids,
                                        int max_len, int pad_to = 0) {
  SequenceLayout out;
  int m = static_cast<int>(q_ids.size());
  int n = static_cast<int>(p_ids.size());
  // keep room for [CLS], two [SEP]s and at least one passage token
  if (m > max_len - 4) {
    m = max_len - 4;
    out.truncated = true;
  }
  if (m + n + 3 > max_len) {
    n = max_len - 3 - m;
    out.truncated = true;
  }
  out.ids.push_back(Vocab::kCls);
  out.ids.insert(out.ids.end(), q_ids.begin(), q_ids.begin() + m);
  out.ids.push_back(Vocab::kSep);
  out.passage_begin = static_cast<int>(out.ids.size());
  out.ids.insert(out.ids.end(), p_ids.begin(), p_ids.begin() + n);
  out.passage_end = static_cast<int>(out.ids.size());
  out.ids.push_back(Vocab::kSep);
  out.length = m + n + 3;
  out.mask.assign(out.ids.size(), 1);
  for (int i = out.length; i < pad_to; ++i) {
    out.ids.push_back(Vocab::kPad);
    out.mask.push_back(0);
  }
  return out;
}

template <typename Scalar>
struct EncoderWeights {
  struct Layer {
    Parameter<Scalar> wq, bq, wk, bk, wv, bv, wo, bo;
    Parameter<Scalar> ln1_g, ln1_b, ln2_g, ln2_b;
    Parameter<Scalar> ff1_w, ff1_b, ff2_w, ff2_b;
  };

  Parameter<Scalar> tok_embed;  // vocab x h
  Parameter<Scalar> pos_embed;  // max_seq_len x h
  Parameter<Scalar> ln_e_g, ln_e_b;
  std::vector<Layer> layers;

  void init(const EncoderConfig& cfg, Rng& rng) {
    cfg.validate();
    const int h = cfg.hidden;
    const int f = cfg.ffn_mult * h;
    tok_embed = Parameter<Scalar>(
        "encoder.tok_embed", uniform_matrix(rng, cfg.vocab_size, h, 0.05));
    pos_embed = Parameter<Scalar>(
        "encoder.pos_embed", uniform_matrix(rng, cfg.max_seq_len, h, 0.05));
    ln_e_g = Parameter<Scalar>("encoder.ln_e.gain", Matrix<Scalar>::Ones(1, h));
    ln_e_b = Parameter<Scalar>("encoder.ln_e.bias", Matrix<Scalar>::Zero(1, h));
    layers.clear();
    layers.resize(static_cast<std::size_t>(cfg.layers));
    for (int l = 0; l < cfg.layers; ++l) {
      Layer& lay = layers[static_cast<std::size_t>(l)];
      const std::string px = "encoder.layer" + std::to_string(l) + ".";
      lay.wq = Parameter<Scalar>(px + "wq", glorot(rng, h, h));
      lay.bq = Parameter<Scalar>(px + "bq", Matrix<Scalar>::Zero(1, h));
      lay.wk = Parameter<Scalar>(px + "wk", glorot(rng, h, h));
      lay.bk = Parameter<Scalar>(px + "bk", Matrix<Scalar>::Zero(1, h));
      lay.wv = Parameter<Scalar>(px + "wv", glorot(rng, h, h));
      lay.bv = Parameter<Scalar>(px + "bv", Matrix<Scalar>::Zero(1, h));
      lay.wo = Parameter<Scalar>(px + "wo", glorot(rng, h, h));
      lay.bo = Parameter<Scalar>(px + "bo", Matrix<Scalar>::Zero(1, h));
      lay.ln1_g = Parameter<Scalar>(px + "ln1.gain", Matrix<Scalar>::Ones(1, h));
      lay.ln1_b = Parameter<Scalar>(px + "ln1.bias", Matrix<Scalar>::Zero(1, h));
      lay.ln2_g = Parameter<Scalar>(px + "ln2.gain", Matrix<Scalar>::Ones(1, h));
      lay.ln2_b = Parameter<Scalar>(px + "ln2.bias", Matrix<Scalar>::Zero(1, h));
      lay.ff1_w = Parameter<Scalar>(px + "ff1.w", glorot(rng, h, f));
      lay.ff1_b = Parameter<Scalar>(px + "ff1.b", Matrix<Scalar>::Zero(1, f));
      lay.ff2_w = Parameter<Scalar>(px + "ff2.w", glorot(rng, f, h));
      lay.ff2_b = Parameter<Scalar>(px + "ff2.b", Matrix<Scalar>::Zero(1, h));
    }
  }

  std::vector<Parameter<Scalar>*> parameters() {
    std::vector<Parameter<Scalar>*> out{&tok_embed, &pos_embed, &ln_e_g,
                                        &ln_e_b};
    for (Layer& l : layers) {
      for (Parameter<Scalar>* p :
           {&l.wq, &l.bq, &l.wk, &l.bk, &l.wv, &l.bv, &l.wo, &l.bo, &l.ln1_g,
            &l.ln1_b, &l.ln2_g, &l.ln2_b, &l.ff1_w, &l.ff1_b, &l.ff2_w,
            &l.ff2_b})
        out.push_back(p);
    }
    return out;
  }

  static Matrix<Scalar> uniform_matrix(Rng& rng, Index rows, Index cols,
                                       double limit) {
    Matrix<Scalar> m(rows, cols);
    for (Index r = 0; r < rows; ++r)
      for (Index c = 0; c < cols; ++c)
        m(r, c) = static_cast<Scalar>(rng.uniform(-limit, limit));
    return m;
  }

  static Matrix<Scalar> glorot(Rng& rng, Index fan_in, Index fan_out) {
    double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    return uniform_matrix(rng, fan_in, fan_out, limit);
  }
};

// One self-attention + feed-forward block (post-norm residuals). Padded
// positions are excluded as attention keys by the mask.
template <typename Scalar>
Tensor<Scalar> transformer_layer(Tape<Scalar>& tape, const Tensor<Scalar>& x,
                                 const Mask& mask,
                                 typename EncoderWeights<Scalar>::Layer& w,
                                 const EncoderConfig& cfg, bool training,
                                 Rng* rng,
                                 std::vector<Tensor<Scalar>>* attn_out = nullptr) {
  const int heads = cfg.heads;
  const Index dh = x.cols() / heads;
  auto q = affine(x, tape.param(w.wq), tape.param(w.bq));
  auto k = affine(x, tape.param(w.wk), tape.param(w.bk));
  auto v = affine(x, tape.param(w.wv), tape.param(w.bv));
  const Scalar inv_sqrt = Scalar(1) / std::sqrt(static_cast<Scalar>(dh));
  std::vector<Tensor<Scalar>> head_outs;
  for (int i = 0; i < heads; ++i) {
    auto qh = slice_cols(q, i * dh, dh);
    auto kh = slice_cols(k, i * dh, dh);
    auto vh = slice_cols(v, i * dh, dh);
    auto scores = scale(matmul(qh, transpose(kh)), inv_sqrt);
    auto attn = masked_softmax(scores, mask);
    if (attn_out) attn_out->push_back(attn);
    head_outs.push_back(matmul(attn, vh));
  }
  auto merged = affine(concat_cols(head_outs), tape.param(w.wo),
                       tape.param(w.bo));
  if (training && rng) merged = dropout(merged, cfg.dropout, *rng);
  auto h1 = layer_norm(add(x, merged), tape.param(w.ln1_g), tape.param(w.ln1_b));
  auto f = affine(relu(affine(h1, tape.param(w.ff1_w), tape.param(w.ff1_b))),
                  tape.param(w.ff2_w), tape.param(w.ff2_b));
  if (training && rng) f = dropout(f, cfg.dropout, *rng);
  return layer_norm(add(h1, f), tape.param(w.ln2_g), tape.param(w.ln2_b));
}

// Embedding block + layer stack over one laid-out sequence. Returns Lxh
// where L is the padded length.
template <typename Scalar>
Tensor<Scalar> encoder_forward(Tape<Scalar>& tape, const SequenceLayout& seq,
                               EncoderWeights<Scalar>& w,
                               const EncoderConfig& cfg, bool training = false,
                               Rng* rng = nullptr) {
  require(seq.padded_length() <= cfg.max_seq_len,
          "encoder: sequence longer than max_seq_len");
  const Index len = static_cast<Index>(seq.ids.size());
  auto tok = gather_rows(tape.param(w.tok_embed), seq.ids);
  auto pos = slice_rows(tape.param(w.pos_embed), 0, len);
  auto x = layer_norm(add(tok, pos), tape.param(w.ln_e_g), tape.param(w.ln_e_b));
  if (training && rng) x = dropout(x, cfg.dropout, *rng);
  for (auto& layer : w.layers)
    x = transformer_layer(tape, x, seq.mask, layer, cfg, training, rng);
  return x;
}

// Joint question+passage pass: [CLS] q [SEP] p [SEP] -> Lxh.
template <typename Scalar>
std::pair<Tensor<Scalar>, SequenceLayout> encode_joint(
    Tape<Scalar>& tape, const std::vector<int>& q_ids,
    const std::vector<int>& p_ids, EncoderWeights<Scalar>& w,
    const EncoderConfig& cfg, bool training = false, Rng* rng = nullptr,
    int pad_to = 0) {
  SequenceLayout seq = make_joint_layout(q_ids, p_ids, cfg.max_seq_len, pad_to);
  return {encoder_forward(tape, seq, w, cfg, training, rng), seq};
}

// Question-only pass; returns the [CLS] row.
template <typename Scalar>
Tensor<Scalar> encode_question(Tape<Scalar>& tape,
                               const std::vector<int>& q_ids,
                               EncoderWeights<Scalar>& w,
                               const EncoderConfig& cfg, bool training = false,
                               Rng* rng = nullptr) {
  SequenceLayout seq = make_question_layout(q_ids, cfg.max_seq_len);
  auto enc = encoder_forward(tape, seq, w, cfg, training, rng);
  return row(enc, 0);
}

}  // namespace mcrnet
