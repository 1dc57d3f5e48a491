#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "mcrnet/encoder.hpp"
#include "mcrnet/grad_check.hpp"
#include "mcrnet/rng.hpp"

using namespace mcrnet;

namespace {

EncoderConfig tiny_config(int vocab_size = 24, int layers = 1) {
  EncoderConfig cfg;
  cfg.hidden = 8;
  cfg.layers = layers;
  cfg.heads = 2;
  cfg.max_seq_len = 32;
  cfg.vocab_size = vocab_size;
  cfg.dropout = 0.0;
  return cfg;
}

std::vector<int> ids(std::initializer_list<int> v) { return {v}; }

}  // namespace

TEST_CASE("joint layout is [CLS] q [SEP] p [SEP]") {
  auto seq = make_joint_layout(ids({10, 11}), ids({20, 21, 22}), 32);
  CHECK(seq.length == 8);  // M + N + 3
  CHECK(seq.ids == std::vector<int>{Vocab::kCls, 10, 11, Vocab::kSep, 20, 21,
                                    22, Vocab::kSep});
  CHECK(seq.passage_begin == 4);
  CHECK(seq.passage_end == 7);
  CHECK(!seq.truncated);
  for (auto m : seq.mask) CHECK(m == 1);
}

TEST_CASE("layout pads to the requested length with masked PADs") {
  auto seq = make_joint_layout(ids({10}), ids({20}), 32, 9);
  CHECK(seq.length == 5);
  CHECK(seq.padded_length() == 9);
  for (int i = 0; i < 5; ++i) CHECK(seq.mask[static_cast<std::size_t>(i)] == 1);
  for (int i = 5; i < 9; ++i) {
    CHECK(seq.mask[static_cast<std::size_t>(i)] == 0);
    CHECK(seq.ids[static_cast<std::size_t>(i)] == Vocab::kPad);
  }
}

TEST_CASE("overlong passages truncate from the tail and get flagged") {
  std::vector<int> q{10, 11};
  std::vector<int> p(40, 20);
  auto seq = make_joint_layout(q, p, 16);
  CHECK(seq.truncated);
  CHECK(seq.length == 16);
  CHECK(seq.passage_end - seq.passage_begin == 16 - 3 - 2);
  // question survives whole
  CHECK(seq.ids[1] == 10);
  CHECK(seq.ids[2] == 11);
}

TEST_CASE("encoder output has shape LxH and is finite") {
  EncoderConfig cfg = tiny_config(24, 2);
  Rng rng(1);
  EncoderWeights<double> w;
  w.init(cfg, rng);
  Tape<double> tape;
  auto [p, seq] = encode_joint(tape, ids({5, 6}), ids({7, 8, 9}), w, cfg);
  CHECK(p.rows() == 8);
  CHECK(p.cols() == 8);
  CHECK(all_finite(p.value()));
  auto q_cls = encode_question(tape, ids({5, 6}), w, cfg);
  CHECK(q_cls.rows() == 1);
  CHECK(q_cls.cols() == 8);
  CHECK(all_finite(q_cls.value()));
}

TEST_CASE("padding content never leaks into unpadded rows") {
  EncoderConfig cfg = tiny_config();
  Rng rng(2);
  EncoderWeights<double> w;
  w.init(cfg, rng);

  auto run = [&](int pad_id) {
    SequenceLayout seq = make_joint_layout(ids({5, 6}), ids({7, 8}), 32, 12);
    for (std::size_t i = 0; i < seq.ids.size(); ++i)
      if (!seq.mask[i]) seq.ids[i] = pad_id;  // poison the padding
    Tape<double> tape;
    return Matrix<double>(encoder_forward(tape, seq, w, cfg).value());
  };
  Matrix<double> a = run(Vocab::kPad);
  Matrix<double> b = run(17);
  for (Index r = 0; r < 7; ++r)  // unpadded length is 7
    for (Index c = 0; c < 8; ++c)
      CHECK(std::abs(a(r, c) - b(r, c)) <= 1e-9);
}

TEST_CASE("question encoding is deterministic and question-sensitive") {
  EncoderConfig cfg = tiny_config();
  Rng rng(3);
  EncoderWeights<double> w;
  w.init(cfg, rng);
  Tape<double> tape;
  auto a = encode_question(tape, ids({5, 6, 7}), w, cfg);
  auto b = encode_question(tape, ids({5, 6, 7}), w, cfg);
  for (Index c = 0; c < 8; ++c) CHECK(a.value()(0, c) == b.value()(0, c));
  auto other = encode_question(tape, ids({9, 10, 11}), w, cfg);
  CHECK((a.value() - other.value()).norm() > 0.0);
  // zero-length question still encodes ([CLS] [SEP] only)
  auto empty = encode_question(tape, {}, w, cfg);
  CHECK(empty.cols() == 8);
}

TEST_CASE("attention rows are distributions over unmasked keys") {
  EncoderConfig cfg = tiny_config();
  Rng rng(4);
  EncoderWeights<double> w;
  w.init(cfg, rng);
  SequenceLayout seq = make_joint_layout(ids({5}), ids({7, 8}), 32, 8);
  Tape<double> tape;
  auto tok = gather_rows(tape.param(w.tok_embed), seq.ids);
  auto pos = slice_rows(tape.param(w.pos_embed), 0, 8);
  auto x = layer_norm(add(tok, pos), tape.param(w.ln_e_g), tape.param(w.ln_e_b));
  std::vector<Tensor<double>> attn;
  transformer_layer(tape, x, seq.mask, w.layers[0], cfg, false, nullptr, &attn);
  REQUIRE(attn.size() == 2);  // one matrix per head
  for (const auto& a : attn) {
    for (Index r = 0; r < a.rows(); ++r) {
      CHECK(a.value().row(r).sum() == doctest::Approx(1.0).epsilon(1e-6));
      for (Index c = 0; c < a.cols(); ++c) {
        if (!seq.mask[static_cast<std::size_t>(c)])
          CHECK(a.value()(r, c) == 0.0);
      }
    }
  }
}

TEST_CASE("zero layers leaves only the embedding block") {
  EncoderConfig cfg = tiny_config(24, 0);
  Rng rng(5);
  EncoderWeights<double> w;
  w.init(cfg, rng);
  SequenceLayout seq = make_joint_layout(ids({5}), ids({7}), 32);
  Tape<double> tape;
  auto out = encoder_forward(tape, seq, w, cfg);
  auto tok = gather_rows(tape.param(w.tok_embed), seq.ids);
  auto pos = slice_rows(tape.param(w.pos_embed), 0, out.rows());
  auto expect = layer_norm(add(tok, pos), tape.param(w.ln_e_g),
                           tape.param(w.ln_e_b));
  CHECK((out.value() - expect.value()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("joint and question passes share one parameter set") {
  EncoderConfig cfg = tiny_config();
  Rng rng(6);
  EncoderWeights<double> w;
  w.init(cfg, rng);
  Tape<double> tape;
  auto [p, seq] = encode_joint(tape, ids({5}), ids({7, 8}), w, cfg);
  auto q_cls = encode_question(tape, ids({5}), w, cfg);
  auto loss = add(mean(p), mean(q_cls));
  tape.backward(loss);
  // both passes contribute gradient to the same embedding table
  CHECK(w.tok_embed.grad.cwiseAbs().sum() > 0.0);
}

TEST_CASE("gradients flow through one full layer within tolerance") {
  EncoderConfig cfg = tiny_config(16, 1);
  Rng rng(7);
  EncoderWeights<double> w;
  w.init(cfg, rng);
  SequenceLayout seq = make_joint_layout(ids({5, 6}), ids({7, 8, 9}), 32);
  auto program = [&](Tape<double>& tape) {
    Rng probe(999);
    auto y = encoder_forward(tape, seq, w, cfg);
    Matrix<double> weights(y.rows(), y.cols());
    for (Index r = 0; r < y.rows(); ++r)
      for (Index c = 0; c < y.cols(); ++c)
        weights(r, c) = probe.uniform(-1, 1);
    return sum(cmul(y, tape.constant(weights)));
  };
  auto report = grad_check<double>(program, w.parameters(), 1e-5, 1e-4);
  CHECK_MESSAGE(report.pass, report.worst_param, " rel=", report.max_rel_err);
}

TEST_CASE("encoding alone matches encoding padded as a batch-mate") {
  EncoderConfig cfg = tiny_config();
  Rng rng(8);
  EncoderWeights<double> w;
  w.init(cfg, rng);
  Tape<double> t1, t2;
  auto alone = encode_joint(t1, ids({5, 6}), ids({7, 8}), w, cfg);
  auto padded = encode_joint(t2, ids({5, 6}), ids({7, 8}), w, cfg, false,
                             nullptr, 14);
  for (Index r = 0; r < alone.first.rows(); ++r)
    for (Index c = 0; c < alone.first.cols(); ++c)
      CHECK(std::abs(alone.first.value()(r, c) - padded.first.value()(r, c)) <=
            1e-5);
}
