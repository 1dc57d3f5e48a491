#pragma once

#include <string>
#include <utility>
#include <vector>

#include "mcrnet/rng.hpp"
#include "mcrnet/tensor.hpp"

namespace mcrnet {

struct RelationConfig {
  int steps = 2;              // J; 0 bypasses the interaction entirely
  int hidden = 64;
  bool share_weights = true;  // one block reused across steps

  void validate() const {
    require(steps >= 0, "relation: negative step count");
    require(hidden > 0, "relation: hidden size must be positive");
  }
};

// Start/end clue vectors threaded through the relation blocks.
template <typename Scalar>
struct ClueState {
  Tensor<Scalar> s;  // 1xh
  Tensor<Scalar> e;  // 1xh
};

// Attention snapshot of one interaction step (values, not graph nodes).
template <typename Scalar>
struct StepTrace {
  int step = 0;
  std::vector<Scalar> alpha;
  std::vector<Scalar> beta;
};

template <typename Scalar>
struct RelationWeights {
  struct Block {
    Parameter<Scalar> start_w, start_b;  // 2h x h, 1 x h
    Parameter<Scalar> end_w, end_b;      // 3h x h, 1 x h
    Parameter<Scalar> logit_w, logit_b;  // scalar affine on end logits
  };

  Parameter<Scalar> s0, e0;  // trainable initial clue vectors, 1 x h
  std::vector<Block> blocks;
  Parameter<Scalar> fuse_w;  // 3h x h

  void init(const RelationConfig& cfg, Rng& rng) {
    cfg.validate();
    const int h = cfg.hidden;
    s0 = Parameter<Scalar>("relation.s0", clue_init(rng, h));
    e0 = Parameter<Scalar>("relation.e0", clue_init(rng, h));
    const int nblocks = cfg.share_weights ? 1 : std::max(1, cfg.steps);
    blocks.clear();
    blocks.resize(static_cast<std::size_t>(nblocks));
    for (int i = 0; i < nblocks; ++i) {
      Block& b = blocks[static_cast<std::size_t>(i)];
      const std::string px = "relation.block" + std::to_string(i) + ".";
      b.start_w = Parameter<Scalar>(px + "start.w", glorot(rng, 2 * h, h));
      b.start_b = Parameter<Scalar>(px + "start.b", Matrix<Scalar>::Zero(1, h));
      b.end_w = Parameter<Scalar>(px + "end.w", glorot(rng, 3 * h, h));
      b.end_b = Parameter<Scalar>(px + "end.b", Matrix<Scalar>::Zero(1, h));
      b.logit_w = Parameter<Scalar>(px + "logit.w", Matrix<Scalar>::Ones(1, 1));
      b.logit_b = Parameter<Scalar>(px + "logit.b", Matrix<Scalar>::Zero(1, 1));
    }
    fuse_w = Parameter<Scalar>("relation.fuse.w", glorot(rng, 3 * h, h));
  }

  std::vector<Parameter<Scalar>*> parameters() {
    std::vector<Parameter<Scalar>*> out{&s0, &e0};
    for (Block& b : blocks)
      for (Parameter<Scalar>* p : {&b.start_w, &b.start_b, &b.end_w, &b.end_b,
                                   &b.logit_w, &b.logit_b})
        out.push_back(p);
    out.push_back(&fuse_w);
    return out;
  }

  static Matrix<Scalar> clue_init(Rng& rng, int h) {
    Matrix<Scalar> m(1, h);
    for (int c = 0; c < h; ++c)
      m(0, c) = static_cast<Scalar>(rng.uniform(-0.1, 0.1));
    return m;
  }

  static Matrix<Scalar> glorot(Rng& rng, Index fan_in, Index fan_out) {
    double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Matrix<Scalar> m(fan_in, fan_out);
    for (Index r = 0; r < fan_in; ++r)
      for (Index c = 0; c < fan_out; ++c)
        m(r, c) = static_cast<Scalar>(rng.uniform(-limit, limit));
    return m;
  }
};

// Initial clue vectors as tape tensors.
template <typename Scalar>
ClueState<Scalar> init_clues(Tape<Scalar>& tape, RelationWeights<Scalar>& w) {
  return {tape.param(w.s0), tape.param(w.e0)};
}

template <typename Scalar>
struct SubblockResult {
  Tensor<Scalar> dist;    // 1xL attention distribution (alpha or beta)
  Tensor<Scalar> clue;    // 1xh updated clue vector
  Tensor<Scalar> p_hat;   // Lxh enhanced passage representation
};

// Start sub-block: enhance each position with the start clue, reread the
// question, and pool the enhanced rows under the resulting distribution.
template <typename Scalar>
SubblockResult<Scalar> start_subblock(
    Tape<Scalar>& tape, const Tensor<Scalar>& s, const Tensor<Scalar>& p,
    const Tensor<Scalar>& q_cls, const Mask& mask,
    typename RelationWeights<Scalar>::Block& w) {
  const Index len = p.rows();
  auto enhanced = concat_cols<Scalar>({broadcast_rows(s, len), p});
  auto p_hat = relu(affine(enhanced, tape.param(w.start_w), tape.param(w.start_b)));
  auto logits = matmul(q_cls, transpose(p_hat));  // 1xL
  auto alpha = masked_softmax(logits, mask);
  auto s_next = weighted_sum(alpha, p_hat);
  return {alpha, s_next, p_hat};
}

// End sub-block: conditions on the fresh start clue as well, and passes the
// rereading scores through a shared scalar affine before the softmax.
template <typename Scalar>
SubblockResult<Scalar> end_subblock(
    Tape<Scalar>& tape, const Tensor<Scalar>& s_next, const Tensor<Scalar>& e,
    const Tensor<Scalar>& p, const Tensor<Scalar>& q_cls, const Mask& mask,
    typename RelationWeights<Scalar>::Block& w) {
  const Index len = p.rows();
  auto enhanced = concat_cols<Scalar>(
      {broadcast_rows(s_next, len), broadcast_rows(e, len), p});
  auto p_hat = relu(affine(enhanced, tape.param(w.end_w), tape.param(w.end_b)));
  auto z = matmul(q_cls, transpose(p_hat));
  auto logits = shift_by(scale_by(z, tape.param(w.logit_w)),
                         tape.param(w.logit_b));
  auto beta = masked_softmax(logits, mask);
  auto e_next = weighted_sum(beta, p_hat);
  return {beta, e_next, p_hat};
}

template <typename Scalar>
struct RelationResult {
  Tensor<Scalar> s;        // final start clue, 1xh
  Tensor<Scalar> e;        // final end clue, 1xh
  Tensor<Scalar> p_fused;  // Lxh
  std::vector<StepTrace<Scalar>> traces;
  // graph handles to the per-step distributions, index-aligned with traces
  std::vector<std::pair<Tensor<Scalar>, Tensor<Scalar>>> trace_tensors;
};

// Runs J interaction steps threading the clue state, then fuses the final
// clues into every position: p_fused_t = [p_t; s_J; e_J] * W_g.
template <typename Scalar>
RelationResult<Scalar> run_module(Tape<Scalar>& tape, const Tensor<Scalar>& p,
                                  const Tensor<Scalar>& q_cls, const Mask& mask,
                                  const RelationConfig& cfg,
                                  RelationWeights<Scalar>& w) {
  cfg.validate();
  require(!cfg.share_weights ||
              static_cast<int>(w.blocks.size()) >= 1,
          "relation: no blocks initialized");
  require(cfg.share_weights ||
              static_cast<int>(w.blocks.size()) >= std::max(1, cfg.steps),
          "relation: fewer blocks than steps");
  RelationResult<Scalar> out;
  ClueState<Scalar> clues = init_clues(tape, w);
  for (int j = 0; j < cfg.steps; ++j) {
    auto& block = w.blocks[cfg.share_weights ? 0 : static_cast<std::size_t>(j)];
    auto start = start_subblock(tape, clues.s, p, q_cls, mask, block);
    auto end = end_subblock(tape, start.clue, clues.e, p, q_cls, mask, block);
    clues = {start.clue, end.clue};
    StepTrace<Scalar> trace;
    trace.step = j;
    const auto& av = start.dist.value();
    const auto& bv = end.dist.value();
    trace.alpha.assign(av.data(), av.data() + av.size());
    trace.beta.assign(bv.data(), bv.data() + bv.size());
    out.traces.push_back(std::move(trace));
    out.trace_tensors.emplace_back(start.dist, end.dist);
  }
  const Index len = p.rows();
  auto fused_in = concat_cols<Scalar>(
      {p, broadcast_rows(clues.s, len), broadcast_rows(clues.e, len)});
  out.p_fused = matmul(fused_in, tape.param(w.fuse_w));
  out.s = clues.s;
  out.e = clues.e;
  return out;
}

}  // namespace mcrnet
