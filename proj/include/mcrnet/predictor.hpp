#pragma once

#include <string>
#include <vector>

#include "mcrnet/encoder.hpp"
#include "mcrnet/rng.hpp"
#include "mcrnet/tensor.hpp"

namespace mcrnet {

// Probability floor keeping log() finite inside the losses.
inline constexpr double kProbEps = 1e-7;

template <typename Scalar>
struct PredictorWeights {
  Parameter<Scalar> w_s;  // 2h x 1 answerability classifier
  Parameter<Scalar> w_c;  // h x 1 start-position scorer
  Parameter<Scalar> w_e;  // h x 1 end-position scorer

  void init(int hidden, Rng& rng) {
    w_s = Parameter<Scalar>("predictor.w_s", column(rng, 2 * hidden));
    w_c = Parameter<Scalar>("predictor.w_c", column(rng, hidden));
    w_e = Parameter<Scalar>("predictor.w_e", column(rng, hidden));
  }

  std::vector<Parameter<Scalar>*> parameters() { return {&w_s, &w_c, &w_e}; }

  static Matrix<Scalar> column(Rng& rng, int n) {
    double limit = std::sqrt(6.0 / static_cast<double>(n + 1));
    Matrix<Scalar> m(n, 1);
    for (int r = 0; r < n; ++r)
      m(r, 0) = static_cast<Scalar>(rng.uniform(-limit, limit));
    return m;
  }
};

enum class Decision { kAnswerable, kUnanswerable };

struct Span {
  int start = 0;
  int end = 0;  // inclusive, joint-sequence token indices
};

// Decoded output for one question.
template <typename Scalar>
struct Prediction {
  Scalar score = Scalar(0);  // unanswerability probability
  Decision decision = Decision::kUnanswerable;
  bool has_span = false;
  Span span;
  bool degenerate = false;  // no feasible span existed
  std::vector<Scalar> gamma, eta;
};

// Unanswerability probability from the final clue vectors:
// sigmoid(w_s . [s; e]).
template <typename Scalar>
Tensor<Scalar> answerability_score(Tape<Scalar>& tape, const Tensor<Scalar>& s,
                                   const Tensor<Scalar>& e,
                                   PredictorWeights<Scalar>& w) {
  auto joined = concat_cols<Scalar>({s, e});
  return sigmoid(matmul(joined, tape.param(w.w_s)));
}

// Mean binary cross-entropy over the batch; labels use 1 = unanswerable.
template <typename Scalar>
Tensor<Scalar> ans_loss(Tape<Scalar>& tape,
                        const std::vector<Tensor<Scalar>>& scores,
                        const std::vector<int>& labels) {
  require(!scores.empty(), "ans_loss: empty batch");
  require(scores.size() == labels.size(),
          "ans_loss: scores/labels length mismatch");
  for (int y : labels)
    require(y == 0 || y == 1, "ans_loss: label outside {0,1}");
  std::vector<Tensor<Scalar>> stacked;
  for (const auto& s : scores) {
    require(s.rows() == 1 && s.cols() == 1, "ans_loss: scores must be 1x1");
    stacked.push_back(s);
  }
  auto shat = clamp(concat_rows(stacked), Scalar(kProbEps),
                    Scalar(1.0 - kProbEps));
  const Index b = shat.rows();
  Matrix<Scalar> y(b, 1);
  for (Index i = 0; i < b; ++i) y(i, 0) = static_cast<Scalar>(labels[i]);
  auto yt = tape.constant(y);
  auto ones = tape.constant(Matrix<Scalar>::Ones(b, 1));
  auto term = add(cmul(yt, log(shat)), cmul(sub(ones, yt), log(sub(ones, shat))));
  return scale(mean(term), Scalar(-1));
}

// Valid start/end support: the sentinel at index 0 plus the passage tokens.
inline Mask span_support_mask(const SequenceLayout& seq) {
  Mask m(seq.ids.size(), 0);
  m[0] = 1;
  for (int i = seq.passage_begin; i < seq.passage_end; ++i)
    m[static_cast<std::size_t>(i)] = 1;
  return m;
}

// Start/end distributions over the fused representation.
template <typename Scalar>
std::pair<Tensor<Scalar>, Tensor<Scalar>> span_distributions(
    Tape<Scalar>& tape, const Tensor<Scalar>& p_fused, const Mask& support,
    PredictorWeights<Scalar>& w) {
  auto gamma = masked_softmax(transpose(matmul(p_fused, tape.param(w.w_c))),
                              support);
  auto eta = masked_softmax(transpose(matmul(p_fused, tape.param(w.w_e))),
                            support);
  return {gamma, eta};
}

// Mean negative log-likelihood of the gold start/end positions. Unanswerable
// examples use the sentinel (0, 0) as their gold span.
template <typename Scalar>
Tensor<Scalar> span_loss(Tape<Scalar>& tape,
                         const std::vector<Tensor<Scalar>>& gammas,
                         const std::vector<Tensor<Scalar>>& etas,
                         const std::vector<Span>& golds) {
  require(!gammas.empty(), "span_loss: empty batch");
  require(gammas.size() == etas.size() && gammas.size() == golds.size(),
          "span_loss: batch length mismatch");
  std::vector<Tensor<Scalar>> terms;
  for (std::size_t i = 0; i < gammas.size(); ++i) {
    const Span& g = golds[i];
    require(g.start >= 0 && g.start < gammas[i].cols() && g.end >= 0 &&
                g.end < etas[i].cols(),
            "span_loss: gold position out of range");
    require(gammas[i].value()(0, g.start) > Scalar(0),
            "span_loss: gold start at a masked position");
    require(etas[i].value()(0, g.end) > Scalar(0),
            "span_loss: gold end at a masked position");
    auto ps = clamp(select(gammas[i], 0, g.start), Scalar(kProbEps), Scalar(2));
    auto pe = clamp(select(etas[i], 0, g.end), Scalar(kProbEps), Scalar(2));
    terms.push_back(add(log(ps), log(pe)));
  }
  return scale(mean(concat_rows(terms)), Scalar(-1));
}

template <typename Scalar>
struct LossBreakdown {
  Tensor<Scalar> joint;  // graph handle for backward
  Scalar span = Scalar(0);
  Scalar ans = Scalar(0);
  Scalar total = Scalar(0);
  Scalar lambda1 = Scalar(0);
  Scalar lambda2 = Scalar(0);
};

// total = lambda1 * span + lambda2 * ans.
template <typename Scalar>
LossBreakdown<Scalar> joint_loss(const Tensor<Scalar>& l_span,
                                 const Tensor<Scalar>& l_ans, Scalar lambda1,
                                 Scalar lambda2) {
  require(lambda1 >= Scalar(0) && lambda2 >= Scalar(0),
          "joint_loss: negative loss weights");
  LossBreakdown<Scalar> out;
  out.joint = add(scale(l_span, lambda1), scale(l_ans, lambda2));
  out.span = l_span.item();
  out.ans = l_ans.item();
  out.total = out.joint.item();
  out.lambda1 = lambda1;
  out.lambda2 = lambda2;
  return out;
}

// Threshold rule plus constrained span argmax over gamma_s * eta_e with
// s <= e, both inside the passage region, and length <= max_answer_len.
// Ties prefer the smaller start, then the smaller end.
template <typename Scalar>
Prediction<Scalar> decode_answer(Scalar score, const std::vector<Scalar>& gamma,
                                 const std::vector<Scalar>& eta,
                                 double threshold, int max_answer_len,
                                 int passage_begin, int passage_end) {
  require(gamma.size() == eta.size(), "decode: gamma/eta length mismatch");
  require(max_answer_len >= 1, "decode: max answer length must be positive");
  Prediction<Scalar> out;
  out.score = score;
  out.gamma = gamma;
  out.eta = eta;
  if (static_cast<double>(score) > threshold) {
    out.decision = Decision::kUnanswerable;
    return out;
  }
  const int lo = std::max(passage_begin, 1);  // sentinel excluded
  const int hi = std::min<int>(passage_end, static_cast<int>(gamma.size()));
  bool found = false;
  Scalar best = Scalar(0);
  Span best_span;
  for (int s = lo; s < hi; ++s) {
    const int last = std::min(hi - 1, s + max_answer_len - 1);
    for (int e = s; e <= last; ++e) {
      const Scalar prod = gamma[static_cast<std::size_t>(s)] *
                          eta[static_cast<std::size_t>(e)];
      if (!found || prod > best) {
        found = true;
        best = prod;
        best_span = {s, e};
      }
    }
  }
  if (!found) {
    out.decision = Decision::kUnanswerable;
    out.degenerate = true;
    return out;
  }
  out.decision = Decision::kAnswerable;
  out.has_span = true;
  out.span = best_span;
  return out;
}

}  // namespace mcrnet
