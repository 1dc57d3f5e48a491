#pragma once

#include <cstdint>
#include <vector>

#include "mcrnet/encoder.hpp"
#include "mcrnet/predictor.hpp"
#include "mcrnet/relation.hpp"
#include "mcrnet/rng.hpp"
#include "mcrnet/tensor.hpp"

namespace mcrnet {

struct ModelConfig {
  EncoderConfig encoder;
  RelationConfig relation;
  double lambda1 = 0.7;
  double lambda2 = 0.3;
  double threshold = 0.3;
  int max_answer_len = 30;

  void validate() const {
    encoder.validate();
    relation.validate();
    require(relation.hidden == encoder.hidden,
            "model: encoder/relation hidden sizes differ");
    require(lambda1 >= 0.0 && lambda2 >= 0.0,
            "model: negative loss weights");
    require(threshold >= 0.0 && threshold <= 1.0,
            "model: threshold outside [0,1]");
    require(max_answer_len >= 1, "model: max answer length must be positive");
  }
};

// Full network: shared contextual encoder, stacked relation blocks, and the
// answer predictor heads.
template <typename Scalar>
class Model {
 public:
  Model() = default;

  Model(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    cfg.validate();
    Rng rng(seed);
    encoder_.init(cfg.encoder, rng);
    relation_.init(cfg.relation, rng);
    predictor_.init(cfg.encoder.hidden, rng);
  }

  struct ExampleForward {
    SequenceLayout layout;
    Tensor<Scalar> p;       // Lxh joint representation
    Tensor<Scalar> q_cls;   // 1xh question summary
    RelationResult<Scalar> relation;
    Tensor<Scalar> score;   // 1x1 unanswerability probability
    Tensor<Scalar> gamma;   // 1xL
    Tensor<Scalar> eta;     // 1xL
  };

  // One example end to end on the given tape. pad_to right-pads the joint
  // sequence (batch-mate alignment); padding is masked everywhere.
  ExampleForward forward(Tape<Scalar>& tape, const std::vector<int>& q_ids,
                         const std::vector<int>& p_ids, bool training = false,
                         Rng* rng = nullptr, int pad_to = 0) {
    ExampleForward out;
    auto joint = encode_joint(tape, q_ids, p_ids, encoder_, cfg_.encoder,
                              training, rng, pad_to);
    out.p = joint.first;
    out.layout = joint.second;
    out.q_cls =
        encode_question(tape, q_ids, encoder_, cfg_.encoder, training, rng);
    out.relation = run_module(tape, out.p, out.q_cls, out.layout.mask,
                              cfg_.relation, relation_);
    out.score = answerability_score(tape, out.relation.s, out.relation.e,
                                    predictor_);
    auto dists = span_distributions(tape, out.relation.p_fused,
                                    span_support_mask(out.layout), predictor_);
    out.gamma = dists.first;
    out.eta = dists.second;
    return out;
  }

  struct InferenceResult {
    Prediction<Scalar> prediction;
    std::vector<StepTrace<Scalar>> traces;
    SequenceLayout layout;
  };

  // Evaluation-mode single example: forward plus threshold decoding.
  InferenceResult infer(const std::vector<int>& q_ids,
                        const std::vector<int>& p_ids) {
    Tape<Scalar> tape;
    ExampleForward f = forward(tape, q_ids, p_ids);
    InferenceResult out;
    const auto& gv = f.gamma.value();
    const auto& ev = f.eta.value();
    std::vector<Scalar> gamma(gv.data(), gv.data() + gv.size());
    std::vector<Scalar> eta(ev.data(), ev.data() + ev.size());
    out.prediction = decode_answer(f.score.item(), gamma, eta, cfg_.threshold,
                                   cfg_.max_answer_len, f.layout.passage_begin,
                                   f.layout.passage_end);
    out.traces = std::move(f.relation.traces);
    out.layout = std::move(f.layout);
    return out;
  }

  std::vector<Parameter<Scalar>*> parameters() {
    std::vector<Parameter<Scalar>*> out;
    for (auto* p : encoder_.parameters()) out.push_back(p);
    for (auto* p : relation_.parameters()) out.push_back(p);
    for (auto* p : predictor_.parameters()) out.push_back(p);
    return out;
  }

  void zero_grad() {
    for (auto* p : parameters()) p->zero_grad();
  }

  const ModelConfig& config() const { return cfg_; }
  ModelConfig& mutable_config() { return cfg_; }
  EncoderWeights<Scalar>& encoder() { return encoder_; }
  RelationWeights<Scalar>& relation() { return relation_; }
  PredictorWeights<Scalar>& predictor() { return predictor_; }

 private:
  ModelConfig cfg_;
  EncoderWeights<Scalar> encoder_;
  RelationWeights<Scalar> relation_;
  PredictorWeights<Scalar> predictor_;
};

}  // namespace mcrnet
