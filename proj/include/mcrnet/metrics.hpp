#pragma once

#include <map>
#include <string>
#include <vector>

#include "mcrnet/data.hpp"

namespace mcrnet {

// SQuAD-style answer normalization: lowercase, drop punctuation, drop the
// articles a/an/the, collapse whitespace.
std::string normalize_text(const std::string& s);

// Normalized bag-of-tokens; non-ASCII codepoints split per character so
// CJK text is scored at character granularity.
std::vector<std::string> eval_tokens(const std::string& s);

// Max over golds. An empty gold list means unanswerable: the prediction
// scores 1 iff it is empty after normalization.
int exact_match(const std::string& pred, const std::vector<std::string>& golds);
double token_f1(const std::string& pred, const std::vector<std::string>& golds);

// LCS F-measure with recall weight beta; 0 when either side is empty.
double rouge_l(const std::vector<std::string>& pred,
               const std::vector<std::string>& gold, double beta = 1.2);

// Cumulative 4-gram BLEU with brevity penalty; n>=2 counts get add-one
// smoothing, so identical sentences score exactly 1.
double bleu4(const std::vector<std::string>& pred,
             const std::vector<std::string>& gold);

// One scored prediction as read from the predictions file.
struct PredRecord {
  std::string id;
  double score = 0.0;        // unanswerability probability
  bool has_answer = false;   // false: no feasible span was produced
  std::string answer_text;
  int start = -1;
  int end = -1;
};

struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  int true_pos = 0;
  int false_pos = 0;
  int false_neg = 0;
};

// Unanswerable-class precision/recall/F1 at `threshold` (positive class =
// unanswerable, predicted positive = score > threshold).
Prf unanswerable_prf(const std::vector<PredRecord>& preds,
                     const std::vector<RawExample>& golds, double threshold);

struct EvalConfig {
  double threshold = 0.3;
  double rouge_beta = 1.2;
};

struct EvalReport {
  double em = 0.0;
  double f1 = 0.0;
  double rouge_l = 0.0;
  double bleu4 = 0.0;
  double unans_precision = 0.0;
  double unans_recall = 0.0;
  double unans_f1 = 0.0;
  double ans_accuracy = 0.0;  // fraction with the correct abstain decision
  double em_answerable = 0.0; // EM restricted to gold-answerable questions
  double f1_answerable = 0.0;
  int total = 0;
  int answered = 0;
  int abstained = 0;
  double threshold = 0.3;

  std::string to_table() const;
};

// Scores id-aligned predictions against gold examples. Missing predictions
// count as wrong answerable guesses; duplicate prediction ids are an error.
EvalReport evaluate_dataset(const std::vector<PredRecord>& preds,
                            const std::vector<RawExample>& golds,
                            const EvalConfig& cfg = {});

}  // namespace mcrnet
