#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <string>
#include <vector>

#include "mcrnet/metrics.hpp"
#include "mcrnet/rng.hpp"

using namespace mcrnet;

namespace {

std::vector<std::string> toks(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ' ') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

RawExample gold_example(const std::string& id,
                        const std::vector<std::string>& answers,
                        bool impossible) {
  RawExample ex;
  ex.id = id;
  ex.question = "q";
  ex.passage = "p";
  ex.is_impossible = impossible;
  for (const auto& a : answers) ex.answers.push_back({a, 0});
  return ex;
}

PredRecord pred(const std::string& id, double score, const std::string& text) {
  PredRecord p;
  p.id = id;
  p.score = score;
  p.has_answer = !text.empty();
  p.answer_text = text;
  return p;
}

}  // namespace

TEST_CASE("text normalization") {
  CHECK(normalize_text("The Cat!") == "cat");
  CHECK(normalize_text("") == "");
  CHECK(normalize_text("  A  mid-night   SNACK ") == "midnight snack");
  CHECK(normalize_text("an apple a day") == "apple day");
  // idempotent
  for (const char* s : {"The Cat!", "a-b c", "U.S. Army", "He said: \"go\""}) {
    CHECK(normalize_text(normalize_text(s)) == normalize_text(s));
  }
}

TEST_CASE("exact match and token F1 against frozen fixtures") {
  struct Case {
    std::string pred;
    std::vector<std::string> golds;
    int em;
    double f1;
  };
  const std::vector<Case> cases = {
      {"the cat sat", {"cat sat"}, 1, 1.0},
      {"cat", {"cat"}, 1, 1.0},
      {"cat sat", {"dog ran"}, 0, 0.0},
      {"The Cat!", {"cat"}, 1, 1.0},
      {"cat sat on the mat", {"cat sat"}, 0, 0.6666666666666666},
      {"", {}, 1, 1.0},
      {"something", {}, 0, 0.0},
      {"", {"cat"}, 0, 0.0},
      {"an apple", {"apple", "banana"}, 1, 1.0},
      {"apple pie", {"banana", "apple tart"}, 0, 0.5},
      {"a b c d", {"b c"}, 0, 0.8},
      {"U.S. Army", {"US Army"}, 1, 1.0},
  };
  for (const auto& c : cases) {
    CAPTURE(c.pred);
    CHECK(exact_match(c.pred, c.golds) == c.em);
    CHECK(token_f1(c.pred, c.golds) == doctest::Approx(c.f1).epsilon(1e-9));
  }
}

TEST_CASE("EM is never above F1 and both are gold-order symmetric") {
  const std::vector<std::pair<std::string, std::vector<std::string>>> cases = {
      {"later laws", {"new rules", "later laws passed"}},
      {"cat sat on the mat", {"cat sat", "the mat"}},
      {"alpha beta", {"beta", "gamma", "alpha beta"}},
  };
  for (const auto& [p, golds] : cases) {
    CHECK(exact_match(p, golds) <= token_f1(p, golds) + 1e-12);
    auto reversed = golds;
    std::reverse(reversed.begin(), reversed.end());
    CHECK(exact_match(p, golds) == exact_match(p, reversed));
    CHECK(token_f1(p, golds) ==
          doctest::Approx(token_f1(p, reversed)).epsilon(1e-12));
  }
}

TEST_CASE("rouge-l against frozen fixtures") {
  struct Case {
    std::string pred, gold;
    double want;
  };
  const std::vector<Case> cases = {
      {"a b c d", "a c d", 0.8798076923076923},
      {"x y z", "x y z", 1.0},
      {"a b", "c d", 0.0},
      {"", "a", 0.0},
      {"a", "", 0.0},
      {"a b", "b a", 0.5},
      {"the quick brown fox", "quick fox", 0.7093023255813954},
      {"a a b", "a b b", 0.6666666666666666},
      {"w", "w w w", 0.45864661654135336},
      {"p q r s t", "p x q y t", 0.6},
      {"one two three four five six", "one three five", 0.7093023255813954},
      {"alpha beta", "alpha beta gamma", 0.7721518987341772},
  };
  for (const auto& c : cases) {
    CAPTURE(c.pred);
    CHECK(rouge_l(toks(c.pred), toks(c.gold)) ==
          doctest::Approx(c.want).epsilon(1e-9));
  }
}

TEST_CASE("bleu-4 against frozen fixtures") {
  struct Case {
    std::string pred, gold;
    double want;
  };
  const std::vector<Case> cases = {
      {"a b c d e", "a b c d e", 1.0},
      {"", "a b", 0.0},
      {"a b c d e", "a b c d f", 0.7521206186172787},
      {"a b c", "a b c d e f", 0.36787944117144233},
      {"hi", "hi", 1.0},
      {"a", "b", 0.0},
      {"the cat sat on the mat", "the cat sat on a mat", 0.6389431042462724},
      {"one two three four", "one two three four five", 0.7788007830714049},
      {"x y x y", "x y", 0.4518010018049224},
      {"a b c d e f g", "a b c x e f g", 0.4974292207467277},
      {"q w e r t y", "q w e r t y", 1.0},
      {"m n o p", "p o n m", 0.4518010018049224},
  };
  for (const auto& c : cases) {
    CAPTURE(c.pred);
    CHECK(bleu4(toks(c.pred), toks(c.gold)) ==
          doctest::Approx(c.want).epsilon(1e-9));
  }
}

TEST_CASE("unanswerable precision/recall/f1 against confusion counts") {
  struct Case {
    std::vector<std::pair<double, bool>> items;  // score, gold unanswerable
    double threshold, p, r, f1;
  };
  const std::vector<Case> cases = {
      {{{0.9, true}, {0.8, true}, {0.1, false}, {0.2, false}},
       0.3, 1.0, 1.0, 1.0},
      {{{0.9, true}, {0.1, true}, {0.9, false}, {0.1, false}},
       0.3, 0.5, 0.5, 0.5},
      {{{0.5, true}, {0.5, false}}, 0.5, 0.0, 0.0, 0.0},
      {{{0.0, false}, {0.0, false}}, 0.3, 0.0, 0.0, 0.0},
      {{{1.0, true}, {1.0, true}}, 0.3, 1.0, 1.0, 1.0},
      {{{0.4, true}, {0.2, true}, {0.6, false}}, 0.3, 0.5, 0.5, 0.5},
      {{{0.31, false}, {0.29, true}}, 0.3, 0.0, 0.0, 0.0},
      {{{0.9, false}, {0.8, false}, {0.7, false}}, 0.3, 0.0, 0.0, 0.0},
      {{{0.1, true}, {0.2, true}}, 0.3, 0.0, 0.0, 0.0},
      {{{0.35, true}, {0.25, false}, {0.95, true}, {0.05, false}, {0.45, false}},
       0.3, 0.6666666666666666, 1.0, 0.8},
  };
  int n = 0;
  for (const auto& c : cases) {
    CAPTURE(n);
    std::vector<PredRecord> preds;
    std::vector<RawExample> golds;
    int i = 0;
    for (const auto& [score, unans] : c.items) {
      const std::string id = "q" + std::to_string(i++);
      preds.push_back(pred(id, score, unans ? "" : "x"));
      golds.push_back(gold_example(id,
                                   unans ? std::vector<std::string>{}
                                         : std::vector<std::string>{"x"},
                                   unans));
    }
    Prf got = unanswerable_prf(preds, golds, c.threshold);
    CHECK(got.precision == doctest::Approx(c.p).epsilon(1e-12));
    CHECK(got.recall == doctest::Approx(c.r).epsilon(1e-12));
    CHECK(got.f1 == doctest::Approx(c.f1).epsilon(1e-12));
    ++n;
  }
}

TEST_CASE("dataset evaluation: perfect predictions score 1") {
  std::vector<RawExample> golds = {
      gold_example("a", {"little opposition"}, false),
      gold_example("b", {}, true),
  };
  std::vector<PredRecord> preds = {pred("a", 0.05, "little opposition"),
                                   pred("b", 0.95, "")};
  EvalReport rep = evaluate_dataset(preds, golds);
  CHECK(rep.em == doctest::Approx(1.0));
  CHECK(rep.f1 == doctest::Approx(1.0));
  CHECK(rep.rouge_l == doctest::Approx(1.0));
  CHECK(rep.bleu4 == doctest::Approx(1.0));
  CHECK(rep.unans_precision == doctest::Approx(1.0));
  CHECK(rep.unans_recall == doctest::Approx(1.0));
  CHECK(rep.unans_f1 == doctest::Approx(1.0));
  CHECK(rep.ans_accuracy == doctest::Approx(1.0));
  CHECK(rep.answered + rep.abstained == rep.total);
}

TEST_CASE("dataset evaluation: empty prediction set scores 0") {
  std::vector<RawExample> golds = {gold_example("a", {"x"}, false),
                                   gold_example("b", {}, true)};
  EvalReport rep = evaluate_dataset({}, golds);
  CHECK(rep.em == doctest::Approx(0.0));
  CHECK(rep.f1 == doctest::Approx(0.0));
  CHECK(rep.rouge_l == doctest::Approx(0.0));
  CHECK(rep.bleu4 == doctest::Approx(0.0));
  // missing predictions are answerable decisions: gold-unanswerable missed
  CHECK(rep.unans_recall == doctest::Approx(0.0));
  CHECK(rep.abstained == 0);
}

TEST_CASE("dataset evaluation matches the hand-scored four-example fixture") {
  std::vector<RawExample> golds = {
      gold_example("e1", {"little opposition"}, false),
      gold_example("e2", {"new rules", "later laws passed"}, false),
      gold_example("e3", {}, true),
      gold_example("e4", {}, true),
  };
  std::vector<PredRecord> preds = {
      pred("e1", 0.1, "little opposition"),
      pred("e2", 0.2, "later laws"),
      pred("e3", 0.8, "ignored"),  // abstains: score above threshold
      pred("e4", 0.05, "wrong"),
  };
  EvalReport rep = evaluate_dataset(preds, golds);
  CHECK(rep.em == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(rep.f1 == doctest::Approx(0.7).epsilon(1e-12));
  CHECK(rep.rouge_l == doctest::Approx(0.6930379746835443).epsilon(1e-9));
  CHECK(rep.bleu4 == doctest::Approx(0.6516326649281583).epsilon(1e-9));
  CHECK(rep.ans_accuracy == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(rep.em_answerable == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(rep.answered == 3);
  CHECK(rep.abstained == 1);
}

TEST_CASE("duplicate prediction ids are rejected") {
  std::vector<RawExample> golds = {gold_example("a", {"x"}, false)};
  std::vector<PredRecord> preds = {pred("a", 0.1, "x"), pred("a", 0.2, "y")};
  CHECK_THROWS_AS(evaluate_dataset(preds, golds), std::runtime_error);
}

TEST_CASE("recall is monotonically non-increasing over a threshold sweep") {
  Rng rng(17);
  std::vector<PredRecord> preds;
  std::vector<RawExample> golds;
  for (int i = 0; i < 60; ++i) {
    const std::string id = "s" + std::to_string(i);
    const bool unans = rng.bernoulli(0.4);
    preds.push_back(pred(id, rng.uniform(), unans ? "" : "x"));
    golds.push_back(gold_example(id,
                                 unans ? std::vector<std::string>{}
                                       : std::vector<std::string>{"x"},
                                 unans));
  }
  double prev_recall = 1.0;
  for (double thr = 0.0; thr <= 1.0001; thr += 0.05) {
    Prf got = unanswerable_prf(preds, golds, thr);
    CHECK(got.recall <= prev_recall + 1e-12);
    prev_recall = got.recall;
  }
}

TEST_CASE("identical and disjoint inputs hit the metric extremes") {
  CHECK(rouge_l(toks("p q r"), toks("p q r")) == doctest::Approx(1.0));
  CHECK(rouge_l(toks("p q"), toks("x y")) == doctest::Approx(0.0));
  CHECK(bleu4(toks("p q r s"), toks("p q r s")) == doctest::Approx(1.0));
  CHECK(bleu4(toks("p q"), toks("x y")) == doctest::Approx(0.0));
  CHECK(exact_match("same", {"same"}) == 1);
  CHECK(token_f1("none shared", {"all different"}) == doctest::Approx(0.0));
}

TEST_CASE("chinese-style text is scored per character") {
  auto t = eval_tokens("\xE5\x8C\x97\xE4\xBA\xAC\xE5\xA4\xA7\xE5\xAD\xA6");
  CHECK(t.size() == 4);
  CHECK(rouge_l(t, t) == doctest::Approx(1.0));
}
