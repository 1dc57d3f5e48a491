#include "mcrnet/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <iomanip>
#include <map>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "mcrnet/tokenizer.hpp"

namespace mcrnet {

std::string normalize_text(const std::string& s) {
  // lowercase + strip ASCII punctuation in one pass
  std::string stripped;
  stripped.reserve(s.size());
  for (unsigned char c : s) {
    if (c < 0x80 && std::ispunct(c)) continue;
    stripped.push_back(static_cast<char>(c < 0x80 ? std::tolower(c) : c));
  }
  // drop articles and collapse whitespace
  std::istringstream in(stripped);
  std::string word, out;
  while (in >> word) {
    if (word == "a" || word == "an" || word == "the") continue;
    if (!out.empty()) out.push_back(' ');
    out += word;
  }
  return out;
}

std::vector<std::string> eval_tokens(const std::string& s) {
  std::istringstream in(normalize_text(s));
  std::string word;
  std::vector<std::string> out;
  while (in >> word) {
    bool ascii = true;
    for (unsigned char c : word) ascii = ascii && c < 0x80;
    if (ascii) {
      out.push_back(word);
      continue;
    }
    // split mixed/non-ASCII words per codepoint
    int n = count_codepoints(word);
    for (int i = 0; i < n; ++i)
      out.push_back(substring_codepoints(word, i, i + 1));
  }
  return out;
}

int exact_match(const std::string& pred,
                const std::vector<std::string>& golds) {
  const std::string p = normalize_text(pred);
  if (golds.empty()) return p.empty() ? 1 : 0;
  for (const auto& g : golds)
    if (p == normalize_text(g)) return 1;
  return 0;
}

namespace {

double pair_f1(const std::vector<std::string>& pred,
               const std::vector<std::string>& gold) {
  if (pred.empty() || gold.empty())
    return pred.empty() && gold.empty() ? 1.0 : 0.0;
  std::unordered_map<std::string, int> counts;
  for (const auto& t : gold) ++counts[t];
  int common = 0;
  for (const auto& t : pred) {
    auto it = counts.find(t);
    if (it != counts.end() && it->second > 0) {
      --it->second;
      ++common;
    }
  }
  if (common == 0) return 0.0;
  double precision =
      static_cast<double>(common) / static_cast<double>(pred.size());
  double recall =
      static_cast<double>(common) / static_cast<double>(gold.size());
  return 2.0 * precision * recall / (precision + recall);
}

std::map<std::vector<std::string>, int> ngram_counts(
    const std::vector<std::string>& tokens, std::size_t n) {
  std::map<std::vector<std::string>, int> counts;
  if (tokens.size() < n) return counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i)
    ++counts[std::vector<std::string>(tokens.begin() + i,
                                      tokens.begin() + i + n)];
  return counts;
}

}  // namespace

double token_f1(const std::string& pred,
                const std::vector<std::string>& golds) {
  const auto p = eval_tokens(pred);
  if (golds.empty()) return p.empty() ? 1.0 : 0.0;
  double best = 0.0;
  for (const auto& g : golds) best = std::max(best, pair_f1(p, eval_tokens(g)));
  return best;
}

double rouge_l(const std::vector<std::string>& pred,
               const std::vector<std::string>& gold, double beta) {
  if (pred.empty() || gold.empty()) return 0.0;
  const std::size_t m = pred.size(), n = gold.size();
  std::vector<std::vector<int>> lcs(m + 1, std::vector<int>(n + 1, 0));
  for (std::size_t i = 1; i <= m; ++i) {
    for (std::size_t j = 1; j <= n; ++j) {
      lcs[i][j] = pred[i - 1] == gold[j - 1]
                      ? lcs[i - 1][j - 1] + 1
                      : std::max(lcs[i - 1][j], lcs[i][j - 1]);
    }
  }
  const double l = lcs[m][n];
  if (l == 0.0) return 0.0;
  const double p = l / static_cast<double>(m);
  const double r = l / static_cast<double>(n);
  const double b2 = beta * beta;
  return (1.0 + b2) * p * r / (r + b2 * p);
}

double bleu4(const std::vector<std::string>& pred,
             const std::vector<std::string>& gold) {
  if (pred.empty() || gold.empty()) return 0.0;
  double log_precision = 0.0;
  for (std::size_t n = 1; n <= 4; ++n) {
    auto pc = ngram_counts(pred, n);
    auto gc = ngram_counts(gold, n);
    long matched = 0, total = 0;
    for (const auto& [gram, count] : pc) {
      total += count;
      auto it = gc.find(gram);
      if (it != gc.end()) matched += std::min(count, it->second);
    }
    double p;
    if (n == 1) {
      if (matched == 0) return 0.0;
      p = static_cast<double>(matched) / static_cast<double>(total);
    } else {
      // add-one smoothing so short perfect matches are not zeroed out
      p = static_cast<double>(matched + 1) / static_cast<double>(total + 1);
    }
    log_precision += 0.25 * std::log(p);
  }
  const double c = static_cast<double>(pred.size());
  const double r = static_cast<double>(gold.size());
  const double bp = c >= r ? 1.0 : std::exp(1.0 - r / c);
  return bp * std::exp(log_precision);
}

Prf unanswerable_prf(const std::vector<PredRecord>& preds,
                     const std::vector<RawExample>& golds, double threshold) {
  std::unordered_map<std::string, const PredRecord*> by_id;
  for (const auto& p : preds) {
    if (!by_id.emplace(p.id, &p).second)
      throw std::runtime_error("metrics: duplicate prediction id " + p.id);
  }
  Prf out;
  for (const auto& g : golds) {
    auto it = by_id.find(g.id);
    // a missing prediction counts as an answerable decision
    const bool pred_unans = it != by_id.end() && it->second->score > threshold;
    if (pred_unans && g.is_impossible) ++out.true_pos;
    if (pred_unans && !g.is_impossible) ++out.false_pos;
    if (!pred_unans && g.is_impossible) ++out.false_neg;
  }
  const int pp = out.true_pos + out.false_pos;
  const int ap = out.true_pos + out.false_neg;
  out.precision = pp > 0 ? static_cast<double>(out.true_pos) / pp : 0.0;
  out.recall = ap > 0 ? static_cast<double>(out.true_pos) / ap : 0.0;
  out.f1 =
      out.precision + out.recall > 0.0
          ? 2.0 * out.precision * out.recall / (out.precision + out.recall)
          : 0.0;
  return out;
}

EvalReport evaluate_dataset(const std::vector<PredRecord>& preds,
                            const std::vector<RawExample>& golds,
                            const EvalConfig& cfg) {
  std::unordered_map<std::string, const PredRecord*> by_id;
  for (const auto& p : preds) {
    if (!by_id.emplace(p.id, &p).second)
      throw std::runtime_error("metrics: duplicate prediction id " + p.id);
  }
  EvalReport rep;
  rep.threshold = cfg.threshold;
  rep.total = static_cast<int>(golds.size());
  int answerable_total = 0;
  for (const auto& g : golds) {
    auto it = by_id.find(g.id);
    bool abstain = false;
    std::string text;
    if (it != by_id.end()) {
      abstain = it->second->score > cfg.threshold;
      if (!abstain && it->second->has_answer) text = it->second->answer_text;
    }
    if (abstain) {
      ++rep.abstained;
    } else {
      ++rep.answered;
    }
    std::vector<std::string> gold_texts;
    for (const auto& a : g.answers) gold_texts.push_back(a.text);

    double em, f1, rl, bl;
    if (g.is_impossible) {
      // correct abstention is a perfect "no answer" under every metric
      em = f1 = rl = bl = abstain ? 1.0 : 0.0;
    } else {
      const std::string pred_text = abstain ? "" : text;
      em = exact_match(pred_text, gold_texts);
      f1 = token_f1(pred_text, gold_texts);
      rl = 0.0;
      bl = 0.0;
      const auto ptoks = eval_tokens(pred_text);
      for (const auto& gt : gold_texts) {
        const auto gtoks = eval_tokens(gt);
        rl = std::max(rl, rouge_l(ptoks, gtoks, cfg.rouge_beta));
        bl = std::max(bl, bleu4(ptoks, gtoks));
      }
      ++answerable_total;
      rep.em_answerable += em;
      rep.f1_answerable += f1;
    }
    rep.em += em;
    rep.f1 += f1;
    rep.rouge_l += rl;
    rep.bleu4 += bl;
    rep.ans_accuracy += abstain == g.is_impossible ? 1.0 : 0.0;
  }
  if (rep.total > 0) {
    rep.em /= rep.total;
    rep.f1 /= rep.total;
    rep.rouge_l /= rep.total;
    rep.bleu4 /= rep.total;
    rep.ans_accuracy /= rep.total;
  }
  if (answerable_total > 0) {
    rep.em_answerable /= answerable_total;
    rep.f1_answerable /= answerable_total;
  }
  Prf prf = unanswerable_prf(preds, golds, cfg.threshold);
  rep.unans_precision = prf.precision;
  rep.unans_recall = prf.recall;
  rep.unans_f1 = prf.f1;
  return rep;
}

std::string EvalReport::to_table() const {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4);
  auto line = [&os](const std::string& k, double v) {
    os << std::left << std::setw(22) << k << std::right << std::setw(9) << v
       << "\n";
  };
  line("em", em);
  line("f1", f1);
  line("rouge_l", rouge_l);
  line("bleu4", bleu4);
  line("unans_precision", unans_precision);
  line("unans_recall", unans_recall);
  line("unans_f1", unans_f1);
  line("ans_accuracy", ans_accuracy);
  line("em_answerable", em_answerable);
  line("f1_answerable", f1_answerable);
  line("threshold", threshold);
  auto count = [&os](const std::string& k, int v) {
    os << std::left << std::setw(22) << k << std::right << std::setw(9) << v
       << "\n";
  };
  count("total", total);
  count("answered", answered);
  count("abstained", abstained);
  return os.str();
}

}  // namespace mcrnet
