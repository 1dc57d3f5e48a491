#include "mcrnet/data.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "mcrnet/metrics.hpp"
#include "mcrnet/rng.hpp"

namespace mcrnet {

using nlohmann::json;

std::vector<RawExample> load_squad_json(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("dataset: cannot open " + path);
  json doc;
  try {
    f >> doc;
  } catch (const json::parse_error& e) {
    throw std::runtime_error("dataset: malformed JSON in " + path + ": " +
                             e.what());
  }
  if (!doc.contains("data") || !doc["data"].is_array())
    throw std::runtime_error("dataset: missing top-level 'data' array in " +
                             path);
  std::vector<RawExample> out;
  for (const auto& article : doc["data"]) {
    if (!article.contains("paragraphs"))
      throw std::runtime_error("dataset: article without 'paragraphs' in " +
                               path);
    for (const auto& para : article["paragraphs"]) {
      if (!para.contains("context") || !para.contains("qas"))
        throw std::runtime_error(
            "dataset: paragraph missing 'context' or 'qas' in " + path);
      const std::string context = para["context"].get<std::string>();
      for (const auto& qa : para["qas"]) {
        RawExample ex;
        ex.passage = context;
        if (!qa.contains("id"))
          throw std::runtime_error("dataset: qas entry without id in " + path);
        ex.id = qa["id"].is_string() ? qa["id"].get<std::string>()
                                     : qa["id"].dump();
        if (!qa.contains("question"))
          throw std::runtime_error("dataset: missing question for qas id " +
                                   ex.id);
        ex.question = qa["question"].get<std::string>();
        ex.is_impossible = qa.value("is_impossible", false);
        if (qa.contains("answers")) {
          for (const auto& a : qa["answers"]) {
            if (!a.contains("text") || !a.contains("answer_start"))
              throw std::runtime_error(
                  "dataset: malformed answer for qas id " + ex.id);
            ex.answers.push_back(
                {a["text"].get<std::string>(), a["answer_start"].get<int>()});
          }
        }
        out.push_back(std::move(ex));
      }
    }
  }
  return out;
}

void save_squad_json(const std::string& path,
                     const std::vector<RawExample>& examples,
                     const std::string& title) {
  json paragraphs = json::array();
  for (const auto& ex : examples) {
    json answers = json::array();
    for (const auto& a : ex.answers)
      answers.push_back({{"text", a.text}, {"answer_start", a.answer_start}});
    json qa = {{"id", ex.id},
               {"question", ex.question},
               {"is_impossible", ex.is_impossible},
               {"answers", answers}};
    paragraphs.push_back(
        {{"context", ex.passage}, {"qas", json::array({qa})}});
  }
  json doc = {{"version", "v2.0"},
              {"data", json::array({{{"title", title},
                                     {"paragraphs", paragraphs}}})}};
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("dataset: cannot write " + path);
  f << doc.dump(1) << '\n';
}

std::string ProcessedExample::span_text(int s, int e) const {
  s -= passage_begin;
  e -= passage_begin;
  if (s < 0 || e < s || e >= static_cast<int>(passage_tokens.size())) return "";
  return substring_codepoints(passage_text,
                              passage_tokens[static_cast<std::size_t>(s)].begin,
                              passage_tokens[static_cast<std::size_t>(e)].end);
}

std::optional<std::pair<int, int>> align_span(
    const std::vector<Token>& passage_tokens, const std::string& passage,
    const std::string& answer, int answer_start) {
  const int a = answer_start;
  const int b = answer_start + count_codepoints(answer);
  int first = -1, last = -1;
  for (std::size_t i = 0; i < passage_tokens.size(); ++i) {
    const Token& t = passage_tokens[i];
    if (t.begin < b && t.end > a) {
      if (first < 0) first = static_cast<int>(i);
      last = static_cast<int>(i);
    }
  }
  if (first < 0) return std::nullopt;
  const std::string covered = substring_codepoints(
      passage, passage_tokens[static_cast<std::size_t>(first)].begin,
      passage_tokens[static_cast<std::size_t>(last)].end);
  if (normalize_text(covered) != normalize_text(answer)) return std::nullopt;
  return std::make_pair(first, last);
}

ProcessedExample process_example(const RawExample& raw, const Vocab& vocab,
                                 const EncoderConfig& cfg) {
  ProcessedExample out;
  out.id = raw.id;
  out.passage_text = raw.passage;
  out.question_tokens = tokenize(raw.question);
  out.passage_tokens = tokenize(raw.passage);
  out.question_ids = vocab.ids(out.question_tokens);
  out.passage_ids = vocab.ids(out.passage_tokens);
  SequenceLayout layout =
      make_joint_layout(out.question_ids, out.passage_ids, cfg.max_seq_len);
  out.passage_begin = layout.passage_begin;
  out.passage_end = layout.passage_end;
  out.truncated = layout.truncated;
  out.label = raw.is_impossible ? 1 : 0;
  for (const auto& a : raw.answers) out.gold_texts.push_back(a.text);
  if (raw.is_impossible) {
    out.gold_start = 0;
    out.gold_end = 0;
    return out;
  }
  if (raw.answers.empty()) {
    out.aligned = false;
    return out;
  }
  // first annotated answer provides the training span
  auto span = align_span(out.passage_tokens, raw.passage,
                         raw.answers.front().text,
                         raw.answers.front().answer_start);
  const int kept = out.passage_end - out.passage_begin;
  if (!span || span->second >= kept) {
    out.aligned = false;
    return out;
  }
  out.gold_start = out.passage_begin + span->first;
  out.gold_end = out.passage_begin + span->second;
  return out;
}

std::vector<ProcessedExample> process_dataset(
    const std::vector<RawExample>& raw, const Vocab& vocab,
    const EncoderConfig& cfg, int* flagged) {
  std::vector<ProcessedExample> out;
  out.reserve(raw.size());
  int bad = 0;
  for (const auto& r : raw) {
    out.push_back(process_example(r, vocab, cfg));
    if (!out.back().aligned) ++bad;
  }
  if (flagged) *flagged = bad;
  return out;
}

Vocab build_vocab(const std::vector<RawExample>& examples, int min_freq) {
  std::vector<std::string> corpus;
  for (const auto& ex : examples) {
    for (const auto& t : tokenize(ex.question)) corpus.push_back(t.text);
    for (const auto& t : tokenize(ex.passage)) corpus.push_back(t.text);
  }
  return Vocab::build(corpus, min_freq);
}

void SyntheticSpec::validate() const {
  require(vocab_words >= 2, "synthetic: word pool too small");
  require(num_keys >= 1, "synthetic: need at least one key");
  require(num_polarity_pairs >= 1, "synthetic: need at least one pair");
  require(count >= 0, "synthetic: negative example count");
  require(unanswerable_fraction >= 0.0 && unanswerable_fraction <= 1.0,
          "synthetic: unanswerable fraction outside [0,1]");
}

namespace {

const char* kPolarityBase[][2] = {
    {"little", "significant"}, {"low", "high"},     {"minor", "major"},
    {"rare", "common"},        {"weak", "strong"},  {"small", "large"},
};

std::pair<std::string, std::string> polarity_pair(int i) {
  constexpr int kBaseCount =
      static_cast<int>(sizeof(kPolarityBase) / sizeof(kPolarityBase[0]));
  if (i < kBaseCount) return {kPolarityBase[i][0], kPolarityBase[i][1]};
  const std::string n = std::to_string(i);
  return {"less" + n, "more" + n};
}

}  // namespace

std::vector<RawExample> generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  std::vector<RawExample> out;
  out.reserve(static_cast<std::size_t>(spec.count));
  for (int i = 0; i < spec.count; ++i) {
    const std::string key =
        "key" + std::to_string(rng.below(static_cast<std::uint64_t>(spec.num_keys)));
    auto pair = polarity_pair(static_cast<int>(
        rng.below(static_cast<std::uint64_t>(spec.num_polarity_pairs))));
    const bool flip_passage = rng.bernoulli(0.5);
    const std::string passage_pol = flip_passage ? pair.second : pair.first;
    const std::string value =
        "word" +
        std::to_string(rng.below(static_cast<std::uint64_t>(spec.vocab_words)));
    const bool unanswerable = rng.bernoulli(spec.unanswerable_fraction);
    const std::string question_pol =
        unanswerable ? (flip_passage ? pair.first : pair.second) : passage_pol;

    const int distractors = 8 + static_cast<int>(rng.below(7));
    const int fact_at = static_cast<int>(
        rng.below(static_cast<std::uint64_t>(distractors + 1)));
    std::vector<std::string> tokens;
    for (int d = 0; d < distractors; ++d) {
      if (d == fact_at) {
        tokens.push_back(key);
        tokens.push_back(passage_pol);
        tokens.push_back(value);
      }
      tokens.push_back(
          "word" +
          std::to_string(rng.below(static_cast<std::uint64_t>(spec.vocab_words))));
    }
    if (fact_at == distractors) {
      tokens.push_back(key);
      tokens.push_back(passage_pol);
      tokens.push_back(value);
    }

    RawExample ex;
    std::ostringstream passage;
    int value_offset = -1;
    int offset = 0;
    const int value_index = fact_at + 2;
    for (std::size_t t = 0; t < tokens.size(); ++t) {
      if (t > 0) {
        passage << ' ';
        ++offset;
      }
      if (static_cast<int>(t) == value_index) value_offset = offset;
      passage << tokens[t];
      offset += static_cast<int>(tokens[t].size());  // ASCII-only tokens
    }
    ex.passage = passage.str();
    ex.question = "what value of " + key + " with " + question_pol + " ?";
    ex.id = "synth-" + std::to_string(i);
    ex.is_impossible = unanswerable;
    if (!unanswerable) ex.answers.push_back({value, value_offset});
    out.push_back(std::move(ex));
  }
  return out;
}

std::vector<Batch> make_batches(const std::vector<ProcessedExample>& examples,
                                int batch_size, std::uint64_t shuffle_seed,
                                int max_seq_len, bool training_only) {
  require(batch_size >= 1, "batches: batch size must be positive");
  std::vector<const ProcessedExample*> usable;
  for (const auto& ex : examples)
    if (!training_only || ex.aligned) usable.push_back(&ex);
  Rng rng(shuffle_seed);
  rng.shuffle(usable);
  std::vector<Batch> out;
  for (std::size_t at = 0; at < usable.size(); at += batch_size) {
    Batch b;
    const std::size_t end =
        std::min(usable.size(), at + static_cast<std::size_t>(batch_size));
    for (std::size_t i = at; i < end; ++i) {
      b.items.push_back(usable[i]);
      SequenceLayout layout = make_joint_layout(
          usable[i]->question_ids, usable[i]->passage_ids, max_seq_len);
      b.pad_to = std::max(b.pad_to, layout.length);
    }
    out.push_back(std::move(b));
  }
  return out;
}

}  // namespace mcrnet
