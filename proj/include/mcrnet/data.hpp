#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mcrnet/encoder.hpp"
#include "mcrnet/tokenizer.hpp"

namespace mcrnet {

// One question as read from SQuAD-2.0-schema JSON.
struct RawExample {
  struct Answer {
    std::string text;
    int answer_start = 0;  // codepoint offset into the passage
  };

  std::string id;
  std::string question;
  std::string passage;
  std::vector<Answer> answers;
  bool is_impossible = false;
};

std::vector<RawExample> load_squad_json(const std::string& path);
void save_squad_json(const std::string& path,
                     const std::vector<RawExample>& examples,
                     const std::string& title = "dataset");

// Tokenized example with the gold span mapped into joint-sequence indices
// (sentinel 0 for unanswerable).
struct ProcessedExample {
  std::string id;
  std::vector<int> question_ids;
  std::vector<int> passage_ids;
  std::vector<Token> question_tokens;
  std::vector<Token> passage_tokens;
  std::string passage_text;
  std::vector<std::string> gold_texts;  // all annotated answers
  int label = 0;                        // 1 = unanswerable
  int gold_start = 0;                   // joint-sequence index
  int gold_end = 0;
  int passage_begin = 0;
  int passage_end = 0;
  bool aligned = true;      // false: excluded from training, kept for eval
  bool truncated = false;

  // Original passage substring covered by joint-sequence token span [s, e].
  std::string span_text(int s, int e) const;
};

// Smallest token range whose character extent covers
// [answer_start, answer_start + len(answer)), validated by substring
// round-trip under metric normalization. Failure means the example
// cannot be used as a training span.
std::optional<std::pair<int, int>> align_span(
    const std::vector<Token>& passage_tokens, const std::string& passage,
    const std::string& answer, int answer_start);

ProcessedExample process_example(const RawExample& raw, const Vocab& vocab,
                                 const EncoderConfig& cfg);

std::vector<ProcessedExample> process_dataset(
    const std::vector<RawExample>& raw, const Vocab& vocab,
    const EncoderConfig& cfg, int* flagged = nullptr);

// Vocabulary over all question+passage tokens, first-occurrence order.
Vocab build_vocab(const std::vector<RawExample>& examples, int min_freq = 1);

// Answerable/unanswerable toy task: each passage hides one
// "key polarity value" fact among distractors; the question asks for the
// key's value under some polarity and is answerable iff the polarities
// match.
struct SyntheticSpec {
  int vocab_words = 60;        // distractor/value word pool
  int num_keys = 12;
  int num_polarity_pairs = 4;
  int count = 1000;
  double unanswerable_fraction = 0.33;
  std::uint64_t seed = 13;

  void validate() const;
};

std::vector<RawExample> generate_synthetic(const SyntheticSpec& spec);

struct Batch {
  std::vector<const ProcessedExample*> items;
  int pad_to = 0;  // max joint length in the batch
};

// Seed-deterministic shuffle, then fixed-size chunks padded to each batch's
// longest joint sequence. Only aligned examples are batched for training.
std::vector<Batch> make_batches(const std::vector<ProcessedExample>& examples,
                                int batch_size, std::uint64_t shuffle_seed,
                                int max_seq_len, bool training_only = true);

}  // namespace mcrnet
