#pragma once

#include <string>
#include <unordered_map>
#include <vector>

namespace mcrnet {

// One surface token. Offsets are codepoint positions into the original
// text, [begin, end), so spans can be mapped back to exact substrings.
struct Token {
  std::string text;  // lowercased
  int begin = 0;
  int end = 0;
};

// Lowercasing whitespace-and-punctuation tokenizer. ASCII alphanumeric runs
// form words; ASCII whitespace separates; every other codepoint (punctuation,
// CJK, symbols) becomes a single-character token.
std::vector<Token> tokenize(const std::string& text);

int count_codepoints(const std::string& text);

// Substring addressed by codepoint offsets [begin, end).
std::string substring_codepoints(const std::string& text, int begin, int end);

// Token-id table. Ids 0..3 are reserved for [PAD], [UNK], [CLS], [SEP];
// the on-disk format is one token per line, line number = id.
class Vocab {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kCls = 2;
  static constexpr int kSep = 3;

  Vocab();

  int id(const std::string& token) const;
  const std::string& token(int id) const;
  bool contains(const std::string& token) const;
  int size() const { return static_cast<int>(tokens_.size()); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  void add(const std::string& token);

  std::vector<int> ids(const std::vector<Token>& toks) const;

  // First-occurrence order over the corpus; tokens below min_freq map to
  // [UNK] at lookup time.
  static Vocab build(const std::vector<std::string>& corpus_tokens,
                     int min_freq = 1);
  static Vocab from_tokens(const std::vector<std::string>& tokens);

  void save(const std::string& path) const;
  static Vocab load(const std::string& path);

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

}  // namespace mcrnet
