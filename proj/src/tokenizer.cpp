#include "mcrnet/tokenizer.hpp"

#include <cctype>
#include <fstream>
#include <stdexcept>
#include <unordered_map>

namespace mcrnet {

namespace {

// Decodes one UTF-8 codepoint starting at byte i; returns its byte length.
// Malformed bytes are treated as single-byte codepoints so offsets stay
// consistent on dirty input.
int utf8_len(unsigned char lead) {
  if (lead < 0x80) return 1;
  if ((lead >> 5) == 0x6) return 2;
  if ((lead >> 4) == 0xe) return 3;
  if ((lead >> 3) == 0x1e) return 4;
  return 1;
}

bool is_ascii_word(unsigned char c) {
  return std::isalnum(c) != 0 && c < 0x80;
}

bool is_ascii_space(unsigned char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
         c == '\v';
}

}  // namespace

std::vector<Token> tokenize(const std::string& text) {
  std::vector<Token> out;
  std::size_t i = 0;
  int cp = 0;  // codepoint index
  std::string word;
  int word_begin = 0;
  auto flush = [&]() {
    if (!word.empty()) {
      out.push_back({word, word_begin, cp});
      word.clear();
    }
  };
  while (i < text.size()) {
    unsigned char lead = static_cast<unsigned char>(text[i]);
    int len = utf8_len(lead);
    if (i + len > text.size()) len = 1;
    if (len == 1 && is_ascii_word(lead)) {
      if (word.empty()) word_begin = cp;
      word.push_back(static_cast<char>(std::tolower(lead)));
    } else if (len == 1 && is_ascii_space(lead)) {
      flush();
    } else {
      flush();
      out.push_back({text.substr(i, len), cp, cp + 1});
    }
    i += len;
    ++cp;
  }
  flush();
  return out;
}

int count_codepoints(const std::string& text) {
  int n = 0;
  std::size_t i = 0;
  while (i < text.size()) {
    int len = utf8_len(static_cast<unsigned char>(text[i]));
    if (i + len > text.size()) len = 1;
    i += len;
    ++n;
  }
  return n;
}

std::string substring_codepoints(const std::string& text, int begin, int end) {
  if (begin >= end) return "";
  std::size_t i = 0;
  int cp = 0;
  std::size_t byte_begin = text.size(), byte_end = text.size();
  while (i < text.size()) {
    if (cp == begin) byte_begin = i;
    if (cp == end) {
      byte_end = i;
      break;
    }
    int len = utf8_len(static_cast<unsigned char>(text[i]));
    if (i + len > text.size()) len = 1;
    i += len;
    ++cp;
  }
  if (cp == begin) byte_begin = i;
  return text.substr(byte_begin, byte_end - byte_begin);
}

Vocab::Vocab() {
  for (const char* t : {"[PAD]", "[UNK]", "[CLS]", "[SEP]"}) add(t);
}

int Vocab::id(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnk : it->second;
}

const std::string& Vocab::token(int id) const {
  if (id < 0 || id >= size())
    throw std::out_of_range("vocab: id " + std::to_string(id) +
                            " out of range");
  return tokens_[static_cast<std::size_t>(id)];
}

bool Vocab::contains(const std::string& token) const {
  return index_.count(token) != 0;
}

void Vocab::add(const std::string& token) {
  if (token.empty() || contains(token)) return;
  index_.emplace(token, size());
  tokens_.push_back(token);
}

std::vector<int> Vocab::ids(const std::vector<Token>& toks) const {
  std::vector<int> out;
  out.reserve(toks.size());
  for (const Token& t : toks) out.push_back(id(t.text));
  return out;
}

Vocab Vocab::build(const std::vector<std::string>& corpus_tokens,
                   int min_freq) {
  std::unordered_map<std::string, int> counts;
  for (const auto& t : corpus_tokens) ++counts[t];
  Vocab v;
  for (const auto& t : corpus_tokens) {
    if (counts[t] >= min_freq) v.add(t);
  }
  return v;
}

Vocab Vocab::from_tokens(const std::vector<std::string>& tokens) {
  Vocab v;
  std::size_t i = 0;
  for (const auto& t : tokens) {
    if (i < 4) {
      if (t != v.tokens()[i])
        throw std::runtime_error("vocab: reserved token mismatch: " + t);
    } else {
      v.add(t);
    }
    ++i;
  }
  if (i < 4) throw std::runtime_error("vocab: missing reserved tokens");
  return v;
}

void Vocab::save(const std::string& path) const {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("vocab: cannot write " + path);
  for (const auto& t : tokens_) f << t << '\n';
}

Vocab Vocab::load(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("vocab: cannot read " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(f, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return from_tokens(lines);
}

}  // namespace mcrnet
