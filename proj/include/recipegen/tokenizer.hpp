#pragma once

#include <iosfwd>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace recipegen {

class TokenizerError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Word-boundary-aware byte-pair encoding. Words are split on whitespace and
/// the final symbol of each word carries an end-of-word marker, so merges
/// never cross word boundaries and decoding only has to replace the marker
/// with a space. Whitespace runs are normalized to single spaces.
class BpeModel {
 public:
  static constexpr int kPad = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;
  static constexpr int kUnk = 3;
  static constexpr std::size_t kSpecials = 4;
  static constexpr const char* kEndOfWord = "</w>";

  using Merge = std::pair<std::string, std::string>;

  BpeModel() = default;

  std::vector<int> encode(const std::string& text) const;
  std::string decode(std::span<const int> ids) const;

  std::size_t size() const { return tokens_.size(); }
  const std::vector<Merge>& merges() const { return merges_; }
  const std::string& token(int id) const;
  /// Returns kUnk for unknown strings.
  int id(const std::string& token) const;
  bool contains(const std::string& token) const { return ids_.count(token) > 0; }

  void save(std::ostream& out) const;
  void save(const std::string& path) const;
  static BpeModel load(std::istream& in);
  static BpeModel load(const std::string& path);
  /// Stable hash of the serialized model, used to tie checkpoints to a tokenizer.
  std::string fingerprint() const;

 private:
  friend BpeModel train_bpe(const std::vector<std::string>& texts, std::size_t target_vocab);

  void add_token(const std::string& token);
  std::vector<std::string> word_symbols(const std::string& word) const;

  std::vector<std::string> tokens_;
  std::map<std::string, int> ids_;
  std::vector<Merge> merges_;
  std::map<Merge, std::size_t> merge_rank_;
};

/// Greedy BPE: repeatedly merges the most frequent adjacent pair (ties broken
/// by the lexicographically smallest pair) until the vocabulary reaches
/// `target_vocab` or no pair remains. The base alphabet contains every seen
/// character both in word-internal and word-final form.
BpeModel train_bpe(const std::vector<std::string>& texts, std::size_t target_vocab);

/// Splits UTF-8 text into code points (invalid bytes pass through singly).
std::vector<std::string> utf8_chars(const std::string& word);

std::vector<std::string> split_whitespace(const std::string& text);

}  // namespace recipegen
