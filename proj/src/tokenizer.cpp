#include "recipegen/tokenizer.hpp"

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

namespace recipegen {

std::vector<std::string> utf8_chars(const std::string& word) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < word.size();) {
    const auto c = static_cast<unsigned char>(word[i]);
    std::size_t len = 1;
    if (c >= 0xF0) len = 4;
    else if (c >= 0xE0) len = 3;
    else if (c >= 0xC0) len = 2;
    if (i + len > word.size()) len = 1;
    out.push_back(word.substr(i, len));
    i += len;
  }
  return out;
}

std::vector<std::string> split_whitespace(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string w;
  while (in >> w) out.push_back(w);
  return out;
}

void BpeModel::add_token(const std::string& token) {
  if (ids_.count(token)) return;
  ids_[token] = static_cast<int>(tokens_.size());
  tokens_.push_back(token);
}

const std::string& BpeModel::token(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size())
    throw TokenizerError("token id out of range: " + std::to_string(id));
  return tokens_[static_cast<std::size_t>(id)];
}

int BpeModel::id(const std::string& token) const {
  const auto it = ids_.find(token);
  return it == ids_.end() ? kUnk : it->second;
}

std::vector<std::string> BpeModel::word_symbols(const std::string& word) const {
  auto symbols = utf8_chars(word);
  if (!symbols.empty()) symbols.back() += kEndOfWord;
  return symbols;
}

namespace {

// Applies `merge` to every non-overlapping occurrence, left to right.
void apply_merge(std::vector<std::string>& symbols, const BpeModel::Merge& merge) {
  std::vector<std::string> out;
  out.reserve(symbols.size());
  for (std::size_t i = 0; i < symbols.size(); ++i) {
    if (i + 1 < symbols.size() && symbols[i] == merge.first && symbols[i + 1] == merge.second) {
      out.push_back(symbols[i] + symbols[i + 1]);
      ++i;
    } else {
      out.push_back(std::move(symbols[i]));
    }
  }
  symbols = std::move(out);
}

}  // namespace

BpeModel train_bpe(const std::vector<std::string>& texts, std::size_t target_vocab) {
  std::map<std::string, std::size_t> word_counts;
  for (const auto& t : texts)
    for (auto& w : split_whitespace(t)) ++word_counts[w];
  if (word_counts.empty()) throw TokenizerError("cannot train BPE on an empty corpus");

  BpeModel model;
  for (const char* s : {"<pad>", "<s>", "</s>", "<unk>"}) model.add_token(s);

  std::set<std::string> base;
  for (const auto& [w, n] : word_counts)
    for (const auto& ch : utf8_chars(w)) {
      base.insert(ch);
      base.insert(ch + BpeModel::kEndOfWord);
    }
  if (target_vocab < base.size() + BpeModel::kSpecials)
    throw TokenizerError("target vocabulary " + std::to_string(target_vocab) + " is smaller than the " +
                         std::to_string(base.size() + BpeModel::kSpecials) + " base symbols and specials");
  for (const auto& s : base) model.add_token(s);

  std::vector<std::pair<std::vector<std::string>, std::size_t>> words;
  for (const auto& [w, n] : word_counts) words.emplace_back(model.word_symbols(w), n);

  while (model.size() < target_vocab) {
    std::map<BpeModel::Merge, std::size_t> pairs;
    for (const auto& [symbols, n] : words)
      for (std::size_t i = 0; i + 1 < symbols.size(); ++i) pairs[{symbols[i], symbols[i + 1]}] += n;
    if (pairs.empty()) break;
    // std::map iterates pairs in lexicographic order, so the first maximum wins ties.
    auto best = pairs.begin();
    for (auto it = pairs.begin(); it != pairs.end(); ++it)
      if (it->second > best->second) best = it;
    const BpeModel::Merge merge = best->first;
    model.merge_rank_[merge] = model.merges_.size();
    model.merges_.push_back(merge);
    model.add_token(merge.first + merge.second);
    for (auto& [symbols, n] : words) apply_merge(symbols, merge);
  }
  return model;
}

std::vector<int> BpeModel::encode(const std::string& text) const {
  std::vector<int> ids;
  for (const auto& word : split_whitespace(text)) {
    auto symbols = word_symbols(word);
    while (symbols.size() > 1) {
      std::size_t best_rank = merges_.size();
      for (std::size_t i = 0; i + 1 < symbols.size(); ++i) {
        const auto it = merge_rank_.find({symbols[i], symbols[i + 1]});
        if (it != merge_rank_.end() && it->second < best_rank) best_rank = it->second;
      }
      if (best_rank == merges_.size()) break;
      apply_merge(symbols, merges_[best_rank]);
    }
    for (const auto& s : symbols) ids.push_back(id(s));
  }
  return ids;
}

std::string BpeModel::decode(std::span<const int> ids) const {
  std::string out;
  const std::string marker = kEndOfWord;
  for (const int i : ids) {
    const std::string& tok = token(i);
    if (i == kPad || i == kBos || i == kEos) continue;
    if (tok.size() >= marker.size() && tok.compare(tok.size() - marker.size(), marker.size(), marker) == 0) {
      out += tok.substr(0, tok.size() - marker.size());
      out += ' ';
    } else {
      out += tok;
    }
  }
  while (!out.empty() && out.back() == ' ') out.pop_back();
  return out;
}

void BpeModel::save(std::ostream& out) const {
  out << "#recipegen-bpe 1\n";
  out << "[vocab] " << tokens_.size() << '\n';
  for (std::size_t i = 0; i < tokens_.size(); ++i) out << i << '\t' << tokens_[i] << '\n';
  out << "[merges] " << merges_.size() << '\n';
  for (const auto& [a, b] : merges_) out << a << '\t' << b << '\n';
}

void BpeModel::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw TokenizerError("cannot write BPE model: " + path);
  save(out);
}

BpeModel BpeModel::load(std::istream& in) {
  BpeModel m;
  std::string line;
  if (!std::getline(in, line) || line != "#recipegen-bpe 1") throw TokenizerError("not a BPE model file");
  std::string tag;
  std::size_t count = 0;
  if (!std::getline(in, line)) throw TokenizerError("truncated BPE model");
  std::istringstream(line) >> tag >> count;
  if (tag != "[vocab]") throw TokenizerError("expected [vocab] section");
  for (std::size_t i = 0; i < count; ++i) {
    if (!std::getline(in, line)) throw TokenizerError("truncated vocab section");
    const auto tab = line.find('\t');
    if (tab == std::string::npos || std::stoul(line.substr(0, tab)) != i)
      throw TokenizerError("malformed vocab line " + std::to_string(i));
    m.add_token(line.substr(tab + 1));
  }
  if (!std::getline(in, line)) throw TokenizerError("truncated BPE model");
  std::istringstream(line) >> tag >> count;
  if (tag != "[merges]") throw TokenizerError("expected [merges] section");
  for (std::size_t i = 0; i < count; ++i) {
    if (!std::getline(in, line)) throw TokenizerError("truncated merges section");
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw TokenizerError("malformed merge line " + std::to_string(i));
    Merge merge{line.substr(0, tab), line.substr(tab + 1)};
    m.merge_rank_[merge] = m.merges_.size();
    m.merges_.push_back(std::move(merge));
  }
  return m;
}

BpeModel BpeModel::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw TokenizerError("cannot open BPE model: " + path);
  return load(in);
}

std::string BpeModel::fingerprint() const {
  std::ostringstream text;
  save(text);
  std::uint64_t h = 1469598103934665603ull;  // FNV-1a
  for (const unsigned char c : text.str()) {
    h ^= c;
    h *= 1099511628211ull;
  }
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << h;
  return out.str();
}

}  // namespace recipegen
