#include "tcd/vocab.hpp"

#include <array>
#include <stdexcept>
#include <unordered_map>

namespace tcd::vocab {

namespace {

const std::array<std::string, 64>& table() {
  static const std::array<std::string, 64> words = {
      "<pad>", "<bos>", "<eos>", "<sep>",                                     //
      "0", "1", "2", "3", "4", "5", "6", "7", "8", "9",                       //
      "ring", "knock", "beep", "clap", "chirp",                                //
      "how", "many", "times", "does", "the", "phone", "sound", "count",       //
      "what", "is", "heard", "in", "this", "clip", "audio", "event", "events",  //
      "answer", ":", "?", "yes", "no", "first", "last", "which", "a", "of",   //
      "are", "there", "loud", "quiet", "after", "before", "hear", "you",      //
      "do", "did", "it", "kind", "type", "second", "happen", "question",      //
      "number", "silence"};
  return words;
}

const std::unordered_map<std::string_view, TokenId>& index() {
  static const auto map = [] {
    std::unordered_map<std::string_view, TokenId> m;
    const auto& words = table();
    for (std::size_t i = 0; i < words.size(); ++i) m.emplace(words[i], static_cast<TokenId>(i));
    return m;
  }();
  return map;
}

}  // namespace

std::size_t size() { return table().size(); }

const std::string& token_text(TokenId id) {
  if (id < 0 || static_cast<std::size_t>(id) >= table().size())
    throw std::invalid_argument("token id " + std::to_string(id) + " outside vocabulary");
  return table()[static_cast<std::size_t>(id)];
}

bool contains(std::string_view word) { return index().contains(word); }

TokenId token_id(std::string_view word) {
  const auto it = index().find(word);
  if (it == index().end()) throw std::invalid_argument("unknown word '" + std::string(word) + "'");
  return it->second;
}

std::vector<TokenId> tokenize(std::string_view text) {
  std::vector<TokenId> ids;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto start = text.find_first_not_of(" \t\r\n", pos);
    if (start == std::string_view::npos) break;
    auto end = text.find_first_of(" \t\r\n", start);
    if (end == std::string_view::npos) end = text.size();
    ids.push_back(token_id(text.substr(start, end - start)));
    pos = end;
  }
  return ids;
}

std::string detokenize(std::span<const TokenId> ids) {
  std::string out;
  for (TokenId id : ids) {
    if (!out.empty()) out += ' ';
    out += token_text(id);
  }
  return out;
}

TokenId digit(int value) {
  if (value < 0 || value > 9) throw std::invalid_argument("digit token out of range");
  return kDigitZero + value;
}

}  // namespace tcd::vocab
