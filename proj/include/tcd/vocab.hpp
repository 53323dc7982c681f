#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace tcd {

using TokenId = std::int32_t;

/// Fixed 64-entry word-level vocabulary shared by the toy backends. Digits
/// and event-class names are single tokens so counting questions and their
/// answers are expressible.
namespace vocab {

inline constexpr TokenId kPad = 0;
inline constexpr TokenId kBos = 1;
inline constexpr TokenId kEos = 2;
inline constexpr TokenId kSep = 3;
inline constexpr TokenId kDigitZero = 4;

std::size_t size();
const std::string& token_text(TokenId id);
/// Throws std::invalid_argument for words outside the vocabulary.
TokenId token_id(std::string_view word);
bool contains(std::string_view word);

/// Whitespace tokenization; every word must be a vocabulary entry.
std::vector<TokenId> tokenize(std::string_view text);
std::string detokenize(std::span<const TokenId> ids);

TokenId digit(int value);

}  // namespace vocab
}  // namespace tcd
