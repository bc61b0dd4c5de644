#pragma once

#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace qrisk {

// Splits UTF-8 text on Unicode whitespace (runs collapse; no empty tokens).
std::vector<std::string> whitespace_tokens(std::string_view text);

// Pluggable tokenizer; the default counts whitespace_tokens.
using Tokenizer = std::function<std::vector<std::string>(std::string_view)>;
Tokenizer default_tokenizer();

// ASCII lowercase copy; non-ASCII bytes pass through.
std::string casefold(std::string_view text);

// casefold + trim + collapse whitespace runs to single spaces.
std::string normalize_ws(std::string_view text);

// Lowercased whitespace tokens with leading/trailing ASCII punctuation stripped.
// "Who founded Apple?" -> {"who", "founded", "apple"}
std::vector<std::string> content_tokens(std::string_view text);

bool contains_token(const std::vector<std::string>& tokens, std::string_view word);

// Case-insensitive substring search on whitespace-normalized text.
bool contains_phrase(std::string_view text, std::string_view phrase);

}  // namespace qrisk
