#include "qrisk/text.hpp"

#include <algorithm>
#include <cctype>

namespace qrisk {

namespace {

// Decodes one UTF-8 codepoint starting at i; advances i past it.
// Malformed bytes are treated as Latin-1 so tokenization stays total.
uint32_t next_codepoint(std::string_view s, size_t& i) {
  unsigned char b0 = static_cast<unsigned char>(s[i]);
  if (b0 < 0x80) {
    ++i;
    return b0;
  }
  int len = (b0 >= 0xF0) ? 4 : (b0 >= 0xE0) ? 3 : (b0 >= 0xC0) ? 2 : 1;
  if (len == 1 || i + len > s.size()) {
    ++i;
    return b0;
  }
  uint32_t cp = b0 & (0xFF >> (len + 1));
  for (int k = 1; k < len; ++k) {
    unsigned char bk = static_cast<unsigned char>(s[i + k]);
    if ((bk & 0xC0) != 0x80) {
      ++i;
      return b0;
    }
    cp = (cp << 6) | (bk & 0x3F);
  }
  i += len;
  return cp;
}

bool is_unicode_space(uint32_t cp) {
  switch (cp) {
    case 0x09: case 0x0A: case 0x0B: case 0x0C: case 0x0D: case 0x20:
    case 0x85: case 0xA0: case 0x1680: case 0x2028: case 0x2029:
    case 0x202F: case 0x205F: case 0x3000:
      return true;
    default:
      return cp >= 0x2000 && cp <= 0x200A;
  }
}

}  // namespace

std::vector<std::string> whitespace_tokens(std::string_view text) {
  std::vector<std::string> out;
  size_t i = 0;
  size_t start = 0;
  bool in_token = false;
  while (i < text.size()) {
    size_t at = i;
    uint32_t cp = next_codepoint(text, i);
    if (is_unicode_space(cp)) {
      if (in_token) {
        out.emplace_back(text.substr(start, at - start));
        in_token = false;
      }
    } else if (!in_token) {
      start = at;
      in_token = true;
    }
  }
  if (in_token) out.emplace_back(text.substr(start));
  return out;
}

Tokenizer default_tokenizer() {
  return [](std::string_view t) { return whitespace_tokens(t); };
}

std::string casefold(std::string_view text) {
  std::string out(text);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) {
    return static_cast<char>(std::tolower(c));
  });
  return out;
}

std::string normalize_ws(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  size_t i = 0;
  while (i < text.size()) {
    size_t at = i;
    uint32_t cp = next_codepoint(text, i);
    if (is_unicode_space(cp)) {
      pending_space = !out.empty();
    } else {
      if (pending_space) out.push_back(' ');
      pending_space = false;
      for (size_t k = at; k < i; ++k)
        out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(text[k]))));
    }
  }
  return out;
}

std::vector<std::string> content_tokens(std::string_view text) {
  std::vector<std::string> out;
  for (auto& tok : whitespace_tokens(text)) {
    size_t b = 0;
    size_t e = tok.size();
    auto is_punct = [](unsigned char c) { return std::ispunct(c) && c != '\''; };
    while (b < e && is_punct(static_cast<unsigned char>(tok[b]))) ++b;
    while (e > b && (is_punct(static_cast<unsigned char>(tok[e - 1])) ||
                     tok[e - 1] == '\'')) {
      if (tok[e - 1] == '\'' && e >= 2 &&
          std::isalpha(static_cast<unsigned char>(tok[e - 2])))
        break;  // keep trailing possessive-like apostrophes intact ("America's")
      --e;
    }
    if (b < e) out.push_back(casefold(tok.substr(b, e - b)));
  }
  return out;
}

bool contains_token(const std::vector<std::string>& tokens, std::string_view word) {
  return std::find(tokens.begin(), tokens.end(), word) != tokens.end();
}

bool contains_phrase(std::string_view text, std::string_view phrase) {
  return normalize_ws(text).find(normalize_ws(phrase)) != std::string::npos;
}

}  // namespace qrisk
