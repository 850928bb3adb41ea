#include <cstdint>

#include "kdqa/corpus.hpp"

namespace kdqa {

namespace {

bool is_ascii_punct(unsigned char c) {
  return (c >= 33 && c <= 47) || (c >= 58 && c <= 64) || (c >= 91 && c <= 96) ||
         (c >= 123 && c <= 126);
}

bool is_space_codepoint(std::uint32_t cp) {
  return (cp >= 0x09 && cp <= 0x0D) || cp == 0x20 || cp == 0x85 || cp == 0xA0 ||
         cp == 0x1680 || (cp >= 0x2000 && cp <= 0x200A) || cp == 0x2028 || cp == 0x2029 ||
         cp == 0x202F || cp == 0x205F || cp == 0x3000;
}

// Decodes one UTF-8 sequence at `pos`; malformed bytes decode as themselves
// with length 1 (they are never whitespace).
std::pair<std::uint32_t, std::size_t> decode_utf8(std::string_view s, std::size_t pos) {
  const auto b0 = static_cast<unsigned char>(s[pos]);
  std::size_t len = 1;
  std::uint32_t cp = b0;
  if (b0 >= 0xC0 && b0 < 0xE0) {
    len = 2;
    cp = b0 & 0x1F;
  } else if (b0 >= 0xE0 && b0 < 0xF0) {
    len = 3;
    cp = b0 & 0x0F;
  } else if (b0 >= 0xF0 && b0 < 0xF8) {
    len = 4;
    cp = b0 & 0x07;
  } else {
    return {b0, 1};
  }
  if (pos + len > s.size()) return {0xFFFD, 1};
  for (std::size_t k = 1; k < len; ++k) {
    const auto b = static_cast<unsigned char>(s[pos + k]);
    if ((b & 0xC0) != 0x80) return {0xFFFD, 1};
    cp = (cp << 6) | (b & 0x3F);
  }
  return {cp, len};
}

char ascii_lower(char c) { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c; }

}  // namespace

std::vector<TokenOffset> tokenize_with_offsets(std::string_view text) {
  std::vector<TokenOffset> out;
  std::size_t pos = 0;
  auto flush = [&](std::size_t begin, std::size_t end) {
    while (begin < end && is_ascii_punct(static_cast<unsigned char>(text[begin]))) ++begin;
    while (end > begin && is_ascii_punct(static_cast<unsigned char>(text[end - 1]))) --end;
    if (begin == end) return;
    TokenOffset tok;
    tok.begin = begin;
    tok.end = end;
    tok.token.reserve(end - begin);
    for (std::size_t i = begin; i < end; ++i) tok.token.push_back(ascii_lower(text[i]));
    out.push_back(std::move(tok));
  };
  std::size_t piece_begin = 0;
  bool in_piece = false;
  while (pos < text.size()) {
    auto [cp, len] = decode_utf8(text, pos);
    if (is_space_codepoint(cp)) {
      if (in_piece) flush(piece_begin, pos);
      in_piece = false;
    } else if (!in_piece) {
      in_piece = true;
      piece_begin = pos;
    }
    pos += len;
  }
  if (in_piece) flush(piece_begin, text.size());
  return out;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  for (auto& t : tokenize_with_offsets(text)) out.push_back(std::move(t.token));
  return out;
}

std::string join_tokens(std::span<const std::string> tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

std::vector<std::string> split_spaces(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && text[i] == ' ') ++i;
    std::size_t j = i;
    while (j < text.size() && text[j] != ' ') ++j;
    if (j > i) out.emplace_back(text.substr(i, j - i));
    i = j;
  }
  return out;
}

}  // namespace kdqa
