#include "lengthsmith/text.hpp"

#include <cstdlib>

#include "lengthsmith/errors.hpp"

namespace lengthsmith::corpus {

namespace {

bool in(char32_t cp, char32_t lo, char32_t hi) { return cp >= lo && cp <= hi; }

// Separators that are neither whitespace nor counted: the CJK symbol block and
// fullwidth/vertical punctuation.
bool is_cjk_punct(char32_t cp) {
  if (in(cp, 0x3000, 0x303F)) return cp != 0x3005 && cp != 0x3006 && cp != 0x3007;
  return in(cp, 0xFF01, 0xFF0F) || in(cp, 0xFF1A, 0xFF20) ||
         in(cp, 0xFF3B, 0xFF40) || in(cp, 0xFF5B, 0xFF65) ||
         in(cp, 0xFE10, 0xFE1F) || in(cp, 0xFE30, 0xFE4F) || cp == 0x30FB;
}

bool is_punct_or_symbol(char32_t cp) {
  if (cp < 0x80) {
    return (cp >= 0x21 && cp <= 0x2F) || (cp >= 0x3A && cp <= 0x40) ||
           (cp >= 0x5B && cp <= 0x60) || (cp >= 0x7B && cp <= 0x7E);
  }
  if (in(cp, 0xA1, 0xBF)) return cp != 0xAA && cp != 0xB5 && cp != 0xBA;
  return cp == 0xD7 || cp == 0xF7 || in(cp, 0x2010, 0x205E) ||
         in(cp, 0x20A0, 0x20CF) || in(cp, 0x2190, 0x2BFF) || is_cjk_punct(cp);
}

bool is_separator(char32_t cp) { return is_space(cp) || is_cjk_punct(cp); }

bool is_ascii_terminal(char32_t cp) { return cp == U'.' || cp == U'!' || cp == U'?'; }

std::size_t last_non_space_char(const std::vector<Codepoint>& cps) {
  std::size_t end = cps.size();
  while (end > 0 && is_space(cps[end - 1].value)) --end;
  return end;  // one past the last non-space codepoint
}

// Boundaries strictly before the last non-space character.
std::vector<Boundary> interior_boundaries(std::string_view text,
                                          const std::vector<Codepoint>& cps) {
  const std::size_t limit = last_non_space_char(cps);
  std::vector<Boundary> out;
  for (const auto& b : sentence_boundaries(text)) {
    if (b.char_index < limit) out.push_back(b);
  }
  return out;
}

}  // namespace

std::vector<Codepoint> decode_utf8(std::string_view text) {
  std::vector<Codepoint> out;
  out.reserve(text.size());
  const auto* s = reinterpret_cast<const unsigned char*>(text.data());
  const std::size_t n = text.size();
  std::size_t i = 0;
  while (i < n) {
    const unsigned char c = s[i];
    char32_t cp = 0xFFFD;
    std::size_t len = 1;
    if (c < 0x80) {
      cp = c;
    } else if ((c >> 5) == 0x6 && i + 1 < n && (s[i + 1] & 0xC0) == 0x80) {
      cp = ((c & 0x1F) << 6) | (s[i + 1] & 0x3F);
      len = 2;
      if (cp < 0x80) cp = 0xFFFD;
    } else if ((c >> 4) == 0xE && i + 2 < n && (s[i + 1] & 0xC0) == 0x80 &&
               (s[i + 2] & 0xC0) == 0x80) {
      cp = ((c & 0x0F) << 12) | ((s[i + 1] & 0x3F) << 6) | (s[i + 2] & 0x3F);
      len = 3;
      if (cp < 0x800 || in(cp, 0xD800, 0xDFFF)) cp = 0xFFFD;
    } else if ((c >> 3) == 0x1E && i + 3 < n && (s[i + 1] & 0xC0) == 0x80 &&
               (s[i + 2] & 0xC0) == 0x80 && (s[i + 3] & 0xC0) == 0x80) {
      cp = ((c & 0x07) << 18) | ((s[i + 1] & 0x3F) << 12) |
           ((s[i + 2] & 0x3F) << 6) | (s[i + 3] & 0x3F);
      len = 4;
      if (cp < 0x10000 || cp > 0x10FFFF) cp = 0xFFFD;
    }
    out.push_back({cp, i, len});
    i += len;
  }
  return out;
}

void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

bool is_cjk_letter(char32_t cp) {
  return in(cp, 0x4E00, 0x9FFF) || in(cp, 0x3400, 0x4DBF) ||
         in(cp, 0xF900, 0xFAFF) || in(cp, 0x20000, 0x2FFFF) ||
         in(cp, 0x3040, 0x309F) || in(cp, 0x30A0, 0x30FA) ||
         in(cp, 0x30FC, 0x30FF) || in(cp, 0xAC00, 0xD7AF) ||
         in(cp, 0x1100, 0x11FF) || in(cp, 0x3130, 0x318F) ||
         cp == 0x3005 || cp == 0x3006 || cp == 0x3007;
}

bool is_latin_letter(char32_t cp) {
  if (cp < 0x80) return (cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z');
  return (in(cp, 0xC0, 0x24F) && cp != 0xD7 && cp != 0xF7) ||
         in(cp, 0x1E00, 0x1EFF);
}

bool is_space(char32_t cp) {
  return cp == ' ' || in(cp, 0x09, 0x0D) || cp == 0x85 || cp == 0xA0 ||
         cp == 0x1680 || in(cp, 0x2000, 0x200B) || cp == 0x2028 ||
         cp == 0x2029 || cp == 0x202F || cp == 0x205F || cp == 0x3000 ||
         cp == 0xFEFF;
}

bool is_terminal_punct(char32_t cp) {
  return is_ascii_terminal(cp) || cp == 0x3002 || cp == 0xFF01 || cp == 0xFF1F;
}

bool is_closing_mark(char32_t cp) {
  switch (cp) {
    case U'"':
    case U'\'':
    case U')':
    case U']':
    case 0x201D:  // ”
    case 0x2019:  // ’
    case 0x300D:  // 」
    case 0x300F:  // 』
    case 0xFF09:  // ）
      return true;
    default:
      return false;
  }
}

std::vector<std::string_view> tokenize_words(std::string_view text) {
  std::vector<std::string_view> tokens;
  const auto cps = decode_utf8(text);
  std::size_t run_start = 0;
  std::size_t run_end = 0;
  bool in_run = false;
  bool run_has_word_char = false;
  bool run_touches_cjk = false;

  auto flush = [&](bool next_is_cjk) {
    if (!in_run) return;
    // Punctuation-only runs glued to CJK text (quotes, ellipses) are markup,
    // not words; a standalone punctuation token like an en dash still counts.
    if (run_has_word_char || !(run_touches_cjk || next_is_cjk)) {
      tokens.push_back(text.substr(run_start, run_end - run_start));
    }
    in_run = false;
  };

  bool prev_cjk = false;
  for (const auto& cp : cps) {
    if (is_cjk_letter(cp.value)) {
      flush(true);
      tokens.push_back(text.substr(cp.offset, cp.size));
      prev_cjk = true;
      continue;
    }
    if (is_separator(cp.value)) {
      flush(false);
      prev_cjk = false;
      continue;
    }
    if (!in_run) {
      in_run = true;
      run_start = cp.offset;
      run_has_word_char = false;
      run_touches_cjk = prev_cjk;
    }
    run_end = cp.offset + cp.size;
    if (!is_punct_or_symbol(cp.value)) run_has_word_char = true;
    prev_cjk = false;
  }
  flush(false);
  return tokens;
}

std::size_t count_words(std::string_view text) { return tokenize_words(text).size(); }

std::vector<Boundary> sentence_boundaries(std::string_view text) {
  std::vector<Boundary> out;
  const auto cps = decode_utf8(text);
  const std::size_t n = cps.size();
  std::size_t i = 0;
  while (i < n) {
    if (!is_terminal_punct(cps[i].value)) {
      ++i;
      continue;
    }
    bool ascii_only = true;
    std::size_t j = i;
    while (j < n && is_terminal_punct(cps[j].value)) {
      if (!is_ascii_terminal(cps[j].value)) ascii_only = false;
      ++j;
    }
    while (j < n && is_closing_mark(cps[j].value)) ++j;
    const bool at_end = j == n;
    if (!ascii_only || at_end || is_space(cps[j].value) ||
        is_cjk_letter(cps[j].value) || is_cjk_punct(cps[j].value)) {
      const std::size_t offset = at_end ? text.size() : cps[j].offset;
      out.push_back({offset, j});
    }
    i = j > i ? j : i + 1;
  }
  return out;
}

SplitHalves split_half_at_punct(std::string_view text) {
  const auto cps = decode_utf8(text);
  const auto candidates = interior_boundaries(text, cps);
  if (candidates.empty()) {
    throw NoSplitPoint("no sentence boundary before the end of the text");
  }
  const long long n = static_cast<long long>(cps.size());
  const Boundary* best = nullptr;
  long long best_dist = 0;
  for (const auto& b : candidates) {
    const long long dist = std::llabs(2 * static_cast<long long>(b.char_index) - n);
    if (best == nullptr || dist < best_dist) {
      best = &b;
      best_dist = dist;
    }
  }
  return {std::string(text.substr(0, best->byte_offset)),
          std::string(text.substr(best->byte_offset))};
}

std::string truncate_two_thirds(std::string_view text) {
  const auto cps = decode_utf8(text);
  const auto candidates = interior_boundaries(text, cps);
  const long long n = static_cast<long long>(cps.size());
  if (!candidates.empty()) {
    const Boundary* best = nullptr;
    long long best_dist = 0;
    for (const auto& b : candidates) {
      const long long dist =
          std::llabs(3 * static_cast<long long>(b.char_index) - 2 * n);
      if (best == nullptr || dist < best_dist) {
        best = &b;
        best_dist = dist;
      }
    }
    return std::string(text.substr(0, best->byte_offset));
  }
  // No usable boundary: cut the raw two-thirds prefix back to whitespace.
  const std::size_t cut_chars = static_cast<std::size_t>((2 * n) / 3);
  std::size_t cut = cut_chars;
  while (cut > 0 && !is_space(cps[cut].value)) --cut;
  while (cut > 0 && is_space(cps[cut - 1].value)) --cut;
  if (cut == 0) return std::string(text);
  return std::string(text.substr(0, cps[cut].offset));
}

std::vector<std::string_view> split_sentences(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (const auto& b : sentence_boundaries(text)) {
    if (b.byte_offset > start) out.push_back(text.substr(start, b.byte_offset - start));
    start = b.byte_offset;
  }
  if (start < text.size()) out.push_back(text.substr(start));
  return out;
}

bool ends_with_terminal_punct(std::string_view text) {
  const auto cps = decode_utf8(trim_right(text));
  std::size_t end = cps.size();
  while (end > 0 && is_closing_mark(cps[end - 1].value)) --end;
  return end > 0 && is_terminal_punct(cps[end - 1].value);
}

ScriptCounts count_script_letters(std::string_view text) {
  ScriptCounts counts;
  for (const auto& cp : decode_utf8(text)) {
    if (is_latin_letter(cp.value)) {
      ++counts.latin;
    } else if (is_cjk_letter(cp.value)) {
      ++counts.cjk;
    }
  }
  return counts;
}

Script dominant_script(std::string_view text) {
  const auto counts = count_script_letters(text);
  if (counts.latin == 0 && counts.cjk == 0) return Script::none;
  return counts.latin >= counts.cjk ? Script::latin : Script::cjk;
}

std::string_view trim_left(std::string_view text) {
  const auto cps = decode_utf8(text);
  for (const auto& cp : cps) {
    if (!is_space(cp.value)) return text.substr(cp.offset);
  }
  return text.substr(text.size());
}

std::string_view trim_right(std::string_view text) {
  const auto cps = decode_utf8(text);
  for (auto it = cps.rbegin(); it != cps.rend(); ++it) {
    if (!is_space(it->value)) return text.substr(0, it->offset + it->size);
  }
  return text.substr(0, 0);
}

std::string_view trim(std::string_view text) { return trim_right(trim_left(text)); }

}  // namespace lengthsmith::corpus
