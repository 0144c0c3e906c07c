#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

// Length accounting and segmentation over UTF-8 text.
//
// A "word" is either one CJK codepoint (Han, kana, Hangul) or one maximal run
// of other non-separator codepoints. Whitespace and CJK/fullwidth punctuation
// separate runs and are never counted. Character positions used by the
// splitting helpers are codepoint indices, not byte offsets.
namespace lengthsmith::corpus {

enum class Script { none, latin, cjk };

struct Codepoint {
  char32_t value;
  std::size_t offset;  // byte offset in the source string
  std::size_t size;    // encoded length in bytes
};

// Invalid sequences decode to U+FFFD one byte at a time.
std::vector<Codepoint> decode_utf8(std::string_view text);
void append_utf8(std::string& out, char32_t cp);

bool is_cjk_letter(char32_t cp);
bool is_latin_letter(char32_t cp);
bool is_space(char32_t cp);
bool is_terminal_punct(char32_t cp);
bool is_closing_mark(char32_t cp);

std::size_t count_words(std::string_view text);
std::vector<std::string_view> tokenize_words(std::string_view text);

// Byte offsets just past each sentence-terminal mark (plus any closing quotes
// or brackets that follow it). An ASCII '.', '!' or '?' only ends a sentence
// when followed by whitespace, a closing mark, or the end of the text, so
// "3.14" and "e.g.x" are not boundaries.
struct Boundary {
  std::size_t byte_offset;
  std::size_t char_index;
};
std::vector<Boundary> sentence_boundaries(std::string_view text);

struct SplitHalves {
  std::string first;
  std::string second;
};

// Throws NoSplitPoint when no boundary precedes the last non-space character.
SplitHalves split_half_at_punct(std::string_view text);

std::string truncate_two_thirds(std::string_view text);

// Splits into sentences, each keeping its leading separator text, so that
// concatenating the pieces restores the input.
std::vector<std::string_view> split_sentences(std::string_view text);

bool ends_with_terminal_punct(std::string_view text);

struct ScriptCounts {
  std::size_t latin = 0;
  std::size_t cjk = 0;
};
ScriptCounts count_script_letters(std::string_view text);
Script dominant_script(std::string_view text);

std::string_view trim(std::string_view text);
std::string_view trim_left(std::string_view text);
std::string_view trim_right(std::string_view text);

}  // namespace lengthsmith::corpus
