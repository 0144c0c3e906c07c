#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lengthsmith/records.hpp"

namespace lengthsmith {

inline constexpr std::string_view kSchemaVersion = "1";

// One JSON object per line: encode() never emits a newline, decode() rejects
// malformed JSON, unknown fields, a missing or wrong schema_version, and any
// broken record invariant, throwing SchemaViolation with the field path.
template <typename T>
struct JsonlCodec;

template <>
struct JsonlCodec<Instruction> {
  static std::string encode(const Instruction& v);
  static Instruction decode(std::string_view line);
};

template <>
struct JsonlCodec<ResponseRecord> {
  static std::string encode(const ResponseRecord& v);
  static ResponseRecord decode(std::string_view line);
};

template <typename T>
std::string to_jsonl(const T& v) {
  return JsonlCodec<T>::encode(v);
}

template <typename T>
T from_jsonl(std::string_view line) {
  return JsonlCodec<T>::decode(line);
}

// Writes to "<path>.tmp" and renames over the target.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);
std::string read_file(const std::filesystem::path& path);

// Nonempty lines of a file; blank lines are skipped.
std::vector<std::string> read_lines(const std::filesystem::path& path);

// Re-throws decode failures with the file name and line number prepended.
[[noreturn]] void rethrow_with_location(const std::filesystem::path& path,
                                        std::size_t line_no);

template <typename T>
std::vector<T> read_jsonl(const std::filesystem::path& path) {
  std::vector<T> out;
  std::size_t line_no = 0;
  for (const auto& line : read_lines(path)) {
    ++line_no;
    try {
      out.push_back(JsonlCodec<T>::decode(line));
    } catch (...) {
      rethrow_with_location(path, line_no);
    }
  }
  return out;
}

template <typename T>
void write_jsonl(const std::filesystem::path& path, std::span<const T> records) {
  std::string content;
  for (const auto& r : records) {
    content += JsonlCodec<T>::encode(r);
    content += '\n';
  }
  write_file_atomic(path, content);
}

template <typename T>
void write_jsonl(const std::filesystem::path& path, const std::vector<T>& records) {
  write_jsonl(path, std::span<const T>(records));
}

}  // namespace lengthsmith
