#pragma once

// Strict JSON object reading shared by every record codec. Not installed.

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "lengthsmith/backend.hpp"
#include "lengthsmith/errors.hpp"
#include "lengthsmith/records.hpp"

namespace lengthsmith::detail {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

json parse_json(std::string_view text, const std::string& path = "$");

class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path);

  const std::string& path() const { return path_; }
  std::string child(std::string_view key) const { return path_ + "." + std::string(key); }

  bool has(std::string_view key) const;  // present and not null

  std::string str(std::string_view key);
  std::optional<std::string> opt_str(std::string_view key);
  std::int64_t integer(std::string_view key);
  std::optional<std::int64_t> opt_integer(std::string_view key);
  double number(std::string_view key);
  std::optional<double> opt_number(std::string_view key);
  bool boolean(std::string_view key);
  std::optional<bool> opt_boolean(std::string_view key);
  const json& object(std::string_view key);
  const json* opt_object(std::string_view key);
  const json& array(std::string_view key);
  std::vector<std::string> str_array(std::string_view key);

  // Requires schema_version == "1".
  void schema_version();
  // Marks a key as known without reading it.
  void allow(std::string_view key);
  // Throws on any key that was not read or allowed.
  void finish() const;

 private:
  const json& get(std::string_view key);
  const json* find(std::string_view key);

  const json& j_;
  std::string path_;
  std::set<std::string, std::less<>> seen_;
};

[[noreturn]] void violation(const std::string& path, const std::string& message);

template <typename E, typename Parse>
E parse_enum(const std::string& path, const std::string& value, Parse parse) {
  auto v = parse(value);
  if (!v) violation(path, "unknown value '" + value + "'");
  return *v;
}

// Throws SchemaViolation at `path` when `problem` is nonempty.
void require_ok(const std::string& path, const std::string& problem);

ordered_json constraint_to_json(const LengthConstraint& c);
LengthConstraint constraint_from_json(const json& j, const std::string& path);

ordered_json instruction_to_json(const Instruction& v);
Instruction instruction_from_json(const json& j, const std::string& path, bool require_version);

ordered_json profile_to_json_value(const backend::BackendProfile& p);
backend::BackendProfile profile_from_json_value(const json& j, const std::string& path);

std::string dump(const ordered_json& j);

}  // namespace lengthsmith::detail
