#include "lengthsmith/jsonl.hpp"

#include <fstream>
#include <sstream>
#include <system_error>

#include "json_util.hpp"

namespace lengthsmith {

namespace detail {

json parse_json(std::string_view text, const std::string& path) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    violation(path, std::string("malformed JSON: ") + e.what());
  }
}

void violation(const std::string& path, const std::string& message) {
  throw SchemaViolation(path, message);
}

void require_ok(const std::string& path, const std::string& problem) {
  if (!problem.empty()) violation(path, problem);
}

ObjectReader::ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
  if (!j_.is_object()) violation(path_, "expected an object");
}

const json* ObjectReader::find(std::string_view key) {
  seen_.insert(std::string(key));
  auto it = j_.find(key);
  if (it == j_.end() || it->is_null()) return nullptr;
  return &*it;
}

const json& ObjectReader::get(std::string_view key) {
  const json* v = find(key);
  if (v == nullptr) violation(child(key), "missing required field");
  return *v;
}

bool ObjectReader::has(std::string_view key) const {
  auto it = j_.find(key);
  return it != j_.end() && !it->is_null();
}

std::string ObjectReader::str(std::string_view key) {
  const json& v = get(key);
  if (!v.is_string()) violation(child(key), "expected a string");
  return v.get<std::string>();
}

std::optional<std::string> ObjectReader::opt_str(std::string_view key) {
  if (!has(key)) {
    allow(key);
    return std::nullopt;
  }
  return str(key);
}

std::int64_t ObjectReader::integer(std::string_view key) {
  const json& v = get(key);
  if (!v.is_number_integer()) violation(child(key), "expected an integer");
  if (v.is_number_unsigned() && v.get<std::uint64_t>() > static_cast<std::uint64_t>(INT64_MAX)) {
    violation(child(key), "integer out of range");
  }
  return v.get<std::int64_t>();
}

std::optional<std::int64_t> ObjectReader::opt_integer(std::string_view key) {
  if (!has(key)) {
    allow(key);
    return std::nullopt;
  }
  return integer(key);
}

double ObjectReader::number(std::string_view key) {
  const json& v = get(key);
  if (!v.is_number()) violation(child(key), "expected a number");
  return v.get<double>();
}

std::optional<double> ObjectReader::opt_number(std::string_view key) {
  if (!has(key)) {
    allow(key);
    return std::nullopt;
  }
  return number(key);
}

bool ObjectReader::boolean(std::string_view key) {
  const json& v = get(key);
  if (!v.is_boolean()) violation(child(key), "expected a boolean");
  return v.get<bool>();
}

std::optional<bool> ObjectReader::opt_boolean(std::string_view key) {
  if (!has(key)) {
    allow(key);
    return std::nullopt;
  }
  return boolean(key);
}

const json& ObjectReader::object(std::string_view key) {
  const json& v = get(key);
  if (!v.is_object()) violation(child(key), "expected an object");
  return v;
}

const json* ObjectReader::opt_object(std::string_view key) {
  const json* v = find(key);
  if (v != nullptr && !v->is_object()) violation(child(key), "expected an object");
  return v;
}

const json& ObjectReader::array(std::string_view key) {
  const json& v = get(key);
  if (!v.is_array()) violation(child(key), "expected an array");
  return v;
}

std::vector<std::string> ObjectReader::str_array(std::string_view key) {
  const json& arr = array(key);
  std::vector<std::string> out;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    if (!arr[i].is_string()) {
      violation(child(key) + "[" + std::to_string(i) + "]", "expected a string");
    }
    out.push_back(arr[i].get<std::string>());
  }
  return out;
}

void ObjectReader::schema_version() {
  const std::string v = str("schema_version");
  if (v != kSchemaVersion) violation(child("schema_version"), "unsupported schema_version '" + v + "'");
}

void ObjectReader::allow(std::string_view key) { seen_.insert(std::string(key)); }

void ObjectReader::finish() const {
  for (auto it = j_.begin(); it != j_.end(); ++it) {
    if (!seen_.contains(it.key())) violation(child(it.key()), "unknown field");
  }
}

std::string dump(const ordered_json& j) {
  return j.dump(-1, ' ', false, json::error_handler_t::replace);
}

ordered_json constraint_to_json(const LengthConstraint& c) {
  ordered_json j;
  j["kind"] = std::string(to_string(c.kind));
  if (c.kind == ConstraintKind::range) {
    j["x1"] = c.x1;
    j["x2"] = c.x2;
  } else {
    j["x"] = c.x;
  }
  return j;
}

LengthConstraint constraint_from_json(const json& j, const std::string& path) {
  ObjectReader r(j, path);
  LengthConstraint c;
  c.kind = parse_enum<ConstraintKind>(r.child("kind"), r.str("kind"), parse_constraint_kind);
  if (c.kind == ConstraintKind::range) {
    c.x1 = r.integer("x1");
    c.x2 = r.integer("x2");
  } else {
    c.x = r.integer("x");
  }
  r.finish();
  require_ok(path, check_invariants(c));
  return c;
}

ordered_json instruction_to_json(const Instruction& v) {
  ordered_json j;
  j["schema_version"] = std::string(kSchemaVersion);
  j["id"] = v.id;
  j["text"] = v.text;
  j["language"] = std::string(to_string(v.language));
  j["source"] = std::string(to_string(v.source));
  j["parents"] = v.parents;
  if (v.constraint) j["constraint"] = constraint_to_json(*v.constraint);
  j["created_at_iter"] = v.created_at_iter;
  return j;
}

Instruction instruction_from_json(const json& j, const std::string& path, bool require_version) {
  ObjectReader r(j, path);
  if (require_version) {
    r.schema_version();
  } else {
    r.allow("schema_version");
  }
  Instruction v;
  v.id = r.str("id");
  v.text = r.str("text");
  v.language = parse_enum<Language>(r.child("language"), r.str("language"), parse_language);
  v.source = parse_enum<InstructionSource>(r.child("source"), r.str("source"),
                                           parse_instruction_source);
  v.parents = r.str_array("parents");
  if (const json* c = r.opt_object("constraint")) {
    v.constraint = constraint_from_json(*c, r.child("constraint"));
  }
  v.created_at_iter = r.integer("created_at_iter");
  r.finish();
  require_ok(path, check_invariants(v));
  return v;
}

}  // namespace detail

using detail::json;
using detail::ObjectReader;
using detail::ordered_json;

std::string JsonlCodec<Instruction>::encode(const Instruction& v) {
  return detail::dump(detail::instruction_to_json(v));
}

Instruction JsonlCodec<Instruction>::decode(std::string_view line) {
  return detail::instruction_from_json(detail::parse_json(line), "$", true);
}

std::string JsonlCodec<ResponseRecord>::encode(const ResponseRecord& v) {
  ordered_json j;
  j["schema_version"] = std::string(kSchemaVersion);
  j["id"] = v.id;
  j["instruction_id"] = v.instruction_id;
  j["text"] = v.text;
  j["length_words"] = v.length_words;
  j["macro_iter"] = v.macro_iter;
  j["micro_iter"] = v.micro_iter;
  if (v.parent_response_id) j["parent_response_id"] = *v.parent_response_id;
  j["role"] = std::string(to_string(v.role));
  if (v.filter_verdict) {
    ordered_json fv;
    fv["passed"] = v.filter_verdict->passed;
    fv["failed_rules"] = json::array();
    for (auto rule : v.filter_verdict->failed_rules) {
      fv["failed_rules"].push_back(std::string(to_string(rule)));
    }
    fv["dropped_by_sampler"] = v.filter_verdict->dropped_by_sampler;
    j["filter_verdict"] = fv;
  }
  return detail::dump(j);
}

ResponseRecord JsonlCodec<ResponseRecord>::decode(std::string_view line) {
  const json j = detail::parse_json(line);
  ObjectReader r(j, "$");
  r.schema_version();
  ResponseRecord v;
  v.id = r.str("id");
  v.instruction_id = r.str("instruction_id");
  v.text = r.str("text");
  v.length_words = r.integer("length_words");
  if (v.length_words < 0) detail::violation(r.child("length_words"), "must be non-negative");
  v.macro_iter = r.integer("macro_iter");
  v.micro_iter = r.integer("micro_iter");
  v.parent_response_id = r.opt_str("parent_response_id");
  v.role = detail::parse_enum<ResponseRole>(r.child("role"), r.str("role"), parse_response_role);
  if (const json* fv = r.opt_object("filter_verdict")) {
    const std::string path = r.child("filter_verdict");
    ObjectReader fr(*fv, path);
    FilterVerdict verdict;
    verdict.passed = fr.boolean("passed");
    const auto rules = fr.str_array("failed_rules");
    for (std::size_t i = 0; i < rules.size(); ++i) {
      verdict.failed_rules.push_back(detail::parse_enum<FilterRule>(
          fr.child("failed_rules") + "[" + std::to_string(i) + "]", rules[i], parse_filter_rule));
    }
    verdict.dropped_by_sampler = fr.boolean("dropped_by_sampler");
    fr.finish();
    detail::require_ok(path, check_invariants(verdict));
    v.filter_verdict = verdict;
  }
  r.finish();
  detail::require_ok("$", check_invariants(v));
  return v;
}

void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot open " + tmp.string() + " for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw Error(ErrorCode::Io, "write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::Io, "rename to " + path.string() + " failed: " + ec.message());
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  const std::string content = read_file(path);
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start <= content.size()) {
    std::size_t end = content.find('\n', start);
    if (end == std::string::npos) end = content.size();
    std::string line = content.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") != std::string::npos) lines.push_back(std::move(line));
    start = end + 1;
  }
  return lines;
}

void rethrow_with_location(const std::filesystem::path& path, std::size_t line_no) {
  const std::string where = path.string() + ":" + std::to_string(line_no);
  try {
    throw;
  } catch (const SchemaViolation& e) {
    throw SchemaViolation(e.path(), where + ": " + e.what());
  }
}

}  // namespace lengthsmith
