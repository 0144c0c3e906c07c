#include "lengthsmith/prompts.hpp"

#include <cctype>
#include <initializer_list>
#include <utility>
#include <vector>

#include "lengthsmith/errors.hpp"
#include "lengthsmith/jsonl.hpp"

namespace lengthsmith::prompts {

namespace detail {
extern const char* const k_self_instruct_txt;
extern const char* const k_self_instruct_zh_txt;
extern const char* const k_validate_txt;
extern const char* const k_extend_txt;
extern const char* const k_extend_stage2_txt;
extern const char* const k_rephrase_txt;
extern const char* const k_judge_quality_txt;
extern const char* const k_judge_pairwise_txt;
}  // namespace detail

namespace {

bool is_ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_';
}

struct Field {
  std::string PromptSet::*member;
  const char* file;
  std::vector<const char*> placeholders;
};

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      {&PromptSet::self_instruct, "self_instruct.txt", {"prompt1", "prompt2"}},
      {&PromptSet::self_instruct_zh, "self_instruct_zh.txt", {"prompt1", "prompt2"}},
      {&PromptSet::validate, "validate.txt", {"instruction"}},
      {&PromptSet::extend, "extend.txt", {"prompt", "initial_response"}},
      {&PromptSet::extend_stage2, "extend_stage2.txt", {"prompt", "initial_response", "draft"}},
      {&PromptSet::rephrase, "rephrase.txt", {"instruction", "constraint"}},
      {&PromptSet::judge_quality, "judge_quality.txt", {"instruction", "response"}},
      {&PromptSet::judge_pairwise, "judge_pairwise.txt",
       {"instruction", "response_1", "response_2"}},
  };
  return table;
}

}  // namespace

std::string render(std::string_view tmpl, const std::map<std::string, std::string>& slots) {
  std::string out;
  out.reserve(tmpl.size());
  std::size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl[i] == '{') {
      std::size_t j = i + 1;
      while (j < tmpl.size() && is_ident_char(tmpl[j])) ++j;
      if (j < tmpl.size() && tmpl[j] == '}' && j > i + 1) {
        auto it = slots.find(std::string(tmpl.substr(i + 1, j - i - 1)));
        if (it != slots.end()) {
          out += it->second;
          i = j + 1;
          continue;
        }
      }
    }
    out.push_back(tmpl[i]);
    ++i;
  }
  return out;
}

bool has_placeholder(std::string_view tmpl, std::string_view name) {
  const std::string needle = "{" + std::string(name) + "}";
  return tmpl.find(needle) != std::string_view::npos;
}

PromptSet PromptSet::defaults() {
  PromptSet p;
  p.self_instruct = detail::k_self_instruct_txt;
  p.self_instruct_zh = detail::k_self_instruct_zh_txt;
  p.validate = detail::k_validate_txt;
  p.extend = detail::k_extend_txt;
  p.extend_stage2 = detail::k_extend_stage2_txt;
  p.rephrase = detail::k_rephrase_txt;
  p.judge_quality = detail::k_judge_quality_txt;
  p.judge_pairwise = detail::k_judge_pairwise_txt;
  return p;
}

PromptSet PromptSet::from_directory(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw Error(ErrorCode::Config, "prompt directory not found: " + dir.string());
  }
  PromptSet p = defaults();
  for (const auto& f : fields()) {
    const auto path = dir / f.file;
    if (std::filesystem::exists(path)) p.*(f.member) = read_file(path);
  }
  p.validate_placeholders();
  return p;
}

void PromptSet::validate_placeholders() const {
  for (const auto& f : fields()) {
    for (const char* name : f.placeholders) {
      if (!has_placeholder(this->*(f.member), name)) {
        throw Error(ErrorCode::Config, std::string("prompt template ") + f.file +
                                           " is missing the {" + name + "} placeholder");
      }
    }
  }
}

}  // namespace lengthsmith::prompts
