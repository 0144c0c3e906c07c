#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>

namespace lengthsmith::prompts {

// Substitutes {name} placeholders in one left-to-right pass. Placeholders
// without a value and any other braces are left untouched, and substituted
// text is never rescanned.
std::string render(std::string_view tmpl, const std::map<std::string, std::string>& slots);

bool has_placeholder(std::string_view tmpl, std::string_view name);

struct PromptSet {
  std::string self_instruct;     // {prompt1} {prompt2}
  std::string self_instruct_zh;  // {prompt1} {prompt2}
  std::string validate;          // {instruction}
  std::string extend;            // {prompt} {initial_response}
  std::string extend_stage2;     // {prompt} {initial_response} {draft}
  std::string rephrase;          // {instruction} {constraint}
  std::string judge_quality;     // {instruction} {response}
  std::string judge_pairwise;    // {instruction} {response_1} {response_2}

  // The assets compiled in from prompts/.
  static PromptSet defaults();

  // Files in `dir` named like the defaults (self_instruct.txt, ...) replace the
  // compiled-in text; missing files keep the default.
  static PromptSet from_directory(const std::filesystem::path& dir);

  // Throws Error(Config) naming the first template that lacks a placeholder.
  void validate_placeholders() const;
};

}  // namespace lengthsmith::prompts
