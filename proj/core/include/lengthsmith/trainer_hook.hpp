#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "lengthsmith/run_dir.hpp"

// The external fine-tuning boundary between macro-iterations.
namespace lengthsmith {

struct TrainerHookRequest {
  std::string command_template;
  std::filesystem::path generator_sft;
  std::filesystem::path extender_sft;
  std::int64_t iter = 0;
  std::filesystem::path work_dir;  // the iteration directory; the hook runs here
  Bindings current;                // models the iteration ran with
};

// POSIX single-quoting for interpolation into a shell command.
std::string shell_quote(std::string_view s);

// Substitutes {generator_sft} {extender_sft} {iter} {trainer_in} {trainer_out}
// (paths shell-quoted) into the template.
std::string render_hook_command(const TrainerHookRequest& req);

// Writes trainer_in.json, runs the command through /bin/sh with stdout and
// stderr captured to trainer_stdout.txt / trainer_stderr.txt, then reads
// trainer_out.json = {generator, extender}.
// Throws TrainerHookFailure on a nonzero exit or missing output, and
// SchemaViolation on a malformed trainer_out.json.
Bindings run_trainer_hook(const TrainerHookRequest& req);

std::string bindings_to_json(const Bindings& b);
Bindings bindings_from_json(std::string_view text);

}  // namespace lengthsmith
