#include "lengthsmith/trainer_hook.hpp"

#include <sys/wait.h>

#include <cstdlib>

#include <spdlog/spdlog.h>

#include "json_util.hpp"
#include "lengthsmith/errors.hpp"
#include "lengthsmith/jsonl.hpp"
#include "lengthsmith/prompts.hpp"

namespace lengthsmith {

std::string shell_quote(std::string_view s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') {
      out += "'\\''";
    } else {
      out += c;
    }
  }
  out += '\'';
  return out;
}

std::string render_hook_command(const TrainerHookRequest& req) {
  return prompts::render(req.command_template,
                         {{"generator_sft", shell_quote(req.generator_sft.string())},
                          {"extender_sft", shell_quote(req.extender_sft.string())},
                          {"iter", std::to_string(req.iter)},
                          {"trainer_in", shell_quote((req.work_dir / "trainer_in.json").string())},
                          {"trainer_out", shell_quote((req.work_dir / "trainer_out.json").string())}});
}

std::string bindings_to_json(const Bindings& b) {
  detail::ordered_json j;
  j["generator"] = detail::profile_to_json_value(b.generator);
  j["extender"] = detail::profile_to_json_value(b.extender);
  return j.dump(2) + "\n";
}

Bindings bindings_from_json(std::string_view text) {
  const auto j = detail::parse_json(text);
  detail::ObjectReader r(j, "$");
  r.allow("schema_version");
  Bindings b;
  b.generator = detail::profile_from_json_value(r.object("generator"), r.child("generator"));
  b.extender = detail::profile_from_json_value(r.object("extender"), r.child("extender"));
  r.finish();
  return b;
}

Bindings run_trainer_hook(const TrainerHookRequest& req) {
  const auto in_path = req.work_dir / "trainer_in.json";
  const auto out_path = req.work_dir / "trainer_out.json";
  const auto err_path = req.work_dir / "trainer_stderr.txt";

  detail::ordered_json in;
  in["schema_version"] = std::string(kSchemaVersion);
  in["iter"] = req.iter;
  in["generator_sft"] = req.generator_sft.string();
  in["extender_sft"] = req.extender_sft.string();
  in["warm_start_from"] = req.current.generator.model;
  in["generator"] = detail::profile_to_json_value(req.current.generator);
  in["extender"] = detail::profile_to_json_value(req.current.extender);
  write_file_atomic(in_path, in.dump(2) + "\n");
  std::filesystem::remove(out_path);

  const std::string command = render_hook_command(req);
  const std::string wrapped = "cd " + shell_quote(req.work_dir.string()) + " && { " + command +
                              "\n} >" + shell_quote((req.work_dir / "trainer_stdout.txt").string()) +
                              " 2>" + shell_quote(err_path.string());
  spdlog::info("iteration {}: running trainer hook: {}", req.iter, command);
  const int status = std::system(wrapped.c_str());

  auto captured = [&] {
    try {
      return read_file(err_path);
    } catch (const std::exception&) {
      return std::string();
    }
  };
  if (status == -1) throw TrainerHookFailure("could not start the trainer hook", captured());
  if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
    const int code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    throw TrainerHookFailure("trainer hook exited with status " + std::to_string(code), captured());
  }
  if (!std::filesystem::exists(out_path)) {
    throw TrainerHookFailure("trainer hook did not write " + out_path.string(), captured());
  }
  return bindings_from_json(read_file(out_path));
}

}  // namespace lengthsmith
