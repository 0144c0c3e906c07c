// Reads trainer_in.json and writes trainer_out.json with "trained" models:
// mock generators move their mean length toward the mean length of their SFT
// data, mock extenders grow their expansion factor, and HTTP profiles get a
// new model name per iteration.

#include <cmath>
#include <iostream>
#include <regex>

#include "CLI11.hpp"
#include "json.hpp"
#include "lengthsmith/backend.hpp"
#include "lengthsmith/jsonl.hpp"
#include "lengthsmith/sftgen.hpp"
#include "lengthsmith/text.hpp"
#include "lengthsmith/trainer_hook.hpp"

namespace {

using lengthsmith::backend::BackendKind;
using lengthsmith::backend::BackendProfile;

std::string next_model_name(const std::string& model, std::int64_t iter) {
  static const std::regex suffix("-it[0-9]+$");
  return std::regex_replace(model, suffix, "") + "-it" + std::to_string(iter + 1);
}

double mean_assistant_words(const std::string& path) {
  const auto examples = lengthsmith::read_jsonl<lengthsmith::sftgen::SftExample>(path);
  if (examples.empty()) return std::nan("");
  double sum = 0.0;
  for (const auto& e : examples) {
    sum += static_cast<double>(lengthsmith::corpus::count_words(e.messages.back().content));
  }
  return sum / static_cast<double>(examples.size());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mock trainer hook for lengthsmith runs"};
  std::string in_path = "trainer_in.json";
  std::string out_path = "trainer_out.json";
  double lambda = 0.5;
  double factor_step = 0.25;
  app.add_option("--in", in_path, "trainer_in.json written by the pipeline");
  app.add_option("--out", out_path, "where to write trainer_out.json");
  app.add_option("--lambda", lambda, "fraction of the gap to the SFT mean length closed per iteration")
      ->check(CLI::Range(0.0, 1.0));
  app.add_option("--factor-step", factor_step, "increase of the mock extension factor per iteration");
  CLI11_PARSE(app, argc, argv);

  try {
    const auto in = nlohmann::json::parse(lengthsmith::read_file(in_path));
    const auto iter = in.at("iter").get<std::int64_t>();
    lengthsmith::Bindings b;
    b.generator = lengthsmith::backend::profile_from_json(in.at("generator").dump(), "$.generator");
    b.extender = lengthsmith::backend::profile_from_json(in.at("extender").dump(), "$.extender");

    const double target = mean_assistant_words(in.at("generator_sft").get<std::string>());
    for (BackendProfile* p : {&b.generator, &b.extender}) {
      if (p->kind == BackendKind::http) p->model = next_model_name(p->model, iter);
    }
    if (b.generator.kind == BackendKind::mock && !std::isnan(target)) {
      const double prev = static_cast<double>(b.generator.mock.target_words);
      b.generator.mock.target_words = std::llround(prev + lambda * (target - prev));
    }
    if (b.extender.kind == BackendKind::mock) b.extender.mock.extend_factor += factor_step;

    lengthsmith::write_file_atomic(out_path, lengthsmith::bindings_to_json(b));
    std::cerr << "iteration " << iter << ": generator target " << b.generator.mock.target_words
              << ", extender factor " << b.extender.mock.extend_factor << "\n";
  } catch (const std::exception& e) {
    std::cerr << "mock trainer: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
