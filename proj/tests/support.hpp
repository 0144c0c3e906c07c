#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <string>
#include <vector>

#include "lengthsmith/backend.hpp"
#include "lengthsmith/config.hpp"
#include "lengthsmith/jsonl.hpp"
#include "lengthsmith/mock_backend.hpp"
#include "lengthsmith/records.hpp"

namespace lstest {

namespace fs = std::filesystem;

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "t") {
    static std::atomic<int> counter{0};
    std::random_device rd;
    path_ = fs::temp_directory_path() /
            ("lengthsmith-" + tag + "-" + std::to_string(rd()) + "-" + std::to_string(counter++));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

inline std::string fixture(const std::string& name) {
  return lengthsmith::read_file(fs::path(LENGTHSMITH_FIXTURE_DIR) / name);
}

// Deterministic generator for property tests.
class Gen {
 public:
  explicit Gen(std::uint64_t seed) : eng_(seed) {}

  std::int64_t range(std::int64_t lo, std::int64_t hi) {
    return std::uniform_int_distribution<std::int64_t>(lo, hi)(eng_);
  }
  double unit() { return std::uniform_real_distribution<double>(0.0, 1.0)(eng_); }
  bool coin(double p = 0.5) { return unit() < p; }
  template <typename T>
  const T& pick(const std::vector<T>& v) {
    return v[static_cast<std::size_t>(range(0, static_cast<std::int64_t>(v.size()) - 1))];
  }

  std::string latin_word() {
    static const std::vector<std::string> words = {
        "amber", "river", "stone", "quiet", "lantern", "orbit", "meadow", "copper",
        "signal", "harbor", "velvet", "thunder", "maple", "cinder", "glacier", "pepper"};
    return pick(words);
  }

  std::string han_char() {
    static const std::vector<std::string> chars = {"山", "水", "风", "花", "月", "书",
                                                 "城", "海", "光", "路", "雨", "心"};
    return pick(chars);
  }

  // Sentences of random words joined by random whitespace, ending in '.'.
  std::string english_text(std::int64_t min_words, std::int64_t max_words) {
    const auto n = range(min_words, max_words);
    std::string out;
    for (std::int64_t i = 0; i < n; ++i) {
      if (i > 0) out += pick(std::vector<std::string>{" ", " ", " ", "\n", "  ", "\t"});
      out += latin_word();
      if (coin(0.15)) out += pick(std::vector<std::string>{".", ",", "!", "?"});
    }
    if (!out.empty()) out += ".";
    return out;
  }

  std::string chinese_text(std::int64_t min_chars, std::int64_t max_chars) {
    const auto n = range(min_chars, max_chars);
    std::string out;
    for (std::int64_t i = 0; i < n; ++i) {
      out += han_char();
      if (coin(0.12)) out += pick(std::vector<std::string>{"，", "。", "！", "？"});
    }
    out += "。";
    return out;
  }

  std::mt19937_64& engine() { return eng_; }

 private:
  std::mt19937_64 eng_;
};

inline lengthsmith::backend::BackendProfile mock_profile(lengthsmith::backend::RoleTag role,
                                                        std::uint64_t seed = 1) {
  auto p = lengthsmith::backend::default_profile(role);
  p.kind = lengthsmith::backend::BackendKind::mock;
  p.name = std::string(lengthsmith::backend::to_string(role));
  p.model = "mock-" + p.name;
  p.mock.seed = seed;
  return p;
}

inline lengthsmith::Instruction instruction(const std::string& id, const std::string& text,
                                            lengthsmith::Language lang = lengthsmith::Language::en) {
  lengthsmith::Instruction i;
  i.id = id;
  i.text = text;
  i.language = lang;
  return i;
}

// Writes n seed instructions (alternating en / zh) and returns the path.
inline fs::path write_seeds(const fs::path& dir, std::size_t n) {
  std::vector<lengthsmith::Instruction> seeds;
  for (std::size_t i = 0; i < n; ++i) {
    const bool zh = i % 2 == 1;
    seeds.push_back(instruction(
        "s" + std::to_string(i),
        zh ? "请写一篇关于第" + std::to_string(i) + "座城市的详细介绍。"
           : "Write a detailed essay about topic number " + std::to_string(i) + " and its history.",
        zh ? lengthsmith::Language::zh : lengthsmith::Language::en));
  }
  auto path = dir / "seeds.jsonl";
  lengthsmith::write_jsonl(path, seeds);
  return path;
}

// All-mock config over `n_seeds` generated seeds, small enough for unit tests.
inline lengthsmith::PipelineConfig small_config(const fs::path& dir, std::size_t n_seeds = 8) {
  using lengthsmith::backend::RoleTag;
  lengthsmith::PipelineConfig c;
  c.seed = 11;
  c.macro_rounds = 2;
  c.micro_rounds = 2;
  c.parallelism = 3;
  c.cohort_size = 100;
  c.max_new_per_iter = 4;
  c.generator = mock_profile(RoleTag::generator, 1);
  c.generator.mock.target_words = 200;
  c.extender = mock_profile(RoleTag::extender, 2);
  c.seed_model = mock_profile(RoleTag::seed, 3);
  c.judge = mock_profile(RoleTag::judge, 4);
  c.seed_instructions = write_seeds(dir, n_seeds);
  return c;
}

inline std::string mock_trainer_hook() {
  return std::string("'") + LENGTHSMITH_MOCK_TRAINER + "' --in {trainer_in} --out {trainer_out}";
}

// Wraps a backend factory and counts the requests that reach each backend.
class CountingFactory {
 public:
  struct Counter : lengthsmith::backend::ChatBackend {
    Counter(lengthsmith::backend::BackendPtr inner, std::shared_ptr<std::atomic<std::int64_t>> n)
        : inner_(std::move(inner)), n_(std::move(n)) {}
    lengthsmith::backend::ChatResponse complete(const lengthsmith::backend::ChatRequest& req) override {
      ++*n_;
      return inner_->complete(req);
    }
    const lengthsmith::backend::BackendProfile& profile() const override { return inner_->profile(); }

    lengthsmith::backend::BackendPtr inner_;
    std::shared_ptr<std::atomic<std::int64_t>> n_;
  };

  lengthsmith::backend::BackendPtr operator()(const lengthsmith::backend::BackendProfile& p) const {
    return std::make_shared<Counter>(lengthsmith::backend::make_backend(p), calls);
  }

  std::shared_ptr<std::atomic<std::int64_t>> calls = std::make_shared<std::atomic<std::int64_t>>(0);
};

// Every JSONL file of a run keyed by path relative to the run root. The
// manifest and trainer files carry timestamps and absolute paths.
inline std::map<std::string, std::string> run_files(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file() || e.path().extension() != ".jsonl") continue;
    const auto rel = fs::relative(e.path(), root).generic_string();
    out[rel] = lengthsmith::read_file(e.path());
  }
  return out;
}

}  // namespace lstest
