#include "lengthsmith/mock_backend.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <thread>

#include "lengthsmith/rng.hpp"
#include "lengthsmith/text.hpp"

namespace lengthsmith::backend {

namespace {

constexpr std::array<std::string_view, 160> kWords = {
    "river",    "lantern",   "garden",    "village",  "mountain", "harbor",    "winter",
    "summer",   "library",   "journey",   "window",   "bridge",   "forest",    "meadow",
    "market",   "letter",    "stone",     "candle",   "shadow",   "morning",   "evening",
    "festival", "orchard",   "workshop",  "compass",  "ladder",   "mirror",    "harvest",
    "thunder",  "valley",    "island",    "castle",   "tower",    "engine",    "signal",
    "pattern",  "memory",    "promise",   "courage",  "silence",  "pressure",  "balance",
    "science",  "history",   "culture",   "economy",  "network",  "climate",   "ocean",
    "desert",   "glacier",   "planet",    "orbit",    "crystal",  "copper",    "silver",
    "velvet",   "marble",    "timber",    "cotton",   "paper",    "ink",       "music",
    "rhythm",   "melody",    "canvas",    "sketch",   "portrait", "chapter",   "story",
    "legend",   "rumor",     "treaty",    "council",  "student",  "teacher",   "farmer",
    "sailor",   "merchant",  "painter",   "doctor",   "builder",  "traveler",  "neighbor",
    "quietly",  "slowly",    "gently",    "boldly",   "suddenly", "carefully", "rarely",
    "often",    "bright",    "ancient",   "hidden",   "distant",  "gentle",    "curious",
    "steady",   "fragile",   "golden",    "narrow",   "crowded",  "patient",   "sudden",
    "careful",  "modern",    "rural",     "urban",    "vivid",    "humble",    "restless",
    "carries",  "gathers",   "follows",   "reveals",  "shapes",   "remembers", "explores",
    "protects", "measures",  "connects",  "opens",    "builds",   "watches",   "crosses",
    "welcomes", "describes", "changes",   "supports", "questions","imagines",  "repairs",
    "the",      "a",         "every",     "each",     "another",  "its",       "their",
    "beneath",  "beyond",    "across",    "toward",   "within",   "around",    "after",
    "before",   "and",       "while",     "because",  "although", "until",     "where",
    "with",     "without",   "through",   "under",    "along",    "against",
};

constexpr std::array<std::string_view, 160> kHan = {
    "山", "水", "风", "云", "雨", "雪", "花", "草", "树", "林", "河", "湖", "海", "岛", "城", "村",
    "路", "桥", "门", "窗", "灯", "书", "纸", "笔", "画", "歌", "舞", "茶", "酒", "米", "田", "园",
    "春", "夏", "秋", "冬", "晨", "夜", "星", "月", "日", "光", "影", "声", "色", "香", "味", "心",
    "情", "梦", "思", "念", "忆", "望", "行", "走", "看", "听", "说", "写", "读", "学", "教", "问",
    "答", "想", "知", "道", "理", "法", "事", "物", "人", "家", "国", "民", "师", "友", "客", "主",
    "老", "少", "新", "旧", "远", "近", "高", "低", "深", "浅", "长", "短", "明", "暗", "静", "动",
    "温", "暖", "凉", "清", "轻", "重", "快", "慢", "早", "晚", "古", "今", "东", "西", "南", "北",
    "的", "了", "在", "是", "有", "和", "与", "从", "向", "把", "被", "让", "使", "因", "而", "又",
    "也", "都", "就", "才", "还", "更", "最", "很", "已", "将", "正", "曾", "能", "会", "要", "得",
    "开", "关", "来", "去", "上", "下", "里", "外", "前", "后", "中", "间", "边", "旁", "处", "时",
};

constexpr std::array<std::string_view, 10> kGenres = {
    "story",   "essay",  "report",   "article",  "guide",
    "analysis", "memoir", "narrative", "proposal", "feature article",
};
constexpr std::array<std::string_view, 8> kGenresZh = {
    "故事", "散文", "报告", "文章", "指南", "分析", "回忆录", "小说",
};

std::string capitalize(std::string_view w) {
  std::string s(w);
  if (!s.empty() && s[0] >= 'a' && s[0] <= 'z') s[0] = static_cast<char>(s[0] - 'a' + 'A');
  return s;
}

// One sentence of exactly `words` words (words >= 1).
std::string make_sentence(Rng& rng, std::int64_t words, Language lang) {
  std::string s;
  const std::int64_t comma_at = words >= 8 ? rng.between(3, words - 3) : -1;
  for (std::int64_t i = 0; i < words; ++i) {
    if (lang == Language::zh) {
      s += kHan[rng.below(kHan.size())];
      if (i + 1 == comma_at) s += "，";
    } else {
      if (i > 0) s += ' ';
      const auto w = kWords[rng.below(kWords.size())];
      s += i == 0 ? capitalize(w) : std::string(w);
      if (i + 1 == comma_at) s += ',';
    }
  }
  s += lang == Language::zh ? "。" : ".";
  return s;
}

// Sentences totalling exactly `words` words.
std::vector<std::string> make_sentences(Rng& rng, std::int64_t words, Language lang) {
  std::vector<std::string> out;
  const std::int64_t lo = lang == Language::zh ? 12 : 8;
  const std::int64_t hi = lang == Language::zh ? 28 : 18;
  while (words > 0) {
    std::int64_t len = rng.between(lo, hi);
    if (words - len < 3) len = words;
    out.push_back(make_sentence(rng, len, lang));
    words -= len;
  }
  return out;
}

std::string join_sentences(const std::vector<std::string>& sentences, Language lang) {
  std::string out;
  for (const auto& s : sentences) {
    if (!out.empty() && lang != Language::zh) out += ' ';
    out += s;
  }
  return out;
}

std::string slot(const ChatRequest& req, const std::string& name) {
  auto it = req.slots.find(name);
  if (it != req.slots.end()) return it->second;
  for (auto m = req.messages.rbegin(); m != req.messages.rend(); ++m) {
    if (m->role == MessageRole::user) return m->content;
  }
  return {};
}

bool contains_ci(std::string_view hay, std::string_view needle) {
  auto lower = [](char c) { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c; };
  auto it = std::search(hay.begin(), hay.end(), needle.begin(), needle.end(),
                        [&](char a, char b) { return lower(a) == lower(b); });
  return it != hay.end();
}

bool looks_long_form(std::string_view instruction) {
  static constexpr std::array<std::string_view, 17> kCues = {
      "write",  "story", "essay", "article", "report", "compose", "describe", "narrative", "guide",
      "analysis", "memoir", "写", "文章", "故事", "报告", "论述", "描述",
  };
  if (corpus::count_words(instruction) < 6) return false;
  return std::any_of(kCues.begin(), kCues.end(),
                     [&](std::string_view cue) { return contains_ci(instruction, cue); });
}

std::string stage2_continuation(const std::string& original, const std::string& draft,
                                double factor, std::uint64_t seed) {
  if (factor <= 0.0) return {};
  const double covered = static_cast<double>(corpus::count_words(draft)) / factor;
  std::size_t words_before = 0;
  const auto pieces = corpus::split_sentences(original);
  for (std::size_t i = 0; i < pieces.size(); ++i) {
    if (static_cast<double>(words_before) >= covered) {
      const std::size_t offset = static_cast<std::size_t>(pieces[i].data() - original.data());
      const std::string remainder(corpus::trim_left(std::string_view(original).substr(offset)));
      return mock_extend(remainder, factor, seed);
    }
    words_before += corpus::count_words(pieces[i]);
  }
  return {};
}

}  // namespace

std::string mock_generate(std::uint64_t seed, std::int64_t target_words, Language language) {
  if (target_words <= 0) return {};
  const Language lang = language == Language::zh ? Language::zh : Language::en;
  Rng rng(seed);
  std::string out;
  std::int64_t left = target_words;
  while (left > 0) {
    const std::int64_t per_paragraph = rng.between(3, 6) * (lang == Language::zh ? 20 : 13);
    std::int64_t take = std::min(left, per_paragraph);
    if (left - take < 8) take = left;
    if (!out.empty()) out += "\n\n";
    out += join_sentences(make_sentences(rng, take, lang), lang);
    left -= take;
  }
  return out;
}

std::string mock_extend(std::string_view input, double factor, std::uint64_t seed) {
  if (!(factor > 1.0)) return std::string(input);
  const std::string_view body = corpus::trim_right(input);
  const auto pieces = corpus::split_sentences(body);
  if (pieces.empty()) return std::string(input);
  const auto words = static_cast<double>(corpus::count_words(body));
  const auto extra = static_cast<std::int64_t>(std::llround((factor - 1.0) * words));
  const Language lang =
      corpus::dominant_script(body) == corpus::Script::cjk ? Language::zh : Language::en;

  Rng rng(derive_seed(seed, {"extend", body}));
  std::string out;
  out.reserve(body.size() + static_cast<std::size_t>(extra) * 8);
  std::int64_t inserted = 0;
  const auto k = static_cast<std::int64_t>(pieces.size());
  for (std::int64_t i = 0; i < k; ++i) {
    out += pieces[static_cast<std::size_t>(i)];
    const std::int64_t due = (extra * (i + 1)) / k;
    const std::int64_t quota = due - inserted;
    if (quota >= 3 || (i == k - 1 && quota > 0)) {
      if (lang != Language::zh) out += ' ';
      out += join_sentences(make_sentences(rng, quota, lang), lang);
      inserted += quota;
    }
  }
  return out;
}

MockBackend::MockBackend(BackendProfile profile) : profile_(std::move(profile)) {}

ChatResponse MockBackend::complete(const ChatRequest& req) {
  ++calls_;
  const auto now = ++in_flight_;
  auto seen = max_in_flight_.load();
  while (now > seen && !max_in_flight_.compare_exchange_weak(seen, now)) {
  }
  struct Leave {
    std::atomic<std::int64_t>& counter;
    ~Leave() { --counter; }
  } leave{in_flight_};
  if (profile_.mock.latency_ms > 0) {
    std::this_thread::sleep_for(std::chrono::milliseconds(profile_.mock.latency_ms));
  }
  return respond(req);
}

ChatResponse MockBackend::respond(const ChatRequest& req) const {
  const MockParams& m = profile_.mock;
  ChatResponse out;
  switch (req.task) {
    case Task::generate: {
      const std::string instruction = slot(req, "instruction");
      Rng rng(derive_seed(m.seed, {"length", instruction}));
      const double scale = 1.0 - m.length_spread + 2.0 * m.length_spread * rng.uniform_open();
      const auto target = std::max<std::int64_t>(
          1, std::llround(static_cast<double>(m.target_words) * scale));
      out.content = mock_generate(derive_seed(m.seed, {"generate", instruction}), target,
                                  detect_language(instruction));
      break;
    }
    case Task::self_instruct: {
      const std::string p1 = slot(req, "prompt1");
      const std::string p2 = slot(req, "prompt2");
      Rng rng(derive_seed(m.seed, {"self_instruct", p1, p2}));
      auto pick = [&](auto& table) { return std::string(table[rng.below(table.size())]); };
      if (detect_language(p1 + p2) == Language::zh) {
        out.content = "请写一篇关于" + pick(kHan) + pick(kHan) + "与" + pick(kHan) + pick(kHan) + "的" +
                      pick(kGenresZh) + "，详细描述" + pick(kHan) + pick(kHan) + "和" + pick(kHan) +
                      pick(kHan) + "。";
      } else {
        const std::string genre = pick(kGenres);
        out.content = "Write a detailed " + genre + " about the " + pick(kWords) + " " +
                      pick(kWords) + " of " + pick(kWords) + ", exploring " + pick(kWords) +
                      ", " + pick(kWords) + " and " + pick(kWords) + " in depth.";
      }
      break;
    }
    case Task::validate:
      out.content = looks_long_form(slot(req, "instruction")) ? "Yes" : "No";
      break;
    case Task::extend:
      out.content = mock_extend(slot(req, "initial_response"), m.extend_factor, m.seed);
      break;
    case Task::extend_stage2:
      out.content = stage2_continuation(slot(req, "initial_response"), slot(req, "draft"),
                                        m.extend_factor, m.seed);
      break;
    case Task::rephrase: {
      const std::string instruction = slot(req, "instruction");
      const std::string constraint = slot(req, "constraint");
      if (detect_language(instruction) == Language::zh) {
        out.content = instruction + "要求" + constraint + "。";
      } else {
        out.content = instruction + " The response should be " + constraint + ".";
      }
      break;
    }
    case Task::judge_quality: {
      const std::uint64_t h = derive_seed(m.seed, {"quality", slot(req, "response")});
      static constexpr std::array<std::string_view, 7> kAspects = {
          "relevance", "coherence", "accuracy", "consistency", "clarity", "creativity", "engagement"};
      std::string json = "{";
      for (std::size_t i = 0; i < kAspects.size(); ++i) {
        if (i > 0) json += ", ";
        json += "\"" + std::string(kAspects[i]) + "\": " + std::to_string(6 + ((h >> (i * 5)) % 5));
      }
      out.content = json + "}";
      break;
    }
    case Task::judge_pairwise: {
      std::string winner = "1";
      if (m.judge_bias != "first") {
        const auto a = corpus::count_words(slot(req, "response_1"));
        const auto b = corpus::count_words(slot(req, "response_2"));
        winner = a > b ? "1" : (b > a ? "2" : "tie");
      }
      out.content = "{\"winner\": \"" + winner + "\"}";
      break;
    }
    case Task::generic:
      out.content = mock_generate(derive_seed(m.seed, {"generic", slot(req, "")}), 50);
      break;
  }
  out.finish_reason = out.content.empty() ? FinishReason::other : FinishReason::stop;
  out.usage.completion_tokens = static_cast<std::int64_t>(corpus::count_words(out.content));
  return out;
}

}  // namespace lengthsmith::backend
