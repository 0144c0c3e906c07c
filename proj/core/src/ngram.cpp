#include "ngram.hpp"

#include <algorithm>
#include <cstdint>
#include <string>
#include <unordered_map>

namespace lengthsmith::detail {

std::vector<std::size_t> ngram_ids(const std::vector<std::string_view>& tokens, std::size_t n) {
  std::vector<std::size_t> out;
  if (n == 0 || tokens.size() < n) return out;

  std::unordered_map<std::string_view, std::uint64_t> vocab;
  std::vector<std::uint64_t> seq;
  seq.reserve(tokens.size());
  for (auto t : tokens) seq.push_back(vocab.emplace(t, vocab.size()).first->second + 1);

  // Rolling polynomial hash; windows that share a hash are compared exactly.
  constexpr std::uint64_t kBase = 0x100000001b3ULL;
  std::uint64_t top = 1;
  for (std::size_t i = 1; i < n; ++i) top *= kBase;
  std::uint64_t h = 0;
  for (std::size_t i = 0; i < n; ++i) h = h * kBase + seq[i];

  const std::size_t windows = seq.size() - n + 1;
  out.reserve(windows);
  std::unordered_multimap<std::uint64_t, std::size_t> first_window;  // hash -> window start
  std::size_t next_id = 0;
  for (std::size_t s = 0; s < windows; ++s) {
    if (s > 0) h = (h - seq[s - 1] * top) * kBase + seq[s + n - 1];
    auto [lo, hi] = first_window.equal_range(h);
    std::size_t id = next_id;
    for (auto it = lo; it != hi; ++it) {
      const auto a = seq.begin() + static_cast<std::ptrdiff_t>(s);
      const auto b = seq.begin() + static_cast<std::ptrdiff_t>(it->second);
      if (std::equal(a, a + static_cast<std::ptrdiff_t>(n), b)) {
        id = out[it->second];
        break;
      }
    }
    if (id == next_id) {
      first_window.emplace(h, s);
      ++next_id;
    }
    out.push_back(id);
  }
  return out;
}

}  // namespace lengthsmith::detail
