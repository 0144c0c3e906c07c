#pragma once

// Word n-gram identity shared by the repetition filter and distinct-n. Not installed.

#include <cstddef>
#include <string_view>
#include <vector>

namespace lengthsmith::detail {

// One id per n-gram window of `tokens` (windows starting at 0..size-n), equal
// windows sharing an id. Ids are dense and numbered in first-seen order.
// Empty when there are fewer than n tokens.
std::vector<std::size_t> ngram_ids(const std::vector<std::string_view>& tokens, std::size_t n);

}  // namespace lengthsmith::detail
