#include "lengthsmith/text.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <sstream>

#include "lengthsmith/errors.hpp"
#include "support.hpp"

using namespace lengthsmith::corpus;

namespace {

// Builds text piece by piece while tracking the word count a human would give:
// every Han character is a word, every Latin token between separators is a word.
struct Built {
  std::string text;
  std::size_t words = 0;
};

Built mixed_text(lstest::Gen& g, std::int64_t pieces) {
  Built b;
  bool need_sep = false;  // last piece was a Latin word
  for (std::int64_t i = 0; i < pieces; ++i) {
    switch (g.range(0, 4)) {
      case 0:
      case 1:
        if (need_sep) b.text += g.pick(std::vector<std::string>{" ", "\n", "\t", "，", "。"});
        b.text += g.latin_word();
        if (g.coin(0.2)) b.text += g.pick(std::vector<std::string>{",", ".", "'s", "-ish"});
        need_sep = true;
        ++b.words;
        break;
      case 2:
        b.text += g.han_char();
        need_sep = false;
        ++b.words;
        break;
      case 3:
        b.text += g.pick(std::vector<std::string>{"，", "。", "！", "、", "　"});
        need_sep = false;
        break;
      default:
        b.text += g.pick(std::vector<std::string>{" ", "\n\n", "  \t"});
        need_sep = false;
        break;
    }
  }
  return b;
}

std::size_t chars(std::string_view s) { return decode_utf8(s).size(); }

}  // namespace

TEST(CountWords, EnglishWhitespaceRuns) {
  EXPECT_EQ(count_words(""), 0u);
  EXPECT_EQ(count_words("   \n\t "), 0u);
  EXPECT_EQ(count_words("one"), 1u);
  EXPECT_EQ(count_words("  Hello, world!  "), 2u);
  EXPECT_EQ(count_words("state-of-the-art design"), 2u);
  EXPECT_EQ(count_words("It's 3.14 apples"), 3u);
  EXPECT_EQ(count_words("a - b"), 3u);  // a standalone dash is a token
}

TEST(CountWords, CjkCharactersAreWords) {
  EXPECT_EQ(count_words("你好世界"), 4u);
  EXPECT_EQ(count_words("你好，世界。"), 4u);
  EXPECT_EQ(count_words("“你好”"), 2u);  // quotes glued to Han text are not words
  EXPECT_EQ(count_words("我有3个apple"), 5u);  // the digit run is its own token
  EXPECT_EQ(count_words("カタカナ"), 4u);
  EXPECT_EQ(count_words("한국어"), 3u);
}

TEST(CountWords, InvalidUtf8DoesNotCrash) {
  const std::string bad = "ok \xff\xfe bytes";
  EXPECT_EQ(count_words(bad), 3u);
}

TEST(CountWords, PropertyMatchesConstructionCount) {
  lstest::Gen g(42);
  for (int trial = 0; trial < 500; ++trial) {
    const auto b = mixed_text(g, g.range(0, 120));
    ASSERT_EQ(count_words(b.text), b.words) << b.text;
  }
}

TEST(CountWords, PropertyEnglishMatchesStreamSplit) {
  lstest::Gen g(7);
  for (int trial = 0; trial < 300; ++trial) {
    const auto text = g.english_text(0, 200);
    std::istringstream in(text);
    std::size_t expected = 0;
    for (std::string tok; in >> tok;) ++expected;
    ASSERT_EQ(count_words(text), expected);
  }
}

TEST(CountWords, PropertyAdditiveAcrossSeparators) {
  lstest::Gen g(9);
  for (int trial = 0; trial < 300; ++trial) {
    const auto a = mixed_text(g, g.range(0, 40)).text;
    const auto b = mixed_text(g, g.range(0, 40)).text;
    ASSERT_EQ(count_words(a + "\n" + b), count_words(a) + count_words(b));
  }
}

TEST(CountWords, CaseStudyFixtures) {
  // Reference counts within 2%: the source counted with a different tokenizer.
  const std::pair<const char*, double> cases[] = {
      {"case_initial.txt", 553}, {"case_extended.txt", 1071}, {"case_final.txt", 1538}};
  for (const auto& [name, expected] : cases) {
    const auto n = static_cast<double>(count_words(lstest::fixture(name)));
    EXPECT_LE(std::abs(n - expected), 0.02 * expected) << name << " counted " << n;
  }
}

TEST(SentenceBoundaries, AsciiNeedsFollowingSpace) {
  auto offsets = [](std::string_view s) {
    std::vector<std::size_t> out;
    for (const auto& b : sentence_boundaries(s)) out.push_back(b.byte_offset);
    return out;
  };
  EXPECT_EQ(offsets("Pi is 3.14 exactly. Yes"), (std::vector<std::size_t>{19}));
  EXPECT_EQ(offsets("He said \"stop.\" Then left."), (std::vector<std::size_t>{15, 26}));
  EXPECT_EQ(offsets("Wait?! Ok"), (std::vector<std::size_t>{6}));
  EXPECT_EQ(offsets("e.g.x"), (std::vector<std::size_t>{}));
  // "。" is three bytes; CJK marks need no trailing space.
  EXPECT_EQ(offsets("好。行"), (std::vector<std::size_t>{6}));
}

TEST(SplitHalf, ExampleAndNoSplit) {
  const auto h = split_half_at_punct("One two. Three four. Five six.");
  EXPECT_EQ(h.first, "One two. Three four.");
  EXPECT_EQ(h.second, " Five six.");
  EXPECT_THROW(split_half_at_punct("No boundary at all"), lengthsmith::NoSplitPoint);
  EXPECT_THROW(split_half_at_punct("Only one sentence.   "), lengthsmith::NoSplitPoint);
  EXPECT_THROW(split_half_at_punct(""), lengthsmith::NoSplitPoint);
}

TEST(SplitHalf, TieGoesToEarlierBoundary) {
  // n = 9 codepoints; boundaries at 3 and 6 are both 1.5 away from the middle.
  const auto h = split_half_at_punct("ab. d. fg");
  EXPECT_EQ(h.first, "ab.");
}

TEST(SplitHalf, PropertyConcatenatesAndMinimizesDistance) {
  lstest::Gen g(3);
  for (int trial = 0; trial < 300; ++trial) {
    const auto text = g.coin() ? g.english_text(2, 150) : g.chinese_text(2, 150);
    const auto cps = decode_utf8(text);
    std::size_t last = cps.size();
    while (last > 0 && is_space(cps[last - 1].value)) --last;
    std::vector<Boundary> interior;
    for (const auto& b : sentence_boundaries(text)) {
      if (b.char_index < last) interior.push_back(b);
    }
    if (interior.empty()) {
      EXPECT_THROW(split_half_at_punct(text), lengthsmith::NoSplitPoint);
      continue;
    }
    const auto h = split_half_at_punct(text);
    ASSERT_EQ(h.first + h.second, text);
    ASSERT_FALSE(h.first.empty());
    ASSERT_FALSE(trim(h.second).empty());
    const auto n = static_cast<long long>(cps.size());
    long long best = -1;
    for (const auto& b : interior) {
      const long long d = std::llabs(2 * static_cast<long long>(b.char_index) - n);
      if (best < 0 || d < best) best = d;
    }
    ASSERT_EQ(std::llabs(2 * static_cast<long long>(chars(h.first)) - n), best);
  }
}

TEST(TruncateTwoThirds, ExampleAndFallback) {
  EXPECT_EQ(truncate_two_thirds("Aa. Bb. Cc. Dd. Ee. Ff."), "Aa. Bb. Cc. Dd.");
  // No interior boundary: cut back to whitespace near two-thirds.
  EXPECT_EQ(truncate_two_thirds("alpha beta gamma delta epsilon"), "alpha beta gamma");
  EXPECT_EQ(truncate_two_thirds("unbroken"), "unbroken");
}

TEST(TruncateTwoThirds, PropertyPrefixNearTwoThirds) {
  lstest::Gen g(5);
  for (int trial = 0; trial < 300; ++trial) {
    const auto text = g.coin() ? g.english_text(1, 200) : g.chinese_text(1, 200);
    const auto t = truncate_two_thirds(text);
    ASSERT_EQ(text.compare(0, t.size(), t), 0) << "not a prefix";
    ASSERT_FALSE(t.empty());
  }
}

TEST(Trim, UnicodeSpaces) {
  EXPECT_EQ(trim("　 abc \n"), "abc");
  EXPECT_EQ(trim("   "), "");
  EXPECT_EQ(trim_left("  x "), "x ");
  EXPECT_EQ(trim_right("  x "), "  x");
}

TEST(Script, CountsAndDominance) {
  const auto c = count_script_letters("abc 你好");
  EXPECT_EQ(c.latin, 3u);
  EXPECT_EQ(c.cjk, 2u);
  EXPECT_EQ(dominant_script("abc 你好"), Script::latin);
  EXPECT_EQ(dominant_script("ab 你好吗"), Script::cjk);
  EXPECT_EQ(dominant_script("123 !!"), Script::none);
}

TEST(Terminal, EndsWithTerminalPunct) {
  EXPECT_TRUE(ends_with_terminal_punct("Done.  \n"));
  EXPECT_TRUE(ends_with_terminal_punct("他说：“好。”"));
  EXPECT_TRUE(ends_with_terminal_punct("Really?)"));
  EXPECT_FALSE(ends_with_terminal_punct("and then"));
  EXPECT_FALSE(ends_with_terminal_punct(""));
}

TEST(SplitSentences, RoundTrips) {
  lstest::Gen g(13);
  for (int trial = 0; trial < 200; ++trial) {
    const auto text = g.english_text(0, 80) + g.chinese_text(0, 40);
    std::string joined;
    for (auto s : split_sentences(text)) joined += s;
    ASSERT_EQ(joined, text);
  }
}
