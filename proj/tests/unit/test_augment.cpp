#include "corpus.hpp"
#include "doctest.h"
#include "quill/augment.hpp"
#include "quill/error.hpp"
#include "quill/metrics.hpp"
#include "quill/rng.hpp"

using namespace quill;

namespace {

AugmentConfig only(double AugmentConfig::*field, double p) {
  AugmentConfig c = AugmentConfig::zero();
  c.*field = p;
  return c;
}

}  // namespace

TEST_CASE("zero config leaves words and texts unchanged") {
  const AugmentConfig c = AugmentConfig::zero();
  Rng rng(1);
  CHECK(corrupt_word("dinosaur", c, rng) == "dinosaur");
  CHECK(corrupt_text("The dinosaur runs in the park.", c, rng) == "The dinosaur runs in the park.");
  CHECK(corrupt_text("  spaced \t out  ", c, rng) == "  spaced \t out  ");
  CHECK(corrupt_text("", c, rng).empty());
}

TEST_CASE("shorten to initial") {
  Rng rng(1);
  CHECK(corrupt_word("dinosaur", only(&AugmentConfig::p_shorten_to_initial, 1.0), rng) == "d");
  CHECK(corrupt_word("dinosaur.", only(&AugmentConfig::p_shorten_to_initial, 1.0), rng) == "d.");
}

TEST_CASE("confusion substitution") {
  AugmentConfig c = AugmentConfig::zero();
  c.confusion_table = parse_confusion_table("c\tk\n");
  c.p_misspell = 1.0;
  Rng rng(1);
  CHECK(corrupt_word("cat", c, rng) == "kat");
  CHECK(corrupt_word("Cat", c, rng) == "Kat");
}

TEST_CASE("bigram keys win over letter keys, left to right") {
  AugmentConfig c = AugmentConfig::zero();
  c.confusion_table = parse_confusion_table("ph\tf\np\tb\nh\tx\n");
  c.p_misspell = 1.0;
  Rng rng(1);
  CHECK(corrupt_word("phone", c, rng) == "fone");
  CHECK(corrupt_word("hip", c, rng) == "xib");
}

TEST_CASE("cut ending removes 1..max trailing letters from long words") {
  AugmentConfig c = only(&AugmentConfig::p_cut_ending, 1.0);
  c.cut_ending_max_chars = 3;
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    Rng rng(seed);
    const std::string out = corrupt_word("dinosaur", c, rng);
    CHECK(out.size() >= 5);
    CHECK(out.size() <= 7);
    CHECK(std::string("dinosaur").starts_with(out));
  }
  Rng rng(3);
  CHECK(corrupt_word("cat", c, rng) == "cat");
}

TEST_CASE("letter deletion never empties a word") {
  Rng rng(2);
  const AugmentConfig c = only(&AugmentConfig::p_letter_delete, 1.0);
  CHECK(corrupt_word("dinosaur", c, rng) == "d");
  CHECK(corrupt_word("a", c, rng) == "a");
}

TEST_CASE("space deletion joins words") {
  Rng rng(1);
  CHECK(corrupt_text("the dinosaur runs", only(&AugmentConfig::p_space_delete, 1.0), rng) ==
        "thedinosaurruns");
}

TEST_CASE("word deletion keeps one word") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    const std::string out =
        corrupt_text("the dinosaur runs fast", only(&AugmentConfig::p_word_delete, 1.0), rng);
    CHECK(out == "the");
  }
}

TEST_CASE("generate_pairs keeps teachers and is deterministic") {
  const std::vector<std::string> texts = {"One text.", "Two texts here.", "Three!"};
  AugmentConfig c = AugmentConfig::defaults();
  c.seed = 4;
  const auto a = generate_pairs(texts, c);
  const auto b = generate_pairs(texts, c);
  REQUIRE(a.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) CHECK(a[i].teacher == texts[i]);
  CHECK(a == b);

  AugmentConfig z = AugmentConfig::zero();
  for (const auto& p : generate_pairs(texts, z)) CHECK(p.student == p.teacher);
}

TEST_CASE("each text uses its own stream") {
  AugmentConfig c = AugmentConfig::defaults();
  c.seed = 12;
  const auto texts = testing::synthetic_sentences(20, 3);
  const auto all = generate_pairs(texts, c);
  Rng rng(derive_seed(c.seed, 7));
  CHECK(all[7].student == corrupt_text(texts[7], c, rng));
}

TEST_CASE("default augmentation corrupts text") {
  AugmentConfig c = AugmentConfig::defaults();
  c.seed = 1;
  const auto texts = testing::synthetic_sentences(500, 1);
  double total = 0.0;
  for (const auto& p : generate_pairs(texts, c)) total += normalized_ed(p.student, p.teacher);
  const double mean = total / 500.0;
  CHECK(mean > 0.0);
  MESSAGE("mean NED of default augmentation: " << mean);
}

TEST_CASE("config validation") {
  AugmentConfig c = AugmentConfig::defaults();
  CHECK_NOTHROW(c.validate());
  c.p_misspell = 1.5;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  c = AugmentConfig::defaults();
  c.cut_ending_max_chars = 0;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  c = AugmentConfig::defaults();
  c.confusion_table = parse_confusion_table("abc\tx\n");
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  c.confusion_table = parse_confusion_table("C\tx\n");
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
}

TEST_CASE("confusion table parsing") {
  const ConfusionTable t = parse_confusion_table("# comment\nc\tk\n\nc\ts\nou\tu\n");
  REQUIRE(t.count(U"c") == 1);
  CHECK(t.at(U"c") == std::vector<std::u32string>{U"k", U"s"});
  CHECK(t.at(U"ou") == std::vector<std::u32string>{U"u"});
  CHECK_FALSE(AugmentConfig::defaults().confusion_table.empty());
}
