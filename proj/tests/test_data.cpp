#include <catch2/catch_amalgamated.hpp>

#include <set>
#include <sstream>

#include "milmine/data.hpp"

using namespace milmine;

namespace {
Sentence make_sentence(const std::string& id,
                       std::vector<std::string> tokens) {
  Sentence s;
  s.id = id;
  s.tokens = std::move(tokens);
  return s;
}
}  // namespace

TEST_CASE("windowing centers each token with edge padding") {
  Vocabulary vocab;
  const int a = vocab.add("a"), b = vocab.add("b"), c = vocab.add("c");
  Bag bag = window_sentence(make_sentence("x", {"a", "b", "c"}), 3, vocab);
  REQUIRE(bag.instances.size() == 3);
  CHECK(bag.instances[0] == std::vector<int>{Vocabulary::kPad, a, b});
  CHECK(bag.instances[1] == std::vector<int>{a, b, c});
  CHECK(bag.instances[2] == std::vector<int>{b, c, Vocabulary::kPad});

  Bag single = window_sentence(make_sentence("y", {"a"}), 3, vocab);
  REQUIRE(single.instances.size() == 1);
  CHECK(single.instances[0] ==
        std::vector<int>{Vocabulary::kPad, a, Vocabulary::kPad});

  Bag wide = window_sentence(make_sentence("z", {"a", "b", "c", "a", "b"}), 5,
                             vocab);
  REQUIRE(wide.instances.size() == 5);
  CHECK(wide.instances[0] ==
        std::vector<int>{Vocabulary::kPad, Vocabulary::kPad, a, b, c});

  CHECK_THROWS_AS(window_sentence(make_sentence("w", {"a"}), 4, vocab),
                  std::invalid_argument);
}

TEST_CASE("windowing then stripping padding recovers the token sequence") {
  Vocabulary vocab;
  for (const char* t : {"a", "b", "c", "d", "e"}) vocab.add(t);
  for (int T : {1, 3, 5, 7}) {
    Sentence s = make_sentence("r", {"e", "a", "c", "c", "b", "d"});
    Bag bag = window_sentence(s, T, vocab);
    REQUIRE(bag.instances.size() == s.tokens.size());
    const int half = (T - 1) / 2;
    for (std::size_t j = 0; j < bag.instances.size(); ++j)
      CHECK(vocab.token(bag.instances[j][half]) == s.tokens[j]);
  }
}

TEST_CASE("derive_sentence_label implements the any-error rule") {
  CHECK(derive_sentence_label({0, 0, 0}) == 0);
  CHECK(derive_sentence_label({0, 1, 0}) == 1);
  CHECK(derive_sentence_label({1, 1, 1}) == 1);
  CHECK_THROWS_AS(derive_sentence_label({}), std::invalid_argument);
}

TEST_CASE("corpus parsing") {
  SECTION("empty file") {
    std::istringstream in("");
    CHECK(parse_corpus(in).empty());
  }
  SECTION("one valid line plus comments") {
    std::istringstream in("# comment\ns1\t1\tfoo bar baz\t0,1,0\n");
    auto got = parse_corpus(in);
    REQUIRE(got.size() == 1);
    CHECK(got[0].id == "s1");
    CHECK(got[0].tokens == std::vector<std::string>{"foo", "bar", "baz"});
    CHECK(*got[0].sentence_label == 1);
    CHECK(*got[0].word_labels == std::vector<int>{0, 1, 0});
  }
  SECTION("unlabeled sentence") {
    std::istringstream in("u1\t-\tfoo bar\t-\n");
    auto got = parse_corpus(in);
    REQUIRE(got.size() == 1);
    CHECK_FALSE(got[0].sentence_label.has_value());
    CHECK_FALSE(got[0].word_labels.has_value());
  }
  SECTION("label inconsistency is rejected") {
    std::istringstream in("s1\t1\tfoo bar\t0,0\n");
    CHECK_THROWS_AS(parse_corpus(in), ValidationError);
    std::istringstream in2("s1\t0\tfoo bar\t0,1\n");
    CHECK_THROWS_AS(parse_corpus(in2), ValidationError);
  }
  SECTION("malformed lines carry the line number") {
    std::istringstream in("ok\t0\ta b\t0,0\nbroken line\n");
    try {
      parse_corpus(in);
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.line() == 2);
    }
  }
  SECTION("word label count must match tokens") {
    std::istringstream in("s1\t1\tfoo bar\t1\n");
    CHECK_THROWS_AS(parse_corpus(in), ValidationError);
  }
}

TEST_CASE("save then load round-trips byte-identically") {
  SynthConfig cfg;
  cfg.seed = 11;
  cfg.num_sentences = 50;
  auto sentences = generate_synthetic_sentences(cfg);
  std::string first;
  for (const auto& s : sentences) first += format_sentence(s);
  std::istringstream in(first);
  auto reloaded = parse_corpus(in);
  std::string second;
  for (const auto& s : reloaded) second += format_sentence(s);
  CHECK(first == second);
}

TEST_CASE("vocabulary reserves padding and unknown ids") {
  Vocabulary v;
  CHECK(v.size() == 2);
  CHECK(v.add("hello") == 2);
  CHECK(v.add("hello") == 2);
  CHECK(v.id_of("hello") == 2);
  CHECK(v.id_of("never-seen") == Vocabulary::kUnk);
}

TEST_CASE("split is deterministic with the requested sizes") {
  std::vector<Sentence> sentences;
  for (int i = 0; i < 10; ++i)
    sentences.push_back(make_sentence("s" + std::to_string(i), {"tok"}));
  auto [a, b] = split_corpus(sentences, 0.8, 42);
  CHECK(a.size() == 8);
  CHECK(b.size() == 2);
  auto [a2, b2] = split_corpus(sentences, 0.8, 42);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].id == a2[i].id);

  // parts are disjoint and cover the input
  std::set<std::string> ids;
  for (const auto& s : a) ids.insert(s.id);
  for (const auto& s : b) ids.insert(s.id);
  CHECK(ids.size() == 10);

  // different seeds give different partitions often enough
  int distinct = 0;
  for (int seed = 0; seed < 100; ++seed) {
    auto [x, y] = split_corpus(sentences, 0.8, seed);
    std::set<std::string> part;
    for (const auto& s : x) part.insert(s.id);
    std::set<std::string> base;
    for (const auto& s : a) base.insert(s.id);
    if (part != base) ++distinct;
  }
  CHECK(distinct > 50);
}

TEST_CASE("synthetic generator honors the error fraction") {
  SynthConfig cfg;
  cfg.seed = 7;
  cfg.num_sentences = 200;

  SECTION("zero fraction means all-negative") {
    cfg.error_sentence_fraction = 0.0;
    for (const auto& s : generate_synthetic_sentences(cfg))
      CHECK(*s.sentence_label == 0);
  }
  SECTION("full fraction means all-positive") {
    cfg.error_sentence_fraction = 1.0;
    for (const auto& s : generate_synthetic_sentences(cfg))
      CHECK(*s.sentence_label == 1);
  }
  SECTION("same seed twice gives identical corpora") {
    auto a = generate_synthetic_sentences(cfg);
    auto b = generate_synthetic_sentences(cfg);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].id == b[i].id);
      CHECK(a[i].tokens == b[i].tokens);
      CHECK(*a[i].word_labels == *b[i].word_labels);
    }
  }
  SECTION("empirical fraction tracks the config at scale") {
    cfg.num_sentences = 5000;
    cfg.error_sentence_fraction = 0.3;
    auto sentences = generate_synthetic_sentences(cfg);
    int positives = 0;
    for (const auto& s : sentences) positives += *s.sentence_label;
    const double fraction = positives / 5000.0;
    CHECK(std::abs(fraction - 0.3) <= 0.02);
  }
  SECTION("every generated sentence satisfies the label rule") {
    for (const auto& s : generate_synthetic_sentences(cfg))
      CHECK(*s.sentence_label == derive_sentence_label(*s.word_labels));
  }
}

TEST_CASE("dataset construction ties bags to one vocabulary and width") {
  SynthConfig cfg;
  cfg.seed = 3;
  cfg.num_sentences = 30;
  auto ds = generate_synthetic_corpus(cfg, 3);
  CHECK(ds.window_width == 3);
  REQUIRE(ds.bags.size() == ds.sentences.size());
  for (std::size_t i = 0; i < ds.bags.size(); ++i) {
    CHECK(ds.bags[i].instances.size() == ds.sentences[i].tokens.size());
    for (const auto& w : ds.bags[i].instances)
      CHECK(w.size() == 3);
  }
}
