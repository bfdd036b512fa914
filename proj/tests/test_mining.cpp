#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>

#include "milmine/mining.hpp"

using namespace milmine;

namespace {

Sentence sentence_of_length(const std::string& id, std::size_t n,
                            int label = 0) {
  Sentence s;
  s.id = id;
  for (std::size_t i = 0; i < n; ++i) s.tokens.push_back("w");
  s.word_labels = std::vector<int>(n, 0);
  if (label == 1 && n > 0) (*s.word_labels)[0] = 1;
  s.sentence_label = label;
  return s;
}

std::vector<Sentence> synth_pool(std::uint64_t seed, std::size_t n) {
  SynthConfig cfg;
  cfg.seed = seed;
  cfg.num_sentences = n;
  cfg.vocab_size = 50;
  return generate_synthetic_sentences(cfg);
}

}  // namespace

TEST_CASE("sort_and_sample strides the length-sorted pool") {
  std::vector<Sentence> pool;
  for (int n = 10; n >= 1; --n)
    pool.push_back(sentence_of_length("p" + std::to_string(n), n));

  SECTION("k=5 over 10 lengths picks every other element") {
    auto got = sort_and_sample(pool, 5);
    REQUIRE(got.size() == 5);
    std::vector<std::size_t> lengths;
    for (const auto& s : got) lengths.push_back(s.tokens.size());
    CHECK(lengths == std::vector<std::size_t>{1, 3, 5, 7, 9});
  }
  SECTION("k equal to the pool size returns everything in length order") {
    auto got = sort_and_sample(pool, 10);
    REQUIRE(got.size() == 10);
    for (std::size_t i = 0; i < got.size(); ++i)
      CHECK(got[i].tokens.size() == i + 1);
  }
  SECTION("k=1 picks the shortest sentence") {
    auto got = sort_and_sample(pool, 1);
    REQUIRE(got.size() == 1);
    CHECK(got[0].tokens.size() == 1);
  }
  SECTION("equal lengths are ordered by id") {
    std::vector<Sentence> ties = {sentence_of_length("b", 3),
                                  sentence_of_length("a", 3),
                                  sentence_of_length("c", 3)};
    auto got = sort_and_sample(ties, 3);
    CHECK(got[0].id == "a");
    CHECK(got[1].id == "b");
    CHECK(got[2].id == "c");
  }
  SECTION("bad k") {
    CHECK_THROWS_AS(sort_and_sample(pool, 0), std::invalid_argument);
    CHECK_THROWS_AS(sort_and_sample(pool, 11), std::invalid_argument);
  }
}

TEST_CASE("score_pool ranks by probability with id tie-break") {
  auto pool = synth_pool(21, 40);
  ModelConfig mc;
  Vocabulary vocab;
  for (const auto& s : pool)
    for (const auto& t : s.tokens) vocab.add(t);
  mc.vocab_size = vocab.size();
  TrainConfig tc;
  tc.seed = 21;
  ModelParams params = init_params(mc, tc);

  auto ranked = score_pool(pool, params, vocab, 1.0);
  REQUIRE(ranked.size() == pool.size());
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    CHECK(ranked[i].rank == static_cast<int>(i) + 1);
    if (i > 0) {
      CHECK(ranked[i - 1].probability >= ranked[i].probability);
      if (ranked[i - 1].probability == ranked[i].probability)
        CHECK(ranked[i - 1].id < ranked[i].id);
    }
    CHECK(ranked[i].attention.size() == ranked[i].tokens.size());
    CHECK(ranked[i].word_labels.size() == ranked[i].tokens.size());
    if (ranked[i].probability < 0.5)
      for (int y : ranked[i].word_labels) CHECK(y == 0);
  }
  CHECK_THROWS_AS(score_pool({}, params, vocab, 1.0), std::invalid_argument);
}

TEST_CASE("an all-zero model scores every sentence 0.5, ranked by id") {
  std::vector<Sentence> pool = {sentence_of_length("z", 4),
                                sentence_of_length("a", 3),
                                sentence_of_length("m", 5)};
  ModelConfig mc;
  Vocabulary vocab;
  vocab.add("w");
  mc.vocab_size = vocab.size();
  ModelParams params = make_params(mc);  // all zeros
  auto ranked = score_pool(pool, params, vocab, 1.0);
  CHECK(ranked[0].id == "a");
  CHECK(ranked[1].id == "m");
  CHECK(ranked[2].id == "z");
  for (const auto& c : ranked) CHECK(c.probability == 0.5);
}

TEST_CASE("score_pool is thread-count invariant") {
  auto pool = synth_pool(22, 60);
  ModelConfig mc;
  Vocabulary vocab;
  for (const auto& s : pool)
    for (const auto& t : s.tokens) vocab.add(t);
  mc.vocab_size = vocab.size();
  TrainConfig tc;
  tc.seed = 22;
  ModelParams params = init_params(mc, tc);
  auto one = score_pool(pool, params, vocab, 1.0, 1);
  auto four = score_pool(pool, params, vocab, 1.0, 4);
  REQUIRE(one.size() == four.size());
  for (std::size_t i = 0; i < one.size(); ++i) {
    CHECK(one[i].id == four[i].id);
    CHECK(one[i].probability == four[i].probability);  // bitwise
    CHECK(one[i].attention == four[i].attention);
    CHECK(one[i].word_labels == four[i].word_labels);
  }
}

TEST_CASE("scoring leaves the model untouched") {
  auto pool = synth_pool(23, 20);
  ModelConfig mc;
  Vocabulary vocab;
  for (const auto& s : pool)
    for (const auto& t : s.tokens) vocab.add(t);
  mc.vocab_size = vocab.size();
  TrainConfig tc;
  tc.seed = 23;
  ModelParams params = init_params(mc, tc);
  ModelParams snapshot = params;
  score_pool(pool, params, vocab, 1.0, 4);
  for (std::size_t i = 0; i < params.tensors.size(); ++i)
    CHECK(params.tensors[i].data == snapshot.tensors[i].data);
}

TEST_CASE("select_hard_candidates keeps the top-budget prefix") {
  std::vector<MiningCandidate> ranked(10);
  for (int i = 0; i < 10; ++i) {
    ranked[i].id = "c" + std::to_string(i);
    ranked[i].rank = i + 1;
    ranked[i].probability = 1.0 - 0.1 * i;
  }
  auto top3 = select_hard_candidates(ranked, 3);
  REQUIRE(top3.size() == 3);
  CHECK(top3[0].id == "c0");
  CHECK(top3[2].id == "c2");
  // prefix monotonicity
  auto top5 = select_hard_candidates(ranked, 5);
  for (std::size_t i = 0; i < 3; ++i) CHECK(top5[i].id == top3[i].id);
  CHECK(select_hard_candidates(ranked, 0).empty());
  CHECK_THROWS_AS(select_hard_candidates(ranked, 11), MiningError);
}

TEST_CASE("evaluate_detection") {
  auto truth_with = [](std::vector<std::vector<int>> labels) {
    std::vector<Sentence> truth;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      Sentence s;
      s.id = "s" + std::to_string(i);
      s.tokens = std::vector<std::string>(labels[i].size(), "w");
      s.word_labels = labels[i];
      s.sentence_label = derive_sentence_label(labels[i]);
      truth.push_back(std::move(s));
    }
    return truth;
  };
  auto predictions_for = [](const std::vector<Sentence>& truth,
                            std::vector<std::vector<int>> labels,
                            std::vector<double> probs) {
    std::vector<MiningCandidate> preds;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      MiningCandidate c;
      c.id = truth[i].id;
      c.tokens = truth[i].tokens;
      c.probability = probs[i];
      c.word_labels = labels[i];
      preds.push_back(std::move(c));
    }
    return preds;
  };

  SECTION("perfect predictions score 1 everywhere") {
    auto truth = truth_with({{0, 1, 0}, {0, 0, 0}});
    auto preds = predictions_for(truth, {{0, 1, 0}, {0, 0, 0}}, {0.9, 0.1});
    auto m = evaluate_detection(preds, truth);
    CHECK(m.sentence_accuracy == 1.0);
    CHECK(m.word_precision == 1.0);
    CHECK(m.word_recall == 1.0);
    CHECK(m.word_f1 == 1.0);
    CHECK(m.word_accuracy == 1.0);
  }
  SECTION("all-negative predictions have zero recall and f1") {
    auto truth = truth_with({{0, 1, 0}, {0, 0, 0}});
    auto preds = predictions_for(truth, {{0, 0, 0}, {0, 0, 0}}, {0.2, 0.1});
    auto m = evaluate_detection(preds, truth);
    CHECK(m.sentence_accuracy == 0.5);
    CHECK(m.word_recall == 0.0);
    CHECK(m.word_f1 == 0.0);
    CHECK(m.word_accuracy == Catch::Approx(5.0 / 6.0));
  }
  SECTION("mixed counts: 2 tp, 1 fp, 2 fn") {
    auto truth = truth_with({{1, 1, 0, 0}, {1, 1, 0, 0}});
    auto preds = predictions_for(truth, {{1, 0, 1, 0}, {1, 0, 0, 0}},
                                 {0.9, 0.9});
    auto m = evaluate_detection(preds, truth);
    CHECK(m.word_precision == Catch::Approx(2.0 / 3.0));
    CHECK(m.word_recall == Catch::Approx(0.5));
    CHECK(m.word_f1 == Catch::Approx(4.0 / 7.0));
    // harmonic-mean identity
    CHECK(m.word_f1 == Catch::Approx(2.0 * m.word_precision * m.word_recall /
                                     (m.word_precision + m.word_recall)));
  }
  SECTION("prediction order does not matter") {
    auto truth = truth_with({{0, 1}, {0, 0}, {1, 0}});
    auto preds =
        predictions_for(truth, {{0, 1}, {0, 0}, {1, 0}}, {0.8, 0.3, 0.9});
    std::swap(preds[0], preds[2]);
    auto m = evaluate_detection(preds, truth);
    CHECK(m.word_f1 == 1.0);
  }
  SECTION("mismatched ids or missing labels are rejected") {
    auto truth = truth_with({{0, 1}});
    auto preds = predictions_for(truth, {{0, 1}}, {0.8});
    preds[0].id = "other";
    CHECK_THROWS_AS(evaluate_detection(preds, truth), std::invalid_argument);
    auto unlabeled = truth;
    unlabeled[0].word_labels.reset();
    auto preds2 = predictions_for(truth, {{0, 1}}, {0.8});
    CHECK_THROWS_AS(evaluate_detection(preds2, unlabeled),
                    std::invalid_argument);
    CHECK_THROWS_AS(evaluate_detection(preds2, {}), std::invalid_argument);
  }
}

TEST_CASE("candidate and metrics formatting") {
  MiningCandidate c;
  c.rank = 1;
  c.id = "s000042";
  c.probability = 0.987654321987;
  c.tokens = {"foo", "bar"};
  c.attention = {0.75, 0.25};
  c.word_labels = {1, 0};
  const std::string text = format_candidates({c});
  CHECK(text ==
        "# rank\tid\tprobability\ttokens\tattention\tpredicted_word_labels\n"
        "1\ts000042\t0.987654322\tfoo bar\t0.750000,0.250000\t1,0\n");

  DetectionMetrics m;
  m.sentence_accuracy = 0.95;
  m.word_precision = 0.875;
  m.word_recall = 0.5;
  m.word_f1 = 2.0 * 0.875 * 0.5 / (0.875 + 0.5);
  m.word_accuracy = 0.9;
  CHECK(format_metrics(m) ==
        "sentence_acc=0.9500\nword_p=0.8750\nword_r=0.5000\nword_f=0.6364\n"
        "word_acc=0.9000\n");
}

TEST_CASE("run_pipeline") {
  auto pool = synth_pool(31, 300);
  MiningConfig mining;
  mining.seed_subset_size = 100;
  mining.budget = 20;
  ModelConfig mc;
  TrainConfig tc;
  tc.seed = 31;
  tc.max_epochs = 10;

  SECTION("deterministic across identical runs, metrics on labeled pool") {
    auto r1 = run_pipeline(pool, mining, mc, tc);
    auto r2 = run_pipeline(pool, mining, mc, tc);
    REQUIRE(r1.candidates.size() == mining.budget);
    REQUIRE(r1.has_metrics);
    REQUIRE(r1.candidates.size() == r2.candidates.size());
    for (std::size_t i = 0; i < r1.candidates.size(); ++i) {
      CHECK(r1.candidates[i].id == r2.candidates[i].id);
      CHECK(r1.candidates[i].probability == r2.candidates[i].probability);
    }
    CHECK(format_metrics(r1.metrics) == format_metrics(r2.metrics));

    // seed subset is excluded from scoring
    auto seed_subset = sort_and_sample(pool, mining.seed_subset_size);
    std::set<std::string> seed_ids;
    for (const auto& s : seed_subset) seed_ids.insert(s.id);
    for (const auto& c : r1.candidates) CHECK_FALSE(seed_ids.count(c.id));
  }

  SECTION("unlabeled pool yields candidates but no metrics") {
    auto unlabeled = pool;
    // strip labels everywhere except the seed subset
    auto seed_subset = sort_and_sample(pool, mining.seed_subset_size);
    std::set<std::string> seed_ids;
    for (const auto& s : seed_subset) seed_ids.insert(s.id);
    for (auto& s : unlabeled)
      if (!seed_ids.count(s.id)) {
        s.sentence_label.reset();
        s.word_labels.reset();
      }
    auto r = run_pipeline(unlabeled, mining, mc, tc);
    CHECK(r.candidates.size() == mining.budget);
    CHECK_FALSE(r.has_metrics);
  }

  SECTION("explicit labeled training set scores the whole pool") {
    auto labeled = synth_pool(32, 150);
    for (auto& s : labeled) s.id = "train-" + s.id;
    auto r = run_pipeline(pool, mining, mc, tc, &labeled);
    CHECK(r.candidates.size() == mining.budget);
    std::set<std::string> pool_ids;
    for (const auto& s : pool) pool_ids.insert(s.id);
    for (const auto& c : r.candidates) CHECK(pool_ids.count(c.id));
  }

  SECTION("bad configuration") {
    MiningConfig bad = mining;
    bad.budget = 500;
    CHECK_THROWS_AS(run_pipeline(pool, bad, mc, tc), MiningError);
    CHECK_THROWS_AS(run_pipeline({}, mining, mc, tc), MiningError);
  }
}
