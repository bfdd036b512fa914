// Hard-sample mining: stationary-interval seed-subset selection from a
// length-sorted pool, detector-based scoring and ranking of unlabeled
// sentences, hard-candidate export, and sentence/word detection metrics.
#pragma once

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "milmine/common.hpp"
#include "milmine/data.hpp"
#include "milmine/model.hpp"
#include "milmine/training.hpp"

namespace milmine {

struct MiningCandidate {
  std::string id;
  std::vector<std::string> tokens;
  double probability = 0.0;
  Vec attention;                     // per word
  std::vector<int> word_labels;      // predicted key words
  int rank = 0;                      // 1-based
};

struct MiningConfig {
  std::size_t seed_subset_size = 0;
  std::size_t budget = 0;
  double keyword_threshold = 1.0;
  bool two_stage = false;
  int threads = 1;
};

struct DetectionMetrics {
  double sentence_accuracy = 0.0;
  double word_precision = 0.0;
  double word_recall = 0.0;
  double word_f1 = 0.0;
  double word_accuracy = 0.0;
};

// Seed subset: sort the pool by token count ascending (ties by id),
// then take every floor(n/k)-th element starting at index 0.
inline std::vector<Sentence> sort_and_sample(std::vector<Sentence> pool,
                                             std::size_t k) {
  if (k == 0 || k > pool.size())
    throw std::invalid_argument("sort_and_sample: k must be in [1, pool size]");
  std::sort(pool.begin(), pool.end(), [](const Sentence& a, const Sentence& b) {
    if (a.tokens.size() != b.tokens.size())
      return a.tokens.size() < b.tokens.size();
    return a.id < b.id;
  });
  const std::size_t stride = pool.size() / k;
  std::vector<Sentence> out;
  out.reserve(k);
  for (std::size_t i = 0; out.size() < k; i += stride) out.push_back(pool[i]);
  return out;
}

// Scores every sentence with the detector, attaches attention and
// key-word predictions, and ranks by descending probability (ties by id
// lexicographic). A sentence predicted negative gets all-zero word
// labels. Read-only in the model; safe to fan out across threads.
inline std::vector<MiningCandidate> score_pool(
    const std::vector<Sentence>& pool, const ModelParams& params,
    const Vocabulary& vocab, double keyword_threshold, int threads = 1) {
  if (pool.empty()) throw std::invalid_argument("score_pool: empty pool");
  const int T = params.config.window_width;
  std::vector<MiningCandidate> out(pool.size());
  auto score_range = [&](std::size_t begin, std::size_t step) {
    for (std::size_t i = begin; i < pool.size(); i += step) {
      const Sentence& s = pool[i];
      Bag bag = window_sentence(s, T, vocab);
      auto [pred, cache] = forward(bag, params);
      MiningCandidate c;
      c.id = s.id;
      c.tokens = s.tokens;
      c.probability = pred.sentence_prob;
      c.attention = pred.attention;
      c.word_labels = pred.sentence_prob >= 0.5
                          ? predict_key_words(pred.attention, keyword_threshold)
                          : std::vector<int>(s.tokens.size(), 0);
      out[i] = std::move(c);
    }
  };
  if (threads <= 1) {
    score_range(0, 1);
  } else {
    std::vector<std::thread> workers;
    for (int t = 0; t < threads; ++t)
      workers.emplace_back(score_range, static_cast<std::size_t>(t),
                           static_cast<std::size_t>(threads));
    for (auto& w : workers) w.join();
  }
  std::sort(out.begin(), out.end(),
            [](const MiningCandidate& a, const MiningCandidate& b) {
              if (a.probability != b.probability)
                return a.probability > b.probability;
              return a.id < b.id;
            });
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i].rank = static_cast<int>(i) + 1;
  return out;
}

inline std::vector<MiningCandidate> select_hard_candidates(
    const std::vector<MiningCandidate>& ranked, std::size_t budget) {
  if (budget > ranked.size())
    throw MiningError("select_hard_candidates: budget exceeds candidate list");
  return {ranked.begin(), ranked.begin() + budget};
}

// Sentence accuracy over sentences; P/R/F and accuracy over the word-level
// positive (error) class. Ground truth must carry word labels.
inline DetectionMetrics evaluate_detection(
    const std::vector<MiningCandidate>& predictions,
    const std::vector<Sentence>& truth) {
  if (predictions.size() != truth.size())
    throw std::invalid_argument(
        "evaluate_detection: prediction/truth size mismatch");
  {
    std::vector<const Sentence*> sorted_truth;
    sorted_truth.reserve(truth.size());
    for (const auto& s : truth) sorted_truth.push_back(&s);
    std::sort(sorted_truth.begin(), sorted_truth.end(),
              [](const Sentence* a, const Sentence* b) { return a->id < b->id; });
    std::vector<const MiningCandidate*> sorted_pred;
    sorted_pred.reserve(predictions.size());
    for (const auto& p : predictions) sorted_pred.push_back(&p);
    std::sort(sorted_pred.begin(), sorted_pred.end(),
              [](const MiningCandidate* a, const MiningCandidate* b) {
                return a->id < b->id;
              });
    long tp = 0, fp = 0, fn = 0, tn = 0;
    long correct_sentences = 0;
    for (std::size_t i = 0; i < sorted_truth.size(); ++i) {
      const Sentence& t = *sorted_truth[i];
      const MiningCandidate& p = *sorted_pred[i];
      if (t.id != p.id)
        throw std::invalid_argument("evaluate_detection: id mismatch at " +
                                    t.id + " vs " + p.id);
      if (!t.sentence_label || !t.word_labels)
        throw std::invalid_argument(
            "evaluate_detection: ground truth lacks labels for " + t.id);
      const int pred_sentence = p.probability >= 0.5 ? 1 : 0;
      if (pred_sentence == *t.sentence_label) ++correct_sentences;
      for (std::size_t j = 0; j < t.word_labels->size(); ++j) {
        const int y = (*t.word_labels)[j];
        const int yhat = p.word_labels.at(j);
        if (y == 1 && yhat == 1) ++tp;
        else if (y == 0 && yhat == 1) ++fp;
        else if (y == 1 && yhat == 0) ++fn;
        else ++tn;
      }
    }
    DetectionMetrics m;
    m.sentence_accuracy =
        static_cast<double>(correct_sentences) / static_cast<double>(truth.size());
    m.word_precision = tp + fp > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
    m.word_recall = tp + fn > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
    m.word_f1 = m.word_precision + m.word_recall > 0.0
                    ? 2.0 * m.word_precision * m.word_recall /
                          (m.word_precision + m.word_recall)
                    : 0.0;
    const long total = tp + fp + fn + tn;
    m.word_accuracy =
        total > 0 ? static_cast<double>(tp + tn) / static_cast<double>(total)
                  : 0.0;
    return m;
  }
}

// Candidate file: one line per candidate,
// rank<TAB>id<TAB>probability<TAB>tokens<TAB>attention<TAB>predicted_word_labels
inline std::string format_candidates(const std::vector<MiningCandidate>& cands) {
  std::string out =
      "# rank\tid\tprobability\ttokens\tattention\tpredicted_word_labels\n";
  char buf[64];
  for (const auto& c : cands) {
    out += std::to_string(c.rank);
    out += '\t';
    out += c.id;
    std::snprintf(buf, sizeof buf, "\t%.9f\t", c.probability);
    out += buf;
    for (std::size_t i = 0; i < c.tokens.size(); ++i) {
      if (i) out += ' ';
      out += c.tokens[i];
    }
    out += '\t';
    for (std::size_t i = 0; i < c.attention.size(); ++i) {
      std::snprintf(buf, sizeof buf, i ? ",%.6f" : "%.6f", c.attention[i]);
      out += buf;
    }
    out += '\t';
    for (std::size_t i = 0; i < c.word_labels.size(); ++i) {
      if (i) out += ',';
      out += std::to_string(c.word_labels[i]);
    }
    out += '\n';
  }
  return out;
}

inline void write_candidates(const std::vector<MiningCandidate>& cands,
                             const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write candidate file: " + path);
  out << format_candidates(cands);
  if (!out) throw IoError("write failed: " + path);
}

// Metrics report: flat key=value lines, 4 decimal digits.
inline std::string format_metrics(const DetectionMetrics& m) {
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "sentence_acc=%.4f\nword_p=%.4f\nword_r=%.4f\nword_f=%.4f\n"
                "word_acc=%.4f\n",
                m.sentence_accuracy, m.word_precision, m.word_recall, m.word_f1,
                m.word_accuracy);
  return buf;
}

inline void write_metrics(const DetectionMetrics& m, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write metrics report: " + path);
  out << format_metrics(m);
  if (!out) throw IoError("write failed: " + path);
}

struct PipelineResult {
  std::vector<MiningCandidate> candidates;
  DetectionMetrics metrics;
  bool has_metrics = false;
  TrainHistory history;
  ModelParams model;
};

// End-to-end mining: pick the seed subset by stationary-interval
// sampling (its labels stand in for the domain expert), train the
// detector on it, score the rest of the pool, and keep the top-budget
// candidates. When the scored pool carries ground-truth labels a
// metrics report is produced as well. When `labeled` is non-null it is
// used as the training set instead of the seed subset.
inline PipelineResult run_pipeline(const std::vector<Sentence>& pool,
                                   const MiningConfig& mining_cfg,
                                   ModelConfig model_cfg,
                                   const TrainConfig& train_cfg,
                                   const std::vector<Sentence>* labeled = nullptr) {
  if (pool.empty()) throw MiningError("run_pipeline: empty pool");
  std::vector<Sentence> train_set;
  std::vector<Sentence> score_set;
  if (labeled) {
    train_set = *labeled;
    score_set = pool;
  } else {
    train_set = sort_and_sample(pool, mining_cfg.seed_subset_size);
    std::vector<std::string> seed_ids;
    for (const auto& s : train_set) seed_ids.push_back(s.id);
    std::sort(seed_ids.begin(), seed_ids.end());
    for (const auto& s : pool)
      if (!std::binary_search(seed_ids.begin(), seed_ids.end(), s.id))
        score_set.push_back(s);
  }
  for (const auto& s : train_set)
    if (!s.sentence_label)
      throw MiningError(
          "run_pipeline: training sentences lack labels (sentence " + s.id +
          "); mining needs a labeled seed subset");
  if (score_set.empty()) throw MiningError("run_pipeline: nothing to score");
  if (mining_cfg.budget > score_set.size())
    throw MiningError("run_pipeline: budget exceeds pool size");

  BagDataset train_ds = make_dataset(train_set, model_cfg.window_width);
  model_cfg.vocab_size = train_ds.vocab.size();

  PipelineResult result{{}, {}, false, {}, make_params(model_cfg)};
  if (mining_cfg.two_stage) {
    TwoStageResult two = train_two_stage(train_ds, model_cfg, train_cfg);
    result.model = std::move(two.params);
    result.history = std::move(two.stage2_history);
  } else {
    auto [params, history] = train(train_ds, model_cfg, train_cfg);
    result.model = std::move(params);
    result.history = std::move(history);
  }

  auto ranked = score_pool(score_set, result.model, train_ds.vocab,
                           mining_cfg.keyword_threshold, mining_cfg.threads);
  result.candidates = select_hard_candidates(ranked, mining_cfg.budget);

  bool labeled_pool = true;
  for (const auto& s : score_set)
    if (!s.sentence_label || !s.word_labels) labeled_pool = false;
  if (labeled_pool) {
    result.metrics = evaluate_detection(ranked, score_set);
    result.has_metrics = true;
  }
  return result;
}

}  // namespace milmine
