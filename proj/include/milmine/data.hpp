// Corpus model: sentences, vocabulary, context-window bags, the corpus
// file format, deterministic splits, and the synthetic generator that
// plants error tokens with full ground-truth word labels.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "milmine/common.hpp"
#include "milmine/rng.hpp"

namespace milmine {

struct Sentence {
  std::string id;
  std::vector<std::string> tokens;
  std::optional<int> sentence_label;               // 0/1, absent = unlabeled
  std::optional<std::vector<int>> word_labels;     // per token, 0/1
};

// Sentence label rule: 0 iff every word label is 0, otherwise 1.
inline int derive_sentence_label(const std::vector<int>& word_labels) {
  if (word_labels.empty())
    throw std::invalid_argument("derive_sentence_label: empty label list");
  for (int y : word_labels)
    if (y != 0) return 1;
  return 0;
}

class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;

  Vocabulary() : tokens_{"<pad>", "<unk>"} {}

  // First-seen insertion; returns the id.
  int add(const std::string& token) {
    auto it = map_.find(token);
    if (it != map_.end()) return it->second;
    const int id = static_cast<int>(tokens_.size());
    map_.emplace(token, id);
    tokens_.push_back(token);
    return id;
  }

  // Lookup; unknown tokens map to kUnk (mining runs on unseen vocabulary).
  int id_of(const std::string& token) const {
    auto it = map_.find(token);
    return it == map_.end() ? kUnk : it->second;
  }

  const std::string& token(int id) const { return tokens_.at(id); }
  int size() const { return static_cast<int>(tokens_.size()); }

 private:
  std::unordered_map<std::string, int> map_;
  std::vector<std::string> tokens_;
};

struct Bag {
  std::string id;
  std::vector<std::vector<int>> instances;  // N windows of T token ids
  std::optional<int> label;
  std::optional<std::vector<int>> word_labels;
};

// One context window per token, centered, zero-padded at the edges.
inline Bag window_sentence(const Sentence& s, int window_width,
                           const Vocabulary& vocab) {
  if (window_width < 1 || window_width % 2 == 0)
    throw std::invalid_argument("window_sentence: window width must be odd");
  if (s.tokens.empty())
    throw std::invalid_argument("window_sentence: empty sentence");
  const int n = static_cast<int>(s.tokens.size());
  const int half = (window_width - 1) / 2;
  Bag bag;
  bag.id = s.id;
  bag.label = s.sentence_label;
  bag.word_labels = s.word_labels;
  bag.instances.resize(n);
  for (int j = 0; j < n; ++j) {
    auto& window = bag.instances[j];
    window.resize(window_width, Vocabulary::kPad);
    for (int t = -half; t <= half; ++t) {
      const int pos = j + t;
      if (pos >= 0 && pos < n) window[t + half] = vocab.id_of(s.tokens[pos]);
    }
  }
  return bag;
}

struct BagDataset {
  std::vector<Sentence> sentences;
  std::vector<Bag> bags;
  Vocabulary vocab;
  int window_width = 0;
};

// Builds bags for all sentences. When fixed_vocab is null the vocabulary
// is built first-seen from the sentences; otherwise tokens are mapped
// through the given vocabulary (unknowns allowed).
inline BagDataset make_dataset(std::vector<Sentence> sentences, int window_width,
                               const Vocabulary* fixed_vocab = nullptr) {
  BagDataset ds;
  ds.window_width = window_width;
  if (fixed_vocab) {
    ds.vocab = *fixed_vocab;
  } else {
    for (const auto& s : sentences)
      for (const auto& tok : s.tokens) ds.vocab.add(tok);
  }
  ds.bags.reserve(sentences.size());
  for (const auto& s : sentences)
    ds.bags.push_back(window_sentence(s, window_width, ds.vocab));
  ds.sentences = std::move(sentences);
  return ds;
}

namespace detail {

inline std::vector<std::string> split_on(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

inline void validate_sentence(const Sentence& s, int line) {
  if (s.tokens.empty()) throw ValidationError("sentence has no tokens", line);
  if (s.word_labels) {
    if (s.word_labels->size() != s.tokens.size())
      throw ValidationError("word label count does not match token count", line);
    if (!s.sentence_label)
      throw ValidationError("word labels present but sentence label missing",
                            line);
    const int derived = derive_sentence_label(*s.word_labels);
    if (derived != *s.sentence_label)
      throw ValidationError(
          "sentence label " + std::to_string(*s.sentence_label) +
              " inconsistent with word labels (a sentence is positive iff "
              "some word label is 1)",
          line);
  }
}

}  // namespace detail

// Corpus file format: UTF-8, one sentence per line, LF endings, four
// TAB-separated fields:
//   id <TAB> sentence_label <TAB> token1 token2 ... <TAB> word_labels
// sentence_label in {0,1,-}; word_labels a comma-separated 0/1 list of
// token-count length, or `-` when absent. Lines starting with `#` are
// comments.
inline std::vector<Sentence> parse_corpus(std::istream& in) {
  std::vector<Sentence> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    auto fields = detail::split_on(line, '\t');
    if (fields.size() != 4)
      throw ParseError("expected 4 TAB-separated fields, got " +
                           std::to_string(fields.size()),
                       lineno);
    Sentence s;
    s.id = fields[0];
    if (s.id.empty()) throw ParseError("empty sentence id", lineno);
    if (fields[1] == "0")
      s.sentence_label = 0;
    else if (fields[1] == "1")
      s.sentence_label = 1;
    else if (fields[1] != "-")
      throw ParseError("sentence label must be 0, 1 or -", lineno);
    std::istringstream toks(fields[2]);
    std::string tok;
    while (toks >> tok) s.tokens.push_back(tok);
    if (fields[3] != "-") {
      std::vector<int> labels;
      for (const auto& part : detail::split_on(fields[3], ',')) {
        if (part == "0")
          labels.push_back(0);
        else if (part == "1")
          labels.push_back(1);
        else
          throw ParseError("word labels must be comma-separated 0/1", lineno);
      }
      s.word_labels = std::move(labels);
    }
    detail::validate_sentence(s, lineno);
    out.push_back(std::move(s));
  }
  return out;
}

inline std::vector<Sentence> load_corpus(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open corpus file: " + path);
  return parse_corpus(in);
}

inline std::string format_sentence(const Sentence& s) {
  std::string line = s.id;
  line += '\t';
  line += s.sentence_label ? std::to_string(*s.sentence_label) : "-";
  line += '\t';
  for (std::size_t i = 0; i < s.tokens.size(); ++i) {
    if (i) line += ' ';
    line += s.tokens[i];
  }
  line += '\t';
  if (s.word_labels) {
    for (std::size_t i = 0; i < s.word_labels->size(); ++i) {
      if (i) line += ',';
      line += std::to_string((*s.word_labels)[i]);
    }
  } else {
    line += '-';
  }
  line += '\n';
  return line;
}

inline void save_corpus(const std::vector<Sentence>& sentences,
                        const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write corpus file: " + path);
  for (const auto& s : sentences) out << format_sentence(s);
  if (!out) throw IoError("write failed: " + path);
}

// Deterministic seeded partition; |first| = round(fraction * n).
inline std::pair<std::vector<Sentence>, std::vector<Sentence>> split_corpus(
    const std::vector<Sentence>& sentences, double fraction,
    std::uint64_t seed) {
  if (fraction <= 0.0 || fraction >= 1.0)
    throw std::invalid_argument("split_corpus: fraction must be in (0,1)");
  const std::size_t n = sentences.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed, "split");
  rng.shuffle(order);
  const std::size_t na =
      static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  std::pair<std::vector<Sentence>, std::vector<Sentence>> parts;
  for (std::size_t i = 0; i < n; ++i) {
    if (i < na)
      parts.first.push_back(sentences[order[i]]);
    else
      parts.second.push_back(sentences[order[i]]);
  }
  return parts;
}

struct SynthConfig {
  std::uint64_t seed = 0;
  int vocab_size = 200;             // distinct token types generated
  int num_sentences = 1000;
  int min_len = 5;
  int max_len = 15;
  int error_token_count = 10;       // distinct designated error tokens
  double error_sentence_fraction = 0.3;
  int errors_min = 1;               // planted errors per error sentence
  int errors_max = 3;
  // Confusable tokens model recognition output that sounds like normal
  // speech: clean positions emit one with probability confusion_rate
  // (label 0), so their identity alone is an imperfect error signal.
  int confusable_token_count = 0;
  double confusion_rate = 0.0;
  // Contextual error mode. A planted error is a run of confusable
  // tokens, all labeled 1 (the recognizer garbled a region); the run
  // length is drawn uniformly from [error_run_min, error_run_max]. A
  // lone confusable token is weak evidence, a run is conclusive, and the
  // run is fully visible only from windows centered inside it, which
  // anchors attention to aligned windows. A confusable_planted_fraction
  // of plants are instead a lone confusable token (label 1),
  // indistinguishable from a benign one; they keep the task from being
  // perfectly separable.
  bool contextual_errors = false;
  int error_run_min = 3;
  int error_run_max = 3;
  double confusable_planted_fraction = 0.0;

  void validate() const {
    if (vocab_size < 2 || error_token_count < 1 ||
        error_token_count + confusable_token_count >= vocab_size)
      throw std::invalid_argument(
          "SynthConfig: need error + confusable token counts < vocab_size");
    if (num_sentences < 0 || min_len < 1 || max_len < min_len)
      throw std::invalid_argument("SynthConfig: bad sentence counts/lengths");
    if (error_sentence_fraction < 0.0 || error_sentence_fraction > 1.0)
      throw std::invalid_argument("SynthConfig: error fraction outside [0,1]");
    if (errors_min < 1 || errors_max < errors_min)
      throw std::invalid_argument("SynthConfig: bad errors-per-sentence range");
    if (confusion_rate < 0.0 || confusion_rate > 1.0 ||
        confusable_planted_fraction < 0.0 || confusable_planted_fraction > 1.0)
      throw std::invalid_argument("SynthConfig: confusable rates outside [0,1]");
    if ((confusion_rate > 0.0 || confusable_planted_fraction > 0.0 ||
         contextual_errors) &&
        confusable_token_count < 1)
      throw std::invalid_argument(
          "SynthConfig: confusable rates need confusable_token_count >= 1");
    if (contextual_errors && (error_run_min < 2 || error_run_max < error_run_min))
      throw std::invalid_argument(
          "SynthConfig: contextual error runs need 2 <= run_min <= run_max");
    if (contextual_errors && min_len < error_run_max)
      throw std::invalid_argument(
          "SynthConfig: contextual errors need min_len >= error_run_max");
  }
};

// Synthetic corpus with planted error tokens. Benign tokens follow a
// Zipf(1.0) frequency profile so attention cannot key on rarity alone;
// error tokens are distinct types that appear only at planted positions,
// confusable tokens appear on both sides of the label boundary. Exactly
// round(error_sentence_fraction * n) sentences carry errors.
inline std::vector<Sentence> generate_synthetic_sentences(const SynthConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed, "synth");
  const int benign_count =
      cfg.vocab_size - cfg.error_token_count - cfg.confusable_token_count;

  // Zipf cumulative over benign ranks.
  std::vector<double> cdf(benign_count);
  double total = 0.0;
  for (int i = 0; i < benign_count; ++i) total += 1.0 / (i + 1.0);
  double acc = 0.0;
  for (int i = 0; i < benign_count; ++i) {
    acc += 1.0 / (i + 1.0) / total;
    cdf[i] = acc;
  }
  auto draw_benign = [&]() {
    const double u = rng.uniform();
    const auto it = std::lower_bound(cdf.begin(), cdf.end(), u);
    return static_cast<int>(it - cdf.begin());
  };

  const int n = cfg.num_sentences;
  const int n_err = static_cast<int>(
      std::llround(cfg.error_sentence_fraction * static_cast<double>(n)));
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  rng.shuffle(order);
  std::vector<char> is_error(n, 0);
  for (int i = 0; i < n_err; ++i) is_error[order[i]] = 1;

  std::vector<Sentence> out;
  out.reserve(n);
  char idbuf[32];
  for (int i = 0; i < n; ++i) {
    Sentence s;
    std::snprintf(idbuf, sizeof idbuf, "s%06d", i);
    s.id = idbuf;
    const int len = cfg.min_len +
                    static_cast<int>(rng.below(cfg.max_len - cfg.min_len + 1));
    s.tokens.reserve(len);
    for (int t = 0; t < len; ++t) {
      if (cfg.confusion_rate > 0.0 && rng.uniform() < cfg.confusion_rate)
        s.tokens.push_back(
            "C" + std::to_string(rng.below(cfg.confusable_token_count)));
      else
        s.tokens.push_back("w" + std::to_string(draw_benign()));
    }
    std::vector<int> labels(len, 0);
    if (is_error[i]) {
      int k = cfg.errors_min +
              static_cast<int>(rng.below(cfg.errors_max - cfg.errors_min + 1));
      k = std::min(k, len);
      auto draw_confusable = [&]() {
        return "C" + std::to_string(rng.below(cfg.confusable_token_count));
      };
      std::vector<int> pos(len);
      for (int p = 0; p < len; ++p) pos[p] = p;
      rng.shuffle(pos);
      if (cfg.contextual_errors) {
        auto draw_run = [&]() {
          return cfg.error_run_min == cfg.error_run_max
                     ? cfg.error_run_min
                     : cfg.error_run_min +
                           static_cast<int>(rng.below(
                               cfg.error_run_max - cfg.error_run_min + 1));
        };
        int planted = 0;
        std::vector<char> occupied(len, 0);
        for (int p : pos) {
          if (planted >= k) break;
          const bool lone =
              cfg.confusable_planted_fraction > 0.0 &&
              rng.uniform() < cfg.confusable_planted_fraction;
          const int run = lone ? 1 : draw_run();
          const int lo = lone ? p : p - (run - 1) / 2;
          const int hi = lone ? p : p - (run - 1) / 2 + run - 1;
          if (lo < 0 || hi >= len) continue;
          bool free = true;
          for (int j = lo; j <= hi; ++j)
            if (occupied[j]) free = false;
          if (!free) continue;
          for (int j = lo; j <= hi; ++j) {
            s.tokens[j] = draw_confusable();
            occupied[j] = 1;
            labels[j] = 1;
          }
          ++planted;
        }
        // guarantee at least one plant so the sentence label holds
        if (planted == 0) {
          const int run = draw_run();
          const int start = static_cast<int>(rng.below(len - run + 1));
          for (int j = start; j < start + run; ++j) {
            s.tokens[j] = draw_confusable();
            labels[j] = 1;
          }
        }
      } else {
        for (int e = 0; e < k; ++e) {
          const int p = pos[e];
          if (cfg.confusable_planted_fraction > 0.0 &&
              rng.uniform() < cfg.confusable_planted_fraction)
            s.tokens[p] = draw_confusable();
          else
            s.tokens[p] =
                "E" + std::to_string(rng.below(cfg.error_token_count));
          labels[p] = 1;
        }
      }
    }
    s.word_labels = std::move(labels);
    s.sentence_label = derive_sentence_label(*s.word_labels);
    out.push_back(std::move(s));
  }
  return out;
}

inline BagDataset generate_synthetic_corpus(const SynthConfig& cfg,
                                            int window_width) {
  return make_dataset(generate_synthetic_sentences(cfg), window_width);
}

}  // namespace milmine
