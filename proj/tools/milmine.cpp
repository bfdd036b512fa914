// milmine command line tool: synthetic corpus generation, detector
// training, evaluation, gradient checking and hard-sample mining.
//
// Exit codes: 0 success, 1 check failure, 2 I/O, 3 data validation,
// 4 checkpoint mismatch, 5 bad mining parameters, 64 usage.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "milmine/milmine.hpp"

namespace {

constexpr int kExitCheckFailure = 1;
constexpr int kExitIo = 2;
constexpr int kExitValidation = 3;
constexpr int kExitCheckpoint = 4;
constexpr int kExitMining = 5;
constexpr int kExitUsage = 64;

constexpr const char* kVersion = "milmine 1.0 (checkpoint format 1)";

using milmine::Head;
using milmine::Pooling;

// Resolved-configuration sidecar written next to each run's outputs.
class Sidecar {
 public:
  void set(const std::string& key, const std::string& value) {
    entries_.emplace_back(key, value);
  }
  void set(const std::string& key, double value) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.9g", value);
    set(key, std::string(buf));
  }
  void set(const std::string& key, std::uint64_t value) {
    set(key, std::to_string(value));
  }
  void set(const std::string& key, int value) { set(key, std::to_string(value)); }
  void set(const std::string& key, bool value) {
    set(key, std::string(value ? "true" : "false"));
  }

  void write(const std::string& output_path) const {
    const std::string path = output_path + ".config";
    std::ofstream out(path, std::ios::binary);
    if (!out) throw milmine::IoError("cannot write sidecar: " + path);
    for (const auto& [k, v] : entries_) out << k << '=' << v << '\n';
    if (!out) throw milmine::IoError("write failed: " + path);
  }

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

Pooling parse_pooling(const std::string& s) {
  if (s == "attention") return Pooling::kSoftmaxAttention;
  if (s == "sparse") return Pooling::kSparseAttention;
  if (s == "gated-sparse") return Pooling::kGatedSparseAttention;
  throw CLI::ValidationError("--pooling",
                             "must be attention, sparse or gated-sparse");
}

struct ModelFlags {
  std::string pooling = "attention";
  int window = 3;
  int token_embed_dim = 16;
  int feature_dim = 32;
  int attention_dim = 16;
  int hidden1 = 32;
  int hidden2 = 16;
  bool svm_on_pooled = false;

  void attach(CLI::App* cmd) {
    cmd->add_option("--pooling", pooling,
                    "Pooling variant: attention | sparse | gated-sparse")
        ->capture_default_str();
    cmd->add_option("--window", window, "Context window width T (odd)")
        ->capture_default_str();
    cmd->add_option("--token-embed-dim", token_embed_dim,
                    "Token embedding dimension")
        ->capture_default_str();
    cmd->add_option("--feature-dim", feature_dim,
                    "Instance feature dimension D")
        ->capture_default_str();
    cmd->add_option("--attention-dim", attention_dim,
                    "Attention hidden dimension")
        ->capture_default_str();
    cmd->add_option("--hidden1", hidden1, "First classifier hidden dim")
        ->capture_default_str();
    cmd->add_option("--hidden2", hidden2, "Second classifier hidden dim")
        ->capture_default_str();
    cmd->add_flag("--svm-on-pooled", svm_on_pooled,
                  "SVM weight acts directly on the pooled feature");
  }

  milmine::ModelConfig to_config(int vocab_size) const {
    milmine::ModelConfig cfg;
    cfg.vocab_size = vocab_size;
    cfg.window_width = window;
    cfg.token_embed_dim = token_embed_dim;
    cfg.instance_feature_dim = feature_dim;
    cfg.attention_dim = attention_dim;
    cfg.hidden1 = hidden1;
    cfg.hidden2 = hidden2;
    cfg.pooling = parse_pooling(pooling);
    cfg.svm_on_pooled = svm_on_pooled;
    return cfg;
  }

  void echo(Sidecar& sc) const {
    sc.set("pooling", pooling);
    sc.set("window", window);
    sc.set("token-embed-dim", token_embed_dim);
    sc.set("feature-dim", feature_dim);
    sc.set("attention-dim", attention_dim);
    sc.set("hidden1", hidden1);
    sc.set("hidden2", hidden2);
    sc.set("svm-on-pooled", svm_on_pooled);
  }
};

struct TrainFlags {
  std::uint64_t seed = 0;
  double init_range = 0.05;
  double lr = 0.001;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double clip_lo = -10.0;
  double clip_hi = 10.0;
  double lr_halving_threshold = 0.10;
  int max_epochs = 30;
  double penalty_c = 1.0;
  double beta = 1.0;
  double holdout_fraction = 0.2;
  bool stage2_finetune_all = false;

  void attach(CLI::App* cmd) {
    cmd->add_option("--seed", seed, "Master random seed")->capture_default_str();
    cmd->add_option("--init-range", init_range, "Uniform init half-range")
        ->capture_default_str();
    cmd->add_option("--lr", lr, "Adam learning rate")->capture_default_str();
    cmd->add_option("--adam-beta1", adam_beta1, "Adam beta1")
        ->capture_default_str();
    cmd->add_option("--adam-beta2", adam_beta2, "Adam beta2")
        ->capture_default_str();
    cmd->add_option("--adam-eps", adam_eps, "Adam epsilon")
        ->capture_default_str();
    cmd->add_option("--clip-lo", clip_lo, "Gradient clip lower bound")
        ->capture_default_str();
    cmd->add_option("--clip-hi", clip_hi, "Gradient clip upper bound")
        ->capture_default_str();
    cmd->add_option("--lr-halving-threshold", lr_halving_threshold,
                    "Required fractional holdout-loss decrease")
        ->capture_default_str();
    cmd->add_option("--max-epochs", max_epochs, "Maximum training epochs")
        ->capture_default_str();
    cmd->add_option("--penalty-c", penalty_c, "SVM penalty factor c")
        ->capture_default_str();
    cmd->add_option("--beta", beta, "Generalized logistic sharpness")
        ->capture_default_str();
    cmd->add_option("--holdout-fraction", holdout_fraction,
                    "Fraction of training bags held out for LR scheduling")
        ->capture_default_str();
    cmd->add_flag("--stage2-finetune-all", stage2_finetune_all,
                  "Fine-tune all tensors in stage 2 instead of freezing");
  }

  milmine::TrainConfig to_config() const {
    milmine::TrainConfig cfg;
    cfg.seed = seed;
    cfg.init_range = init_range;
    cfg.learning_rate = lr;
    cfg.adam_beta1 = adam_beta1;
    cfg.adam_beta2 = adam_beta2;
    cfg.adam_eps = adam_eps;
    cfg.clip_lo = clip_lo;
    cfg.clip_hi = clip_hi;
    cfg.lr_halving_threshold = lr_halving_threshold;
    cfg.max_epochs = max_epochs;
    cfg.penalty_c = penalty_c;
    cfg.beta = beta;
    cfg.holdout_fraction = holdout_fraction;
    cfg.stage2_finetune_all = stage2_finetune_all;
    return cfg;
  }

  void echo(Sidecar& sc) const {
    sc.set("seed", seed);
    sc.set("init-range", init_range);
    sc.set("lr", lr);
    sc.set("adam-beta1", adam_beta1);
    sc.set("adam-beta2", adam_beta2);
    sc.set("adam-eps", adam_eps);
    sc.set("clip-lo", clip_lo);
    sc.set("clip-hi", clip_hi);
    sc.set("lr-halving-threshold", lr_halving_threshold);
    sc.set("max-epochs", max_epochs);
    sc.set("penalty-c", penalty_c);
    sc.set("beta", beta);
    sc.set("holdout-fraction", holdout_fraction);
    sc.set("stage2-finetune-all", stage2_finetune_all);
  }
};

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw milmine::IoError("cannot write file: " + path);
  out << content;
  if (!out) throw milmine::IoError("write failed: " + path);
}

int run(int argc, char** argv) {
  CLI::App app{"Weakly supervised ASR-error detection and hard-sample mining"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  // --- gen-data ---
  auto* gen = app.add_subcommand("gen-data",
                                 "Generate a synthetic corpus with planted "
                                 "error tokens and full word labels");
  milmine::SynthConfig synth;
  std::string gen_out;
  gen->add_option("--seed", synth.seed, "Master random seed")
      ->capture_default_str();
  gen->add_option("--vocab-size", synth.vocab_size,
                  "Distinct token types (including error tokens)")
      ->capture_default_str();
  gen->add_option("--sentences", synth.num_sentences, "Number of sentences")
      ->required();
  gen->add_option("--min-len", synth.min_len, "Minimum sentence length")
      ->capture_default_str();
  gen->add_option("--max-len", synth.max_len, "Maximum sentence length")
      ->capture_default_str();
  gen->add_option("--error-tokens", synth.error_token_count,
                  "Distinct designated error tokens")
      ->capture_default_str();
  gen->add_option("--error-fraction", synth.error_sentence_fraction,
                  "Fraction of sentences that receive planted errors")
      ->capture_default_str();
  gen->add_option("--errors-min", synth.errors_min,
                  "Minimum planted errors per error sentence")
      ->capture_default_str();
  gen->add_option("--errors-max", synth.errors_max,
                  "Maximum planted errors per error sentence")
      ->capture_default_str();
  gen->add_option("--confusable-tokens", synth.confusable_token_count,
                  "Distinct confusable tokens shared by clean and error text")
      ->capture_default_str();
  gen->add_option("--confusion-rate", synth.confusion_rate,
                  "Probability a clean position emits a confusable token")
      ->capture_default_str();
  gen->add_flag("--contextual-errors", synth.contextual_errors,
                "Plant errors as runs of confusable tokens");
  gen->add_option("--error-run-min", synth.error_run_min,
                  "Minimum contextual error run length")
      ->capture_default_str();
  gen->add_option("--error-run-max", synth.error_run_max,
                  "Maximum contextual error run length")
      ->capture_default_str();
  gen->add_option("--lone-plant-fraction", synth.confusable_planted_fraction,
                  "Fraction of contextual plants that are lone confusable "
                  "tokens")
      ->capture_default_str();
  gen->add_option("--out", gen_out, "Output corpus path")->required();

  // --- train ---
  auto* train_cmd = app.add_subcommand(
      "train", "Train an error-detection model on a labeled corpus");
  ModelFlags train_model;
  TrainFlags train_train;
  std::string train_corpus, train_out, train_history;
  bool train_dt = false;
  train_cmd->add_option("--corpus", train_corpus, "Labeled corpus path")
      ->required();
  train_cmd->add_option("--out", train_out, "Checkpoint output path")
      ->required();
  train_cmd->add_option("--history", train_history,
                        "History log path (default: <out>.history)");
  train_cmd->add_flag("--dt", train_dt,
                      "Two-stage discriminative training (SVM stage, then "
                      "classifier stage)");
  train_model.attach(train_cmd);
  train_train.attach(train_cmd);

  // --- eval ---
  auto* eval_cmd = app.add_subcommand(
      "eval", "Evaluate a checkpoint on a labeled corpus");
  std::string eval_ckpt, eval_corpus, eval_out;
  double eval_threshold = 1.0;
  int eval_threads = 1;
  eval_cmd->add_option("--checkpoint", eval_ckpt, "Checkpoint path")
      ->required();
  eval_cmd->add_option("--corpus", eval_corpus, "Labeled corpus path")
      ->required();
  eval_cmd->add_option("--out", eval_out, "Metrics report path")->required();
  eval_cmd
      ->add_option("--keyword-threshold", eval_threshold,
                   "Key-word attention threshold relative to uniform")
      ->capture_default_str();
  eval_cmd->add_option("--threads", eval_threads, "Scoring threads")
      ->capture_default_str();

  // --- mine ---
  auto* mine_cmd = app.add_subcommand(
      "mine", "Mine hard candidates from an unlabeled pool");
  ModelFlags mine_model;
  TrainFlags mine_train;
  std::string mine_pool, mine_train_corpus, mine_out, mine_report;
  std::size_t mine_subset = 500, mine_budget = 0;
  double mine_threshold = 1.0;
  int mine_threads = 1;
  bool mine_dt = false;
  mine_cmd->add_option("--pool", mine_pool, "Pool corpus path")->required();
  mine_cmd->add_option("--train-corpus", mine_train_corpus,
                       "Labeled training corpus (otherwise a seed subset of "
                       "the pool is sampled)");
  mine_cmd
      ->add_option("--seed-subset-size", mine_subset,
                   "Seed subset size when sampling from the pool")
      ->capture_default_str();
  mine_cmd->add_option("--budget", mine_budget, "Candidates to export")
      ->required();
  mine_cmd
      ->add_option("--keyword-threshold", mine_threshold,
                   "Key-word attention threshold relative to uniform")
      ->capture_default_str();
  mine_cmd->add_option("--threads", mine_threads, "Scoring threads")
      ->capture_default_str();
  mine_cmd->add_flag("--dt", mine_dt, "Two-stage discriminative training");
  mine_cmd->add_option("--out-candidates", mine_out, "Candidate file path")
      ->required();
  mine_cmd->add_option("--out-report", mine_report,
                       "Metrics report path (default: <out-candidates>.report)");
  mine_model.attach(mine_cmd);
  mine_train.attach(mine_cmd);

  // --- check-grad ---
  auto* check_cmd = app.add_subcommand(
      "check-grad",
      "Verify the hand-written backward pass against finite differences");
  std::string check_pooling, check_head;
  int check_seeds = 5;
  double check_eps = 1e-5, check_tol = 1e-4;
  bool check_corrupt = false;
  check_cmd->add_option("--pooling", check_pooling,
                        "Restrict to one pooling variant");
  check_cmd->add_option("--head", check_head, "Restrict to one head");
  check_cmd->add_option("--seeds", check_seeds, "Random draws per combination")
      ->capture_default_str();
  check_cmd->add_option("--eps", check_eps, "Finite difference step")
      ->capture_default_str();
  check_cmd->add_option("--tol", check_tol, "Relative error tolerance")
      ->capture_default_str();
  check_cmd
      ->add_flag("--corrupt-vjp", check_corrupt,
                 "Deliberately corrupt one gradient entry (negative control)")
      ->group("");  // hidden test hook

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  if (gen->parsed()) {
    auto sentences = milmine::generate_synthetic_sentences(synth);
    milmine::save_corpus(sentences, gen_out);
    Sidecar sc;
    sc.set("subcommand", std::string("gen-data"));
    sc.set("seed", synth.seed);
    sc.set("vocab-size", synth.vocab_size);
    sc.set("sentences", synth.num_sentences);
    sc.set("min-len", synth.min_len);
    sc.set("max-len", synth.max_len);
    sc.set("error-tokens", synth.error_token_count);
    sc.set("error-fraction", synth.error_sentence_fraction);
    sc.set("errors-min", synth.errors_min);
    sc.set("errors-max", synth.errors_max);
    sc.set("confusable-tokens", synth.confusable_token_count);
    sc.set("confusion-rate", synth.confusion_rate);
    sc.set("contextual-errors", synth.contextual_errors ? 1 : 0);
    sc.set("error-run-min", synth.error_run_min);
    sc.set("error-run-max", synth.error_run_max);
    sc.set("lone-plant-fraction", synth.confusable_planted_fraction);
    sc.set("out", gen_out);
    sc.write(gen_out);
    std::cout << "wrote " << sentences.size() << " sentences to " << gen_out
              << "\n";
    return 0;
  }

  if (train_cmd->parsed()) {
    auto sentences = milmine::load_corpus(train_corpus);
    auto dataset = milmine::make_dataset(std::move(sentences),
                                         train_model.window);
    milmine::ModelConfig model_cfg =
        train_model.to_config(dataset.vocab.size());
    milmine::TrainConfig tc = train_train.to_config();
    std::string history_text;
    milmine::ModelParams params = milmine::make_params(model_cfg);
    if (train_dt) {
      auto result = milmine::train_two_stage(dataset, model_cfg, tc);
      params = std::move(result.params);
      history_text = "# stage 1 (svm)\n" +
                     milmine::format_history(result.stage1_history) +
                     "# stage 2 (classifier)\n" +
                     milmine::format_history(result.stage2_history);
    } else {
      auto [p, history] = milmine::train(dataset, model_cfg, tc);
      params = std::move(p);
      history_text = milmine::format_history(history);
    }
    milmine::save_checkpoint(params, train_out);
    const std::string history_path =
        train_history.empty() ? train_out + ".history" : train_history;
    write_text_file(history_path, history_text);
    Sidecar sc;
    sc.set("subcommand", std::string("train"));
    sc.set("corpus", train_corpus);
    sc.set("out", train_out);
    sc.set("history", history_path);
    sc.set("dt", train_dt);
    train_model.echo(sc);
    train_train.echo(sc);
    sc.write(train_out);
    std::cout << "wrote checkpoint " << train_out << " and history "
              << history_path << "\n";
    return 0;
  }

  if (eval_cmd->parsed()) {
    milmine::ModelParams params = milmine::load_checkpoint(eval_ckpt);
    auto sentences = milmine::load_corpus(eval_corpus);
    for (const auto& s : sentences) {
      if (!s.sentence_label)
        throw milmine::ValidationError("eval corpus must be fully labeled (" +
                                       s.id + " is unlabeled)");
      if (!s.word_labels)
        throw milmine::ValidationError(
            "word metrics requested but ground truth has no word labels (" +
            s.id + ")");
    }
    // Rebuild the training-side vocabulary deterministically: the
    // checkpoint fixes the id space, the eval corpus maps through it.
    milmine::Vocabulary vocab;
    for (const auto& s : sentences)
      for (const auto& tok : s.tokens) vocab.add(tok);
    if (vocab.size() > params.config.vocab_size)
      throw milmine::CheckpointError(
          "corpus vocabulary exceeds checkpoint vocabulary (" +
          std::to_string(vocab.size()) + " > " +
          std::to_string(params.config.vocab_size) + ")");
    auto scored = milmine::score_pool(sentences, params, vocab, eval_threshold,
                                      eval_threads);
    auto metrics = milmine::evaluate_detection(scored, sentences);
    milmine::write_metrics(metrics, eval_out);
    Sidecar sc;
    sc.set("subcommand", std::string("eval"));
    sc.set("checkpoint", eval_ckpt);
    sc.set("corpus", eval_corpus);
    sc.set("out", eval_out);
    sc.set("keyword-threshold", eval_threshold);
    sc.set("threads", eval_threads);
    sc.write(eval_out);
    std::cout << milmine::format_metrics(metrics);
    return 0;
  }

  if (mine_cmd->parsed()) {
    auto pool = milmine::load_corpus(mine_pool);
    milmine::MiningConfig mc;
    mc.seed_subset_size = mine_subset;
    mc.budget = mine_budget;
    mc.keyword_threshold = mine_threshold;
    mc.two_stage = mine_dt;
    mc.threads = mine_threads;
    milmine::ModelConfig model_cfg = mine_model.to_config(2);
    milmine::TrainConfig tc = mine_train.to_config();
    std::vector<milmine::Sentence> labeled;
    const bool have_labeled = !mine_train_corpus.empty();
    if (have_labeled) labeled = milmine::load_corpus(mine_train_corpus);
    auto result = milmine::run_pipeline(pool, mc, model_cfg, tc,
                                        have_labeled ? &labeled : nullptr);
    milmine::write_candidates(result.candidates, mine_out);
    const std::string report_path =
        mine_report.empty() ? mine_out + ".report" : mine_report;
    if (result.has_metrics)
      milmine::write_metrics(result.metrics, report_path);
    else
      write_text_file(report_path,
                      "# pool has no ground-truth labels; candidates await "
                      "external annotation\n");
    Sidecar sc;
    sc.set("subcommand", std::string("mine"));
    sc.set("pool", mine_pool);
    sc.set("train-corpus", mine_train_corpus);
    sc.set("seed-subset-size", static_cast<std::uint64_t>(mine_subset));
    sc.set("budget", static_cast<std::uint64_t>(mine_budget));
    sc.set("keyword-threshold", mine_threshold);
    sc.set("threads", mine_threads);
    sc.set("dt", mine_dt);
    sc.set("out-candidates", mine_out);
    sc.set("out-report", report_path);
    mine_model.echo(sc);
    mine_train.echo(sc);
    sc.write(mine_out);
    std::cout << "wrote " << result.candidates.size() << " candidates to "
              << mine_out << "\n";
    return 0;
  }

  // check-grad
  std::vector<Pooling> poolings = {Pooling::kSoftmaxAttention,
                                   Pooling::kSparseAttention,
                                   Pooling::kGatedSparseAttention};
  std::vector<Head> heads = {Head::kSoftmaxHead, Head::kSvmHead};
  if (!check_pooling.empty()) poolings = {parse_pooling(check_pooling)};
  if (!check_head.empty()) {
    if (check_head == "softmax")
      heads = {Head::kSoftmaxHead};
    else if (check_head == "svm")
      heads = {Head::kSvmHead};
    else
      throw CLI::ValidationError("--head", "must be softmax or svm");
  }
  bool all_pass = true;
  for (Pooling p : poolings) {
    for (Head h : heads) {
      double worst = 0.0;
      std::map<std::string, double> per_tensor;
      for (int s = 0; s < check_seeds; ++s) {
        auto r = milmine::check_gradients(p, h, 1000 + s, check_eps,
                                          check_corrupt);
        worst = std::max(worst, r.max_rel_error);
        for (const auto& [name, err] : r.per_tensor)
          per_tensor[name] = std::max(per_tensor[name], err);
      }
      const bool pass = worst < check_tol;
      all_pass = all_pass && pass;
      std::printf("%-14s %-8s max_rel_err=%.3e  %s\n", milmine::pooling_name(p),
                  milmine::head_name(h), worst, pass ? "ok" : "FAIL");
      if (!pass)
        for (const auto& [name, err] : per_tensor)
          if (err >= check_tol)
            std::printf("    %-16s %.3e\n", name.c_str(), err);
    }
  }
  return all_pass ? 0 : kExitCheckFailure;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const milmine::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const milmine::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const milmine::CheckpointError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitCheckpoint;
  } catch (const milmine::MiningError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitMining;
  } catch (const milmine::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
}
