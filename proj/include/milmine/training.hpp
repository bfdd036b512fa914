// Training loop: uniform init, Adam with gradient clipping, learning
// rate halving against a held-out loss, bag-level losses for both
// heads, and the two-stage discriminative training strategy (stage 1
// optimizes the SVM objective jointly with the embedder and attention,
// stage 2 trains the classifier with cross-entropy on frozen features).
#pragma once

#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "milmine/core_math.hpp"
#include "milmine/data.hpp"
#include "milmine/model.hpp"
#include "milmine/rng.hpp"

namespace milmine {

struct TrainConfig {
  std::uint64_t seed = 0;
  double init_range = 0.05;
  double learning_rate = 0.001;
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

  void validate() const {
    if (clip_lo >= clip_hi)
      throw std::invalid_argument("TrainConfig: clip_lo must be < clip_hi");
    if (lr_halving_threshold <= 0.0 || lr_halving_threshold >= 1.0)
      throw std::invalid_argument(
          "TrainConfig: lr_halving_threshold must be in (0,1)");
    if (holdout_fraction <= 0.0 || holdout_fraction >= 1.0)
      throw std::invalid_argument(
          "TrainConfig: holdout_fraction must be in (0,1)");
    if (learning_rate <= 0.0 || init_range <= 0.0 || max_epochs < 0)
      throw std::invalid_argument("TrainConfig: bad learning rate/init/epochs");
    LossConfig{beta, penalty_c}.validate();
  }
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double holdout_loss = 0.0;
  double learning_rate = 0.0;
  double seconds = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
};

// History log: epoch<TAB>train_loss<TAB>holdout_loss<TAB>lr, one line
// per epoch.
inline std::string format_history(const TrainHistory& h) {
  std::string out;
  char buf[160];
  for (const auto& e : h.epochs) {
    std::snprintf(buf, sizeof buf, "%d\t%.9f\t%.9f\t%.9g\n", e.epoch,
                  e.train_loss, e.holdout_loss, e.learning_rate);
    out += buf;
  }
  return out;
}

// Every parameter i.i.d. uniform on [-init_range, +init_range] from the
// "init" sub-stream of the seed.
inline ModelParams init_params(const ModelConfig& model_cfg,
                               const TrainConfig& train_cfg,
                               const std::string& stream = "init") {
  train_cfg.validate();
  ModelParams p = make_params(model_cfg);
  Rng rng(train_cfg.seed, stream);
  for (auto& t : p.tensors)
    for (double& v : t.data)
      v = rng.uniform(-train_cfg.init_range, train_cfg.init_range);
  return p;
}

// Elementwise clamp; idempotent.
inline void clip_gradients(ModelParams& grads, double lo, double hi) {
  for (auto& t : grads.tensors)
    for (double& v : t.data) v = std::min(std::max(v, lo), hi);
}

struct AdamState {
  Vec m;
  Vec v;

  explicit AdamState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}
};

// One bias-corrected Adam update on flat parameter/gradient vectors.
inline void adam_step(Vec& params, const Vec& grads, AdamState& state, int t,
                      double lr, double beta1, double beta2, double eps) {
  if (params.size() != grads.size() || params.size() != state.m.size())
    throw std::invalid_argument("adam_step: shape mismatch");
  if (t < 1) throw std::invalid_argument("adam_step: step index must be >= 1");
  const double bc1 = 1.0 - std::pow(beta1, t);
  const double bc2 = 1.0 - std::pow(beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * grads[i];
    state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * grads[i] * grads[i];
    const double mhat = state.m[i] / bc1;
    const double vhat = state.v[i] / bc2;
    params[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

// lr is halved iff the held-out loss failed to decrease by at least the
// threshold fraction; an exactly-threshold decrease keeps lr unchanged.
inline double maybe_halve_lr(const TrainHistory& history, double lr,
                             double threshold) {
  if (history.epochs.size() < 2)
    throw std::invalid_argument("maybe_halve_lr: need at least 2 epochs");
  const double prev = history.epochs[history.epochs.size() - 2].holdout_loss;
  const double cur = history.epochs.back().holdout_loss;
  return cur > (1.0 - threshold) * prev ? lr / 2.0 : lr;
}

// Per-bag loss and its derivative w.r.t. the head pre-activation.
// softmax head: binary cross-entropy with clamped probabilities;
// svm head: c * g(1 - margin * Y) with Y in {-1,+1} mapped from {0,1}.
// The 1/2 ||w||^2 regularizer is not part of the per-bag term; the
// trainer spreads it across the bags of each epoch.
inline std::pair<double, double> bag_loss(const BagPrediction& pred, int label,
                                          Head head,
                                          const LossConfig& loss_cfg) {
  if (label != 0 && label != 1)
    throw std::invalid_argument("bag_loss: label must be 0 or 1");
  loss_cfg.validate();
  if (head == Head::kSoftmaxHead) {
    const double eps = 1e-12;
    const double p = std::min(std::max(pred.sentence_prob, eps), 1.0 - eps);
    const double loss = label == 1 ? -std::log(p) : -std::log(1.0 - p);
    const double dpreact = sigmoid(pred.preact) - static_cast<double>(label);
    return {loss, dpreact};
  }
  const double y = label == 1 ? 1.0 : -1.0;
  const double z = 1.0 - pred.margin * y;
  const double loss = loss_cfg.c * generalized_logistic_loss(z, loss_cfg.beta);
  const double dpreact =
      -y * loss_cfg.c * generalized_logistic_loss_grad(z, loss_cfg.beta);
  return {loss, dpreact};
}

// Full-batch SVM stage objective: 1/2 ||w||^2 + sum_n c g(1 - m_n Y_n).
inline double svm_objective(const std::vector<Bag>& bags,
                            const ModelParams& params,
                            const LossConfig& loss_cfg) {
  const auto& w = params.at("svm_w").data;
  double obj = 0.5 * dot(w, w);
  for (const auto& bag : bags) {
    auto [pred, cache] = forward(bag, params);
    obj += bag_loss(pred, *bag.label, Head::kSvmHead, loss_cfg).first;
  }
  return obj;
}

// Full-batch gradient of svm_objective.
inline ModelParams svm_objective_gradient(const std::vector<Bag>& bags,
                                          const ModelParams& params,
                                          const LossConfig& loss_cfg) {
  ModelParams total = params.zeros_like();
  for (const auto& bag : bags) {
    auto [pred, cache] = forward(bag, params);
    const double dpreact =
        bag_loss(pred, *bag.label, Head::kSvmHead, loss_cfg).second;
    ModelParams g = backward(cache, params, dpreact);
    for (std::size_t i = 0; i < total.tensors.size(); ++i)
      for (std::size_t k = 0; k < total.tensors[i].data.size(); ++k)
        total.tensors[i].data[k] += g.tensors[i].data[k];
  }
  const auto& w = params.at("svm_w").data;
  auto& gw = total.at("svm_w").data;
  for (std::size_t i = 0; i < w.size(); ++i) gw[i] += w[i];
  return total;
}

namespace detail {

inline void require_labels(const std::vector<Bag>& bags, const char* who) {
  if (bags.empty())
    throw std::invalid_argument(std::string(who) + ": empty dataset");
  for (const auto& b : bags)
    if (!b.label)
      throw std::invalid_argument(std::string(who) +
                                  ": dataset contains unlabeled sentences");
}

}  // namespace detail

// Core loop shared by train() and the two training stages: per-bag
// (online) updates in seeded shuffle order, holdout loss per epoch, lr
// halving, best-holdout checkpointing. `frozen` tensors receive zero
// gradient. Returns the parameters with the lowest holdout loss seen
// (the initial parameters if max_epochs is 0).
inline std::pair<ModelParams, TrainHistory> train_loop(
    const std::vector<Bag>& bags, ModelParams params,
    const TrainConfig& cfg, const std::set<std::string>& frozen,
    const std::string& shuffle_stream = "shuffle") {
  cfg.validate();
  detail::require_labels(bags, "train");
  const LossConfig loss_cfg{cfg.beta, cfg.penalty_c};
  const Head head = params.config.head;
  const bool svm = head == Head::kSvmHead;

  // Deterministic holdout split of the bag indices.
  std::vector<std::size_t> order(bags.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  {
    Rng rng(cfg.seed, "holdout");
    rng.shuffle(order);
  }
  const std::size_t n_holdout = std::max<std::size_t>(
      1, static_cast<std::size_t>(
             std::llround(cfg.holdout_fraction *
                          static_cast<double>(bags.size()))));
  if (n_holdout >= bags.size())
    throw std::invalid_argument("train: dataset too small for holdout split");
  std::vector<std::size_t> holdout(order.begin(), order.begin() + n_holdout);
  std::vector<std::size_t> train_idx(order.begin() + n_holdout, order.end());

  Vec flat = params.to_flat();
  AdamState state(flat.size());
  Rng shuffle_rng(cfg.seed, shuffle_stream);
  const double lr0 = cfg.learning_rate;
  double lr = lr0;
  int step = 0;

  TrainHistory history;
  ModelParams best = params;
  double best_holdout = std::numeric_limits<double>::infinity();
  const double n_train = static_cast<double>(train_idx.size());

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    shuffle_rng.shuffle(train_idx);
    double train_loss = 0.0;
    for (std::size_t idx : train_idx) {
      const Bag& bag = bags[idx];
      auto [pred, cache] = forward(bag, params);
      auto [loss, dpreact] = bag_loss(pred, *bag.label, head, loss_cfg);
      train_loss += loss;
      ModelParams grads = backward(cache, params, dpreact);
      if (svm) {
        // Spread the 1/2 ||w||^2 regularizer over the epoch's bags.
        const auto& w = params.at("svm_w").data;
        auto& gw = grads.at("svm_w").data;
        for (std::size_t i = 0; i < w.size(); ++i) gw[i] += w[i] / n_train;
      }
      for (auto& t : grads.tensors)
        if (frozen.count(t.name))
          std::fill(t.data.begin(), t.data.end(), 0.0);
      clip_gradients(grads, cfg.clip_lo, cfg.clip_hi);
      const Vec gflat = grads.to_flat();
      adam_step(flat, gflat, state, ++step, lr, cfg.adam_beta1, cfg.adam_beta2,
                cfg.adam_eps);
      params.from_flat(flat);
    }
    train_loss /= n_train;

    double holdout_loss = 0.0;
    for (std::size_t idx : holdout) {
      auto [pred, cache] = forward(bags[idx], params);
      holdout_loss += bag_loss(pred, *bags[idx].label, head, loss_cfg).first;
    }
    holdout_loss /= static_cast<double>(holdout.size());

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = train_loss;
    rec.holdout_loss = holdout_loss;
    rec.learning_rate = lr;
    rec.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    history.epochs.push_back(rec);

    if (holdout_loss < best_holdout) {
      best_holdout = holdout_loss;
      best = params;
    }
    if (history.epochs.size() >= 2)
      lr = maybe_halve_lr(history, lr, cfg.lr_halving_threshold);
    if (lr < lr0 / 1024.0) break;  // halving alone never terminates
  }
  return {std::move(best), std::move(history)};
}

inline std::pair<ModelParams, TrainHistory> train(const BagDataset& dataset,
                                                  const ModelConfig& model_cfg,
                                                  const TrainConfig& train_cfg) {
  ModelParams params = init_params(model_cfg, train_cfg);
  return train_loop(dataset.bags, std::move(params), train_cfg, {});
}

// Tensors held fixed in stage 2 (unless stage2_finetune_all).
inline std::set<std::string> stage2_frozen_tensors() {
  return {"token_embedding", "conv_kernel", "conv_bias",
          "attn_w",          "attn_V",      "attn_U"};
}

struct TwoStageResult {
  ModelParams params;          // stage-2 (softmax head) model
  TrainHistory stage1_history;
  TrainHistory stage2_history;
};

// Stage 1 trains the SVM objective jointly with the embedder, attention
// and representation layers; stage 2 freezes the embedder and attention
// and trains the classifier with cross-entropy, its final layer freshly
// initialized.
inline TwoStageResult train_two_stage(const BagDataset& dataset,
                                      const ModelConfig& model_cfg,
                                      const TrainConfig& train_cfg) {
  ModelConfig stage1_cfg = model_cfg;
  stage1_cfg.head = Head::kSvmHead;
  ModelParams stage1_init = init_params(stage1_cfg, train_cfg, "init");
  auto [stage1_params, stage1_history] =
      train_loop(dataset.bags, std::move(stage1_init), train_cfg, {}, "shuffle");

  ModelConfig stage2_cfg = model_cfg;
  stage2_cfg.head = Head::kSoftmaxHead;
  ModelParams stage2_params = init_params(stage2_cfg, train_cfg, "init-stage2");
  for (auto& t : stage2_params.tensors)
    if (stage1_params.has(t.name) && t.name != "svm_w" && t.name != "svm_b")
      t.data = stage1_params.at(t.name).data;
  // cls_W3 / cls_b3 keep their fresh initialization.

  std::set<std::string> frozen;
  if (!train_cfg.stage2_finetune_all) frozen = stage2_frozen_tensors();
  auto [stage2_result, stage2_history] = train_loop(
      dataset.bags, std::move(stage2_params), train_cfg, frozen, "shuffle2");
  return {std::move(stage2_result), std::move(stage1_history),
          std::move(stage2_history)};
}

}  // namespace milmine
