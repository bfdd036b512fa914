// Finite-difference verification of the hand-written backward pass,
// shared by the check-grad subcommand, the unit tests and the
// acceptance suite. Draws tiny random models and bags, re-sampling any
// draw that lands near a kink (sparsemax support boundary, ReLU zero
// crossing) where the subgradient choice and central differences
// legitimately disagree.
#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "milmine/core_math.hpp"
#include "milmine/model.hpp"
#include "milmine/rng.hpp"
#include "milmine/training.hpp"

namespace milmine {

struct GradCheckResult {
  Pooling pooling;
  Head head;
  std::uint64_t seed = 0;
  // max relative error per parameter tensor, in declaration order
  std::vector<std::pair<std::string, double>> per_tensor;
  double max_rel_error = 0.0;
  int resamples = 0;
};

namespace detail {

inline bool near_kink(const BagForwardCache& cache, const ModelConfig& cfg,
                      double margin) {
  if (cfg.pooling != Pooling::kSoftmaxAttention) {
    const double tau = sparsemax_tau(cache.scores);
    for (double z : cache.scores)
      if (std::abs(z - tau) < margin) return true;
  }
  for (const auto& u : cache.preact_u)
    for (double v : u)
      if (std::abs(v) < margin) return true;
  for (double v : cache.z1)
    if (std::abs(v) < margin) return true;
  for (double v : cache.z2)
    if (std::abs(v) < margin) return true;
  return false;
}

inline double rel_error(double a, double b) {
  return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

}  // namespace detail

// Runs one forward/backward gradient check on a random tiny model.
// `corrupt` deliberately perturbs one analytic gradient entry; it exists
// as a negative control for the check itself.
inline GradCheckResult check_gradients(Pooling pooling, Head head,
                                       std::uint64_t seed, double eps = 1e-5,
                                       bool corrupt = false) {
  ModelConfig cfg;
  cfg.vocab_size = 12;
  cfg.window_width = 3;
  cfg.token_embed_dim = 4;
  cfg.instance_feature_dim = 6;
  cfg.attention_dim = 5;
  cfg.hidden1 = 7;
  cfg.hidden2 = 4;
  cfg.pooling = pooling;
  cfg.head = head;

  GradCheckResult result;
  result.pooling = pooling;
  result.head = head;
  result.seed = seed;

  const LossConfig loss_cfg{1.0, 1.0};
  const double kink_margin = 1e-3;
  for (int attempt = 0;; ++attempt) {
    if (attempt > 200)
      throw std::runtime_error("check_gradients: cannot find a kink-free draw");
    Rng rng(seed + static_cast<std::uint64_t>(attempt) * 7919, "grad-check");
    ModelParams params = make_params(cfg);
    // Larger-than-training init so sparsemax actually sparsifies and the
    // activations are well away from zero.
    for (auto& t : params.tensors)
      for (double& v : t.data) v = rng.uniform(-0.8, 0.8);

    Bag bag;
    bag.id = "g";
    const int n_instances = 2 + static_cast<int>(rng.below(4));  // 2..5
    for (int j = 0; j < n_instances; ++j) {
      std::vector<int> window(cfg.window_width);
      for (auto& id : window)
        id = static_cast<int>(rng.below(cfg.vocab_size));
      bag.instances.push_back(std::move(window));
    }
    const int label = static_cast<int>(rng.below(2));

    auto [pred, cache] = forward(bag, params);
    if (detail::near_kink(cache, cfg, kink_margin)) {
      ++result.resamples;
      continue;
    }

    auto [loss, dpreact] = bag_loss(pred, label, head, loss_cfg);
    (void)loss;
    ModelParams analytic = backward(cache, params, dpreact);
    if (corrupt) analytic.tensors.front().data.front() += 1e-2;

    const Vec flat = params.to_flat();
    auto f = [&](const Vec& x) {
      ModelParams probe = params;
      probe.from_flat(x);
      auto [pr, ca] = forward(bag, probe);
      return bag_loss(pr, label, head, loss_cfg).first;
    };
    const Vec fd = finite_difference_gradient(f, flat, eps);
    const Vec an = analytic.to_flat();

    std::size_t off = 0;
    result.max_rel_error = 0.0;
    result.per_tensor.clear();
    for (const auto& t : params.tensors) {
      double worst = 0.0;
      for (std::size_t i = 0; i < t.size(); ++i)
        worst = std::max(worst, detail::rel_error(an[off + i], fd[off + i]));
      result.per_tensor.emplace_back(t.name, worst);
      result.max_rel_error = std::max(result.max_rel_error, worst);
      off += t.size();
    }
    return result;
  }
}

}  // namespace milmine
