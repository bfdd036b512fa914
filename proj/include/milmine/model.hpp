// The DMIL network family: token embedding + windowed convolutional
// instance embedder, three attention pooling variants (softmax
// attention, sparse attention, gated sparse attention), two classifier
// heads (3-layer softmax classifier, linear SVM head on the learned
// representation), with hand-written forward and backward passes over
// whole bags.
#pragma once

#include <cstring>
#include <optional>
#include <string>
#include <vector>

#include "milmine/core_math.hpp"
#include "milmine/data.hpp"

namespace milmine {

enum class Pooling { kSoftmaxAttention, kSparseAttention, kGatedSparseAttention };
enum class Head { kSoftmaxHead, kSvmHead };

inline const char* pooling_name(Pooling p) {
  switch (p) {
    case Pooling::kSoftmaxAttention: return "attention";
    case Pooling::kSparseAttention: return "sparse";
    case Pooling::kGatedSparseAttention: return "gated-sparse";
  }
  return "?";
}

inline const char* head_name(Head h) {
  return h == Head::kSoftmaxHead ? "softmax" : "svm";
}

struct ModelConfig {
  int vocab_size = 0;
  int window_width = 3;        // T, odd
  int token_embed_dim = 8;
  int instance_feature_dim = 16;  // D
  int attention_dim = 8;
  Pooling pooling = Pooling::kSoftmaxAttention;
  Head head = Head::kSoftmaxHead;
  int hidden1 = 16;            // classifier hidden dims
  int hidden2 = 8;
  bool svm_on_pooled = false;  // SVM weight acts on H directly instead of
                               // the classifier's penultimate representation

  void validate() const {
    if (vocab_size < 2) throw std::invalid_argument("vocab_size must be >= 2");
    if (window_width < 1 || window_width % 2 == 0)
      throw std::invalid_argument("window_width must be odd and >= 1");
    if (token_embed_dim < 1 || instance_feature_dim < 1 || attention_dim < 1 ||
        hidden1 < 1 || hidden2 < 1)
      throw std::invalid_argument("all model dimensions must be >= 1");
  }

  bool gated() const { return pooling == Pooling::kGatedSparseAttention; }
  bool has_classifier() const {
    return head == Head::kSoftmaxHead || !svm_on_pooled;
  }
  bool has_final_layer() const { return head == Head::kSoftmaxHead; }
  int svm_input_dim() const {
    return svm_on_pooled ? instance_feature_dim : hidden2;
  }
};

struct Tensor {
  std::string name;
  std::vector<std::size_t> shape;
  Vec data;

  std::size_t size() const { return data.size(); }
  Mat as_mat() const {
    Mat m(shape.at(0), shape.at(1));
    m.data = data;
    return m;
  }
};

// tensor += a b^T, with the tensor interpreted as a |a| x |b| matrix.
inline void add_outer(Tensor& t, const Vec& a, const Vec& b) {
  for (std::size_t i = 0; i < a.size(); ++i) {
    double* row = t.data.data() + i * b.size();
    for (std::size_t j = 0; j < b.size(); ++j) row[j] += a[i] * b[j];
  }
}

// All learnable parameters for one ModelConfig, stored as named tensors
// in a fixed declaration order (which is also the checkpoint order).
struct ModelParams {
  ModelConfig config;
  std::vector<Tensor> tensors;

  Tensor& at(const std::string& name) {
    for (auto& t : tensors)
      if (t.name == name) return t;
    throw std::invalid_argument("no parameter tensor named " + name);
  }
  const Tensor& at(const std::string& name) const {
    for (const auto& t : tensors)
      if (t.name == name) return t;
    throw std::invalid_argument("no parameter tensor named " + name);
  }
  bool has(const std::string& name) const {
    for (const auto& t : tensors)
      if (t.name == name) return true;
    return false;
  }

  std::size_t total_size() const {
    std::size_t n = 0;
    for (const auto& t : tensors) n += t.size();
    return n;
  }

  Vec to_flat() const {
    Vec flat;
    flat.reserve(total_size());
    for (const auto& t : tensors)
      flat.insert(flat.end(), t.data.begin(), t.data.end());
    return flat;
  }

  void from_flat(const Vec& flat) {
    if (flat.size() != total_size())
      throw std::invalid_argument("from_flat: size mismatch");
    std::size_t off = 0;
    for (auto& t : tensors) {
      std::copy(flat.begin() + off, flat.begin() + off + t.size(),
                t.data.begin());
      off += t.size();
    }
  }

  ModelParams zeros_like() const {
    ModelParams z = *this;
    for (auto& t : z.tensors) std::fill(t.data.begin(), t.data.end(), 0.0);
    return z;
  }
};

// Allocates zero parameters per the config layout.
inline ModelParams make_params(const ModelConfig& cfg) {
  cfg.validate();
  auto dims = [](std::initializer_list<std::size_t> d) {
    return std::vector<std::size_t>(d);
  };
  ModelParams p;
  p.config = cfg;
  auto add = [&](const std::string& name, std::vector<std::size_t> shape) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    p.tensors.push_back({name, std::move(shape), Vec(n, 0.0)});
  };
  const auto V = static_cast<std::size_t>(cfg.vocab_size);
  const auto E = static_cast<std::size_t>(cfg.token_embed_dim);
  const auto T = static_cast<std::size_t>(cfg.window_width);
  const auto D = static_cast<std::size_t>(cfg.instance_feature_dim);
  const auto A = static_cast<std::size_t>(cfg.attention_dim);
  const auto H1 = static_cast<std::size_t>(cfg.hidden1);
  const auto H2 = static_cast<std::size_t>(cfg.hidden2);
  add("token_embedding", dims({V, E}));
  add("conv_kernel", dims({D, T * E}));
  add("conv_bias", dims({D}));
  add("attn_w", dims({A}));
  add("attn_V", dims({A, D}));
  if (cfg.gated()) add("attn_U", dims({A, D}));
  if (cfg.has_classifier()) {
    add("cls_W1", dims({H1, D}));
    add("cls_b1", dims({H1}));
    add("cls_W2", dims({H2, H1}));
    add("cls_b2", dims({H2}));
  }
  if (cfg.has_final_layer()) {
    add("cls_W3", dims({1, H2}));
    add("cls_b3", dims({1}));
  }
  if (cfg.head == Head::kSvmHead) {
    add("svm_w", dims({static_cast<std::size_t>(cfg.svm_input_dim())}));
    add("svm_b", dims({1}));
  }
  return p;
}

struct BagPrediction {
  double sentence_prob = 0.0;  // probability the sentence contains an error
  Vec attention;               // simplex over instances
  double margin = 0.0;         // svm head only: w^T phi + b
  double preact = 0.0;         // head pre-activation (logit or margin)
};

// Every intermediate the backward pass needs.
struct BagForwardCache {
  std::vector<std::vector<int>> windows;  // token ids per instance
  std::vector<Vec> emb_flat;              // T*E per instance
  std::vector<Vec> preact_u;              // D, pre-ReLU
  std::vector<Vec> features;              // h_j, D
  std::vector<Vec> tanh_act;              // tanh(V h), A per instance
  std::vector<Vec> gate_act;              // sigmoid(U h), A (gated only)
  Vec scores;                             // e, N
  Vec attention;                          // a, N
  Vec pooled;                             // H, D
  Vec z1, r1, z2, r2;                     // classifier intermediates
  double preact = 0.0;
};

inline Vec embed_window(const std::vector<int>& window, const ModelParams& p,
                        Vec* out_flat, Vec* out_preact) {
  const auto& cfg = p.config;
  if (static_cast<int>(window.size()) != cfg.window_width)
    throw std::invalid_argument("embed_instance: window length != T");
  const int E = cfg.token_embed_dim;
  Vec flat(window.size() * E);
  const auto& emb = p.at("token_embedding");
  for (std::size_t t = 0; t < window.size(); ++t) {
    const int id = window[t];
    if (id < 0 || id >= cfg.vocab_size)
      throw std::invalid_argument("embed_instance: token id out of vocabulary");
    std::copy(emb.data.begin() + static_cast<std::size_t>(id) * E,
              emb.data.begin() + static_cast<std::size_t>(id + 1) * E,
              flat.begin() + t * E);
  }
  const Mat kernel = p.at("conv_kernel").as_mat();
  const auto& bias = p.at("conv_bias").data;
  Vec u = matvec(kernel, flat);
  for (std::size_t d = 0; d < u.size(); ++d) u[d] += bias[d];
  Vec h(u.size());
  for (std::size_t d = 0; d < u.size(); ++d) h[d] = std::max(u[d], 0.0);
  if (out_flat) *out_flat = std::move(flat);
  if (out_preact) *out_preact = std::move(u);
  return h;
}

// Phi: embedding lookup, full-window 1-D convolution to D channels, ReLU.
inline Vec embed_instance(const std::vector<int>& window, const ModelParams& p) {
  return embed_window(window, p, nullptr, nullptr);
}

// e_j = w^T tanh(V h_j), gated: e_j = w^T (tanh(V h_j) .* sigmoid(U h_j)).
inline Vec attention_scores(const std::vector<Vec>& features,
                            const ModelParams& p, bool gated,
                            std::vector<Vec>* out_tanh = nullptr,
                            std::vector<Vec>* out_gate = nullptr) {
  if (features.empty())
    throw std::invalid_argument("attention_scores: no instances");
  const auto& w = p.at("attn_w").data;
  const Mat V = p.at("attn_V").as_mat();
  Mat U;
  if (gated) U = p.at("attn_U").as_mat();
  Vec scores(features.size());
  if (out_tanh) out_tanh->resize(features.size());
  if (out_gate) out_gate->resize(features.size());
  for (std::size_t j = 0; j < features.size(); ++j) {
    if (features[j].size() != V.cols)
      throw std::invalid_argument("attention_scores: feature dim mismatch");
    Vec t = matvec(V, features[j]);
    for (double& v : t) v = std::tanh(v);
    double e = 0.0;
    if (gated) {
      Vec g = matvec(U, features[j]);
      for (double& v : g) v = sigmoid(v);
      for (std::size_t k = 0; k < t.size(); ++k) e += w[k] * t[k] * g[k];
      if (out_gate) (*out_gate)[j] = std::move(g);
    } else {
      e = dot(w, t);
    }
    if (out_tanh) (*out_tanh)[j] = std::move(t);
    scores[j] = e;
  }
  return scores;
}

// H = sum_j a_j h_j.
inline Vec pool(const std::vector<Vec>& features, const Vec& attention) {
  if (features.size() != attention.size())
    throw std::invalid_argument("pool: attention length != instance count");
  Vec out(features.front().size(), 0.0);
  for (std::size_t j = 0; j < features.size(); ++j)
    for (std::size_t d = 0; d < out.size(); ++d)
      out[d] += attention[j] * features[j][d];
  return out;
}

// Runs the classifier / SVM head on the pooled feature; fills the cache
// intermediates and the prediction's preact/margin/prob.
inline void classify(const Vec& pooled, const ModelParams& p,
                     BagPrediction& pred, BagForwardCache& cache) {
  const auto& cfg = p.config;
  const Vec* representation = &pooled;
  if (cfg.has_classifier()) {
    const Mat W1 = p.at("cls_W1").as_mat();
    const auto& b1 = p.at("cls_b1").data;
    cache.z1 = matvec(W1, pooled);
    for (std::size_t i = 0; i < cache.z1.size(); ++i) cache.z1[i] += b1[i];
    cache.r1 = cache.z1;
    for (double& v : cache.r1) v = std::max(v, 0.0);

    const Mat W2 = p.at("cls_W2").as_mat();
    const auto& b2 = p.at("cls_b2").data;
    cache.z2 = matvec(W2, cache.r1);
    for (std::size_t i = 0; i < cache.z2.size(); ++i) cache.z2[i] += b2[i];
    cache.r2 = cache.z2;
    for (double& v : cache.r2) v = std::max(v, 0.0);
    representation = &cache.r2;
  }
  if (cfg.head == Head::kSoftmaxHead) {
    const auto& W3 = p.at("cls_W3").data;
    pred.preact = dot(W3, cache.r2) + p.at("cls_b3").data[0];
    pred.sentence_prob = sigmoid(pred.preact);
  } else {
    const auto& w = p.at("svm_w").data;
    pred.preact = dot(w, *representation) + p.at("svm_b").data[0];
    pred.margin = pred.preact;
    // Margin mapped through a sigmoid for ranking purposes only.
    pred.sentence_prob = sigmoid(pred.preact);
  }
  cache.preact = pred.preact;
}

// Standalone variant for unit tests and simple callers.
inline BagPrediction classify(const Vec& pooled, const ModelParams& p) {
  BagPrediction pred;
  BagForwardCache cache;
  classify(pooled, p, pred, cache);
  return pred;
}

inline std::pair<BagPrediction, BagForwardCache> forward(
    const Bag& bag, const ModelParams& p) {
  if (bag.instances.empty()) throw std::invalid_argument("forward: empty bag");
  const auto& cfg = p.config;
  BagForwardCache cache;
  cache.windows = bag.instances;
  const std::size_t n = bag.instances.size();
  cache.emb_flat.resize(n);
  cache.preact_u.resize(n);
  cache.features.resize(n);
  for (std::size_t j = 0; j < n; ++j)
    cache.features[j] =
        embed_window(bag.instances[j], p, &cache.emb_flat[j], &cache.preact_u[j]);
  cache.scores = attention_scores(cache.features, p, cfg.gated(),
                                  &cache.tanh_act,
                                  cfg.gated() ? &cache.gate_act : nullptr);
  cache.attention = cfg.pooling == Pooling::kSoftmaxAttention
                        ? softmax(cache.scores)
                        : sparsemax(cache.scores);
  cache.pooled = pool(cache.features, cache.attention);
  BagPrediction pred;
  pred.attention = cache.attention;
  classify(cache.pooled, p, pred, cache);
  return {pred, cache};
}

// Reverse-mode pass. `dpreact` is dLoss/d(head pre-activation), i.e. the
// logit for the softmax head or the margin for the SVM head. Returns
// gradients with the same tensor structure as the parameters.
inline ModelParams backward(const BagForwardCache& cache, const ModelParams& p,
                            double dpreact) {
  const auto& cfg = p.config;
  const std::size_t n = cache.features.size();
  if (n == 0 || cache.attention.size() != n)
    throw std::invalid_argument("backward: cache does not match a forward call");
  ModelParams g = p.zeros_like();

  // Head and classifier.
  Vec gH(cfg.instance_feature_dim, 0.0);
  Vec gr2;  // gradient reaching r2, if the classifier layers are present
  if (cfg.head == Head::kSvmHead) {
    const auto& w = p.at("svm_w").data;
    const Vec& phi = cfg.svm_on_pooled ? cache.pooled : cache.r2;
    auto& gw = g.at("svm_w").data;
    for (std::size_t i = 0; i < w.size(); ++i) gw[i] += dpreact * phi[i];
    g.at("svm_b").data[0] += dpreact;
    if (cfg.svm_on_pooled) {
      for (std::size_t i = 0; i < gH.size(); ++i) gH[i] = dpreact * w[i];
    } else {
      gr2.resize(w.size());
      for (std::size_t i = 0; i < w.size(); ++i) gr2[i] = dpreact * w[i];
    }
  } else {
    const auto& W3 = p.at("cls_W3").data;
    auto& gW3 = g.at("cls_W3").data;
    for (std::size_t i = 0; i < W3.size(); ++i) gW3[i] += dpreact * cache.r2[i];
    g.at("cls_b3").data[0] += dpreact;
    gr2.resize(W3.size());
    for (std::size_t i = 0; i < W3.size(); ++i) gr2[i] = dpreact * W3[i];
  }
  if (!gr2.empty()) {
    Vec gz2(gr2.size());
    for (std::size_t i = 0; i < gr2.size(); ++i)
      gz2[i] = cache.z2[i] > 0.0 ? gr2[i] : 0.0;
    add_outer(g.at("cls_W2"), gz2, cache.r1);
    for (std::size_t i = 0; i < gz2.size(); ++i) g.at("cls_b2").data[i] += gz2[i];
    const Mat W2 = p.at("cls_W2").as_mat();
    Vec gr1 = matvec_t(W2, gz2);
    Vec gz1(gr1.size());
    for (std::size_t i = 0; i < gr1.size(); ++i)
      gz1[i] = cache.z1[i] > 0.0 ? gr1[i] : 0.0;
    add_outer(g.at("cls_W1"), gz1, cache.pooled);
    for (std::size_t i = 0; i < gz1.size(); ++i) g.at("cls_b1").data[i] += gz1[i];
    const Mat W1 = p.at("cls_W1").as_mat();
    gH = matvec_t(W1, gz1);
  }

  // Pooling: H = sum a_j h_j.
  Vec ga(n, 0.0);
  std::vector<Vec> gh(n, Vec(cfg.instance_feature_dim, 0.0));
  for (std::size_t j = 0; j < n; ++j) {
    ga[j] = dot(gH, cache.features[j]);
    for (std::size_t d = 0; d < gH.size(); ++d)
      gh[j][d] += cache.attention[j] * gH[d];
  }

  // Simplex transformation.
  Vec ge = cfg.pooling == Pooling::kSoftmaxAttention
               ? softmax_vjp(cache.attention, ga)
               : sparsemax_vjp(cache.attention, ga);

  // Attention scorer.
  const auto& w = p.at("attn_w").data;
  const Mat V = p.at("attn_V").as_mat();
  Mat U;
  if (cfg.gated()) U = p.at("attn_U").as_mat();
  auto& gw_attn = g.at("attn_w").data;
  for (std::size_t j = 0; j < n; ++j) {
    const double gej = ge[j];
    if (gej == 0.0) continue;
    const Vec& t = cache.tanh_act[j];
    if (cfg.gated()) {
      const Vec& s = cache.gate_act[j];
      Vec gt(t.size()), gs(t.size());
      for (std::size_t k = 0; k < t.size(); ++k) {
        gw_attn[k] += gej * t[k] * s[k];
        gt[k] = gej * w[k] * s[k];
        gs[k] = gej * w[k] * t[k];
      }
      Vec gzt(t.size()), gzs(t.size());
      for (std::size_t k = 0; k < t.size(); ++k) {
        gzt[k] = gt[k] * (1.0 - t[k] * t[k]);
        gzs[k] = gs[k] * s[k] * (1.0 - s[k]);
      }
      add_outer(g.at("attn_V"), gzt, cache.features[j]);
      add_outer(g.at("attn_U"), gzs, cache.features[j]);
      Vec back_t = matvec_t(V, gzt);
      Vec back_s = matvec_t(U, gzs);
      for (std::size_t d = 0; d < gh[j].size(); ++d)
        gh[j][d] += back_t[d] + back_s[d];
    } else {
      Vec gzt(t.size());
      for (std::size_t k = 0; k < t.size(); ++k) {
        gw_attn[k] += gej * t[k];
        gzt[k] = gej * w[k] * (1.0 - t[k] * t[k]);
      }
      add_outer(g.at("attn_V"), gzt, cache.features[j]);
      Vec back_t = matvec_t(V, gzt);
      for (std::size_t d = 0; d < gh[j].size(); ++d) gh[j][d] += back_t[d];
    }
  }

  // Embedder and token embeddings.
  const Mat kernel = p.at("conv_kernel").as_mat();
  auto& gemb = g.at("token_embedding").data;
  const int E = cfg.token_embed_dim;
  for (std::size_t j = 0; j < n; ++j) {
    Vec gu(gh[j].size());
    bool any = false;
    for (std::size_t d = 0; d < gu.size(); ++d) {
      gu[d] = cache.preact_u[j][d] > 0.0 ? gh[j][d] : 0.0;
      any = any || gu[d] != 0.0;
    }
    if (!any) continue;
    add_outer(g.at("conv_kernel"), gu, cache.emb_flat[j]);
    auto& gbias = g.at("conv_bias").data;
    for (std::size_t d = 0; d < gu.size(); ++d) gbias[d] += gu[d];
    Vec gx = matvec_t(kernel, gu);
    for (std::size_t t = 0; t < cache.windows[j].size(); ++t) {
      const int id = cache.windows[j][t];
      for (int e = 0; e < E; ++e)
        gemb[static_cast<std::size_t>(id) * E + e] += gx[t * E + e];
    }
  }
  return g;
}

// Instance j is a key word iff its attention mass is at least
// threshold / N (relative to uniform); ties are labeled 1.
inline std::vector<int> predict_key_words(const Vec& attention,
                                          double threshold) {
  if (attention.empty())
    throw std::invalid_argument("predict_key_words: empty attention");
  const double n = static_cast<double>(attention.size());
  if (threshold <= 0.0 || threshold >= n)
    throw std::invalid_argument(
        "predict_key_words: threshold must be in (0, N)");
  const double cutoff = threshold / n;
  std::vector<int> out(attention.size(), 0);
  for (std::size_t j = 0; j < attention.size(); ++j)
    out[j] = attention[j] >= cutoff ? 1 : 0;
  return out;
}

}  // namespace milmine
