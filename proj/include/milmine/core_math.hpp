// Dense vector/matrix primitives, the two simplex transformations
// (softmax, sparsemax) with their vector-Jacobian products, the SVM
// surrogate losses, and the verification oracles used by the test
// suites (brute-force simplex projection, central finite differences).
//
// All functions here are pure; everything is 64-bit double.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace milmine {

using Vec = std::vector<double>;

// Minimal row-major dense matrix. Enough linear algebra for the models
// in this library; deliberately no BLAS.
struct Mat {
  std::size_t rows = 0;
  std::size_t cols = 0;
  Vec data;

  Mat() = default;
  Mat(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const {
    return data[i * cols + j];
  }
};

// Sharpness and penalty factor of the SVM surrogate objective.
struct LossConfig {
  double beta = 1.0;
  double c = 1.0;

  void validate() const {
    if (beta <= 0.0 || c <= 0.0)
      throw std::invalid_argument("LossConfig: beta and c must be > 0");
  }
};

inline double dot(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// y = M x
inline Vec matvec(const Mat& m, const Vec& x) {
  Vec y(m.rows, 0.0);
  for (std::size_t i = 0; i < m.rows; ++i) {
    double s = 0.0;
    const double* row = m.data.data() + i * m.cols;
    for (std::size_t j = 0; j < m.cols; ++j) s += row[j] * x[j];
    y[i] = s;
  }
  return y;
}

// y = M^T x
inline Vec matvec_t(const Mat& m, const Vec& x) {
  Vec y(m.cols, 0.0);
  for (std::size_t i = 0; i < m.rows; ++i) {
    const double* row = m.data.data() + i * m.cols;
    for (std::size_t j = 0; j < m.cols; ++j) y[j] += row[j] * x[i];
  }
  return y;
}

// M += a b^T
inline void add_outer(Mat& m, const Vec& a, const Vec& b) {
  for (std::size_t i = 0; i < m.rows; ++i) {
    double* row = m.data.data() + i * m.cols;
    for (std::size_t j = 0; j < m.cols; ++j) row[j] += a[i] * b[j];
  }
}

inline void check_scores(const Vec& scores, const char* who) {
  if (scores.empty())
    throw std::invalid_argument(std::string(who) + ": empty score vector");
  for (double v : scores)
    if (!std::isfinite(v))
      throw std::invalid_argument(std::string(who) + ": non-finite score");
}

// Softmax with max-subtraction for overflow safety.
inline Vec softmax(const Vec& scores) {
  check_scores(scores, "softmax");
  double mx = *std::max_element(scores.begin(), scores.end());
  Vec out(scores.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    out[i] = std::exp(scores[i] - mx);
    sum += out[i];
  }
  for (double& v : out) v /= sum;
  return out;
}

// Euclidean projection onto the probability simplex via the
// sort-and-threshold rule: sort descending, find the largest k with
// 1 + k z_(k) > sum_{j<=k} z_(j), set tau = (sum_{j<=k} z_(j) - 1)/k,
// output max(z_i - tau, 0). O(K log K); exact sparsity in the output.
inline Vec sparsemax(const Vec& scores) {
  check_scores(scores, "sparsemax");
  const std::size_t n = scores.size();
  Vec sorted = scores;
  std::sort(sorted.begin(), sorted.end(), std::greater<double>());
  double cumsum = 0.0;
  std::size_t support = 0;
  double tau = 0.0;
  for (std::size_t k = 1; k <= n; ++k) {
    cumsum += sorted[k - 1];
    if (1.0 + static_cast<double>(k) * sorted[k - 1] > cumsum) {
      support = k;
      tau = (cumsum - 1.0) / static_cast<double>(k);
    } else {
      // cumsum now includes an off-support entry; undo for clarity.
      cumsum -= sorted[k - 1];
      break;
    }
  }
  Vec out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = std::max(scores[i] - tau, 0.0);
  (void)support;
  return out;
}

// Threshold tau of the sparsemax projection, used by gradient tests to
// detect support-change boundaries.
inline double sparsemax_tau(const Vec& scores) {
  check_scores(scores, "sparsemax_tau");
  Vec sorted = scores;
  std::sort(sorted.begin(), sorted.end(), std::greater<double>());
  double cumsum = 0.0;
  double tau = 0.0;
  for (std::size_t k = 1; k <= sorted.size(); ++k) {
    cumsum += sorted[k - 1];
    if (1.0 + static_cast<double>(k) * sorted[k - 1] > cumsum)
      tau = (cumsum - 1.0) / static_cast<double>(k);
    else
      break;
  }
  return tau;
}

// Vector-Jacobian product of sparsemax at a point with the given output.
// Jacobian is diag(s) - s s^T / |S| with s the support indicator; the
// returned vector is exactly zero off the support.
inline Vec sparsemax_vjp(const Vec& output, const Vec& upstream) {
  if (output.size() != upstream.size())
    throw std::invalid_argument("sparsemax_vjp: length mismatch");
  double sum = 0.0;
  std::size_t support = 0;
  for (std::size_t i = 0; i < output.size(); ++i) {
    if (output[i] > 0.0) {
      sum += upstream[i];
      ++support;
    }
  }
  Vec out(output.size(), 0.0);
  if (support == 0) return out;
  const double mean = sum / static_cast<double>(support);
  for (std::size_t i = 0; i < output.size(); ++i)
    if (output[i] > 0.0) out[i] = upstream[i] - mean;
  return out;
}

// Vector-Jacobian product of softmax: J = diag(p) - p p^T.
inline Vec softmax_vjp(const Vec& output, const Vec& upstream) {
  if (output.size() != upstream.size())
    throw std::invalid_argument("softmax_vjp: length mismatch");
  const double s = dot(output, upstream);
  Vec out(output.size());
  for (std::size_t i = 0; i < output.size(); ++i)
    out[i] = output[i] * (upstream[i] - s);
  return out;
}

// g(z) = (1/beta) log(1 + exp(beta z)), a smooth upper bound on the
// hinge. Stable softplus form.
inline double generalized_logistic_loss(double z, double beta) {
  if (beta <= 0.0)
    throw std::invalid_argument("generalized_logistic_loss: beta must be > 0");
  const double bz = beta * z;
  if (bz > 0.0) return z + std::log1p(std::exp(-bz)) / beta;
  return std::log1p(std::exp(bz)) / beta;
}

// d/dz of generalized_logistic_loss = sigmoid(beta z).
inline double generalized_logistic_loss_grad(double z, double beta) {
  const double bz = beta * z;
  if (bz >= 0.0) return 1.0 / (1.0 + std::exp(-bz));
  const double e = std::exp(bz);
  return e / (1.0 + e);
}

inline double hinge(double z) { return std::max(z, 0.0); }

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// Brute-force simplex projection by exhaustive support enumeration.
// For each nonempty support S the equality-constrained least squares
// solution is alpha_i = e_i - (sum_S e - 1)/|S|; keep the feasible
// candidates and return the distance minimizer. Exponential in K, hence
// the budget.
inline Vec projection_oracle(const Vec& scores) {
  check_scores(scores, "projection_oracle");
  const std::size_t n = scores.size();
  if (n > 8)
    throw std::invalid_argument("projection_oracle: budget exceeded (K > 8)");
  Vec best;
  double best_dist = std::numeric_limits<double>::infinity();
  for (unsigned mask = 1; mask < (1u << n); ++mask) {
    double sum = 0.0;
    int k = 0;
    for (std::size_t i = 0; i < n; ++i)
      if (mask & (1u << i)) {
        sum += scores[i];
        ++k;
      }
    const double shift = (sum - 1.0) / k;
    Vec cand(n, 0.0);
    bool feasible = true;
    for (std::size_t i = 0; i < n; ++i) {
      if (mask & (1u << i)) {
        cand[i] = scores[i] - shift;
        if (cand[i] < -1e-12) {
          feasible = false;
          break;
        }
        cand[i] = std::max(cand[i], 0.0);
      }
    }
    if (!feasible) continue;
    double dist = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = cand[i] - scores[i];
      dist += d * d;
    }
    if (dist < best_dist) {
      best_dist = dist;
      best = std::move(cand);
    }
  }
  return best;
}

// Central-difference gradient estimate of a scalar function.
inline Vec finite_difference_gradient(const std::function<double(const Vec&)>& f,
                                      const Vec& x, double eps) {
  Vec grad(x.size());
  Vec probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + eps;
    const double fp = f(probe);
    probe[i] = orig - eps;
    const double fm = f(probe);
    probe[i] = orig;
    grad[i] = (fp - fm) / (2.0 * eps);
  }
  return grad;
}

}  // namespace milmine
