#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "df4lcz/errors.hpp"
#include "df4lcz/nn/tensor.hpp"

namespace df4lcz {

enum class Mode { train, infer };

// ---------------------------------------------------------------------------
// Dense

/// out = x W + b, with x [B x F_in], W [F_in x F_out], b [F_out].
template <class T>
BasicTensor<T> dense_forward(const BasicTensor<T>& x, const BasicTensor<T>& w, const BasicTensor<T>& b) {
  require_rank(x.shape(), 2, "dense input x");
  require_rank(w.shape(), 2, "dense weight W");
  require_rank(b.shape(), 1, "dense bias b");
  if (x.dim(1) != w.dim(0)) {
    throw DimensionError("dense: input x " + shape_str(x.shape()) + " has " + std::to_string(x.dim(1)) +
                         " features but weight W " + shape_str(w.shape()) + " expects " +
                         std::to_string(w.dim(0)));
  }
  if (b.dim(0) != w.dim(1)) {
    throw DimensionError("dense: bias b " + shape_str(b.shape()) + " does not match weight W " +
                         shape_str(w.shape()));
  }
  BasicTensor<T> out({x.dim(0), w.dim(1)});
  auto o = as_matrix(out);
  o.noalias() = as_matrix(x) * as_matrix(w);
  o.rowwise() += as_row_vector(b);
  return out;
}

/// Accumulates dW, db and returns dx.
template <class T>
BasicTensor<T> dense_backward(const BasicTensor<T>& x, const BasicTensor<T>& w, const BasicTensor<T>& dy,
                              BasicTensor<T>& dw, BasicTensor<T>& db) {
  if (dy.dim(0) != x.dim(0) || dy.dim(1) != w.dim(1)) {
    throw DimensionError("dense backward: upstream " + shape_str(dy.shape()) + " vs x " +
                         shape_str(x.shape()) + ", W " + shape_str(w.shape()));
  }
  as_matrix(dw).noalias() += as_matrix(x).transpose() * as_matrix(dy);
  as_row_vector(db) += as_matrix(dy).colwise().sum();
  BasicTensor<T> dx(x.shape());
  as_matrix(dx).noalias() = as_matrix(dy) * as_matrix(w).transpose();
  return dx;
}

// ---------------------------------------------------------------------------
// ReLU

template <class T>
BasicTensor<T> relu(const BasicTensor<T>& x) {
  BasicTensor<T> y = x;
  for (auto& v : y.data()) v = v > T{0} ? v : T{0};
  return y;
}

template <class T>
void relu_inplace(BasicTensor<T>& x) {
  for (auto& v : x.data()) v = v > T{0} ? v : T{0};
}

/// dx = dy where the forward output was positive.
template <class T>
BasicTensor<T> relu_backward(const BasicTensor<T>& y, const BasicTensor<T>& dy) {
  BasicTensor<T> dx = dy;
  for (std::size_t i = 0; i < dx.size(); ++i) {
    if (!(y[i] > T{0})) dx[i] = T{0};
  }
  return dx;
}

/// Order-sensitive hash of which units are active. Used by the gradient checker
/// to detect finite-difference probes that cross a ReLU kink.
template <class T>
std::uint64_t activation_signature(const BasicTensor<T>& y, std::uint64_t h = 1469598103934665603ULL) {
  for (std::size_t i = 0; i < y.size(); ++i) {
    h ^= (y[i] > T{0}) ? 0x9e3779b97f4a7c15ULL + i : i;
    h *= 1099511628211ULL;
  }
  return h;
}

// ---------------------------------------------------------------------------
// Softmax + cross-entropy

/// Row-wise softmax with max-subtraction.
template <class T>
BasicTensor<T> softmax(const BasicTensor<T>& logits) {
  require_rank(logits.shape(), 2, "softmax logits");
  const std::size_t rows = logits.dim(0), cols = logits.dim(1);
  BasicTensor<T> out(logits.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const T* in = logits.raw() + r * cols;
    T* o = out.raw() + r * cols;
    const T mx = *std::max_element(in, in + cols);
    double sum = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      const double e = std::exp(static_cast<double>(in[c]) - static_cast<double>(mx));
      o[c] = static_cast<T>(e);
      sum += e;
    }
    for (std::size_t c = 0; c < cols; ++c) o[c] = static_cast<T>(static_cast<double>(o[c]) / sum);
  }
  return out;
}

inline constexpr double kProbFloor = 1e-12;

inline void check_labels(std::span<const int> labels, std::size_t rows, std::size_t classes) {
  if (labels.size() != rows) {
    throw DimensionError("cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(rows) + " rows");
  }
  for (int l : labels) {
    if (l < 0 || static_cast<std::size_t>(l) >= classes) {
      throw IndexError("cross_entropy: label " + std::to_string(l) + " outside [0," +
                       std::to_string(classes) + ")");
    }
  }
}

/// Mean over the batch of -ln(max(p[label], 1e-12)).
template <class T>
double cross_entropy(const BasicTensor<T>& probs, std::span<const int> labels) {
  require_rank(probs.shape(), 2, "cross_entropy probs");
  const std::size_t rows = probs.dim(0), cols = probs.dim(1);
  check_labels(labels, rows, cols);
  double loss = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    const double p = std::max(static_cast<double>(probs(r, static_cast<std::size_t>(labels[r]))), kProbFloor);
    loss -= std::log(p);
  }
  return loss / static_cast<double>(rows);
}

/// Gradient of mean cross-entropy w.r.t. the logits that produced `probs`.
template <class T>
BasicTensor<T> softmax_cross_entropy_backward(const BasicTensor<T>& probs, std::span<const int> labels) {
  const std::size_t rows = probs.dim(0), cols = probs.dim(1);
  check_labels(labels, rows, cols);
  BasicTensor<T> d = probs;
  const T inv = static_cast<T>(1.0 / static_cast<double>(rows));
  for (std::size_t r = 0; r < rows; ++r) {
    d(r, static_cast<std::size_t>(labels[r])) -= T{1};
    for (std::size_t c = 0; c < cols; ++c) d(r, c) *= inv;
  }
  return d;
}

// ---------------------------------------------------------------------------
// Batch normalisation over the last (channel) axis

struct BatchNormConfig {
  double momentum = 0.9;
  double epsilon = 1e-5;
};

template <class T>
struct BatchNormCache {
  BasicTensor<T> x_hat;
  std::vector<double> inv_std;
};

/// Normalises per channel (last axis). Train mode uses batch statistics and
/// folds them into the running estimates; infer mode uses the running ones.
template <class T>
BasicTensor<T> batchnorm_forward(const BasicTensor<T>& x, const BasicTensor<T>& gamma, const BasicTensor<T>& beta,
                                 BasicTensor<T>& running_mean, BasicTensor<T>& running_var, Mode mode,
                                 BatchNormCache<T>* cache = nullptr, const BatchNormConfig& cfg = {}) {
  if (x.rank() < 2) throw DimensionError("batchnorm: input must have a batch and a channel axis");
  const std::size_t channels = x.shape().back();
  for (const BasicTensor<T>* t : std::initializer_list<const BasicTensor<T>*>{&gamma, &beta, &running_mean, &running_var}) {
    if (t->rank() != 1 || t->dim(0) != channels) {
      throw DimensionError("batchnorm: parameter " + shape_str(t->shape()) + " does not match " +
                           std::to_string(channels) + " channels of " + shape_str(x.shape()));
    }
  }
  const std::size_t rows = x.size() / channels;
  BasicTensor<T> y(x.shape());

  if (mode == Mode::infer) {
    for (std::size_t c = 0; c < channels; ++c) {
      const double scale = gamma[c] / std::sqrt(static_cast<double>(running_var[c]) + cfg.epsilon);
      const double shift = beta[c] - scale * running_mean[c];
      for (std::size_t r = 0; r < rows; ++r) {
        y[r * channels + c] = static_cast<T>(scale * x[r * channels + c] + shift);
      }
    }
    return y;
  }

  if (x.dim(0) < 2) {
    throw DegenerateBatchError("batchnorm: train mode needs a batch of at least 2, got " +
                               std::to_string(x.dim(0)));
  }
  std::vector<double> mean(channels, 0.0), var(channels, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < channels; ++c) mean[c] += x[r * channels + c];
  }
  for (auto& m : mean) m /= static_cast<double>(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < channels; ++c) {
      const double d = x[r * channels + c] - mean[c];
      var[c] += d * d;
    }
  }
  for (auto& v : var) v /= static_cast<double>(rows);

  std::vector<double> inv_std(channels);
  for (std::size_t c = 0; c < channels; ++c) inv_std[c] = 1.0 / std::sqrt(var[c] + cfg.epsilon);

  BasicTensor<T> x_hat(x.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < channels; ++c) {
      const std::size_t i = r * channels + c;
      const double xh = (x[i] - mean[c]) * inv_std[c];
      x_hat[i] = static_cast<T>(xh);
      y[i] = static_cast<T>(gamma[c] * xh + beta[c]);
    }
  }

  const double unbias = rows > 1 ? static_cast<double>(rows) / static_cast<double>(rows - 1) : 1.0;
  for (std::size_t c = 0; c < channels; ++c) {
    running_mean[c] = static_cast<T>(cfg.momentum * running_mean[c] + (1.0 - cfg.momentum) * mean[c]);
    running_var[c] = static_cast<T>(cfg.momentum * running_var[c] + (1.0 - cfg.momentum) * var[c] * unbias);
  }

  if (cache) {
    cache->x_hat = std::move(x_hat);
    cache->inv_std = std::move(inv_std);
  }
  return y;
}

/// Train-mode backward. Accumulates dgamma/dbeta and returns dx.
template <class T>
BasicTensor<T> batchnorm_backward(const BatchNormCache<T>& cache, const BasicTensor<T>& gamma,
                                  const BasicTensor<T>& dy, BasicTensor<T>& dgamma, BasicTensor<T>& dbeta) {
  const std::size_t channels = gamma.size();
  const std::size_t rows = dy.size() / channels;
  std::vector<double> sum_dy(channels, 0.0), sum_dy_xhat(channels, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < channels; ++c) {
      const std::size_t i = r * channels + c;
      sum_dy[c] += dy[i];
      sum_dy_xhat[c] += static_cast<double>(dy[i]) * cache.x_hat[i];
    }
  }
  for (std::size_t c = 0; c < channels; ++c) {
    dgamma[c] += static_cast<T>(sum_dy_xhat[c]);
    dbeta[c] += static_cast<T>(sum_dy[c]);
  }
  const double m = static_cast<double>(rows);
  BasicTensor<T> dx(dy.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < channels; ++c) {
      const std::size_t i = r * channels + c;
      const double g = gamma[c] * cache.inv_std[c];
      dx[i] = static_cast<T>(g * (dy[i] - sum_dy[c] / m - cache.x_hat[i] * sum_dy_xhat[c] / m));
    }
  }
  return dx;
}

}  // namespace df4lcz
