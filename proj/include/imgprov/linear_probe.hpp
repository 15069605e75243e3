// Copyright 2026 The imgprov Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Multinomial softmax classifier over pooled feature vectors, trained by
// full-batch gradient descent on the summed cross-entropy.

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "imgprov/error.hpp"
#include "imgprov/tensor_store.hpp"

namespace imgprov::linear {

struct TrainConfig {
  double learning_rate = 1e-3;
  int epochs = 500;
  double l2 = 0.0;

  void validate() const {
    require(learning_rate > 0.0, "learning rate must be > 0");
    require(epochs >= 1, "epochs must be >= 1");
    require(l2 >= 0.0, "l2 must be >= 0");
  }
};

inline constexpr double kStdFloor = 1e-8;

template <typename T>
struct BasicLinearSoftmax {
  LabelSpace label_space{Task::kB};
  std::size_t num_classes = 0;
  std::size_t dim = 0;
  std::vector<T> weights;  // [num_classes, dim], row-major
  std::vector<T> bias;     // [num_classes]
  std::vector<T> mean;     // [dim]
  std::vector<T> stddev;   // [dim], >= kStdFloor
  TrainConfig config;

  static BasicLinearSoftmax zeros(std::size_t k, std::size_t d) {
    BasicLinearSoftmax m;
    m.num_classes = k;
    m.dim = d;
    m.weights.assign(k * d, T(0));
    m.bias.assign(k, T(0));
    m.mean.assign(d, T(0));
    m.stddev.assign(d, T(1));
    return m;
  }

  T& w(std::size_t c, std::size_t j) { return weights[c * dim + j]; }
  T w(std::size_t c, std::size_t j) const { return weights[c * dim + j]; }

  template <typename U>
  BasicLinearSoftmax<U> cast() const {
    BasicLinearSoftmax<U> out;
    out.label_space = label_space;
    out.num_classes = num_classes;
    out.dim = dim;
    out.weights.assign(weights.begin(), weights.end());
    out.bias.assign(bias.begin(), bias.end());
    out.mean.assign(mean.begin(), mean.end());
    out.stddev.assign(stddev.begin(), stddev.end());
    out.config = config;
    return out;
  }

  friend bool operator==(const BasicLinearSoftmax& a, const BasicLinearSoftmax& b) {
    return a.label_space == b.label_space && a.num_classes == b.num_classes && a.dim == b.dim &&
           a.weights == b.weights && a.bias == b.bias && a.mean == b.mean && a.stddev == b.stddev;
  }
};

using LinearSoftmaxModel = BasicLinearSoftmax<float>;

template <typename T>
std::vector<double> standardize(const BasicLinearSoftmax<T>& m, std::span<const float> x) {
  if (x.size() != m.dim) {
    throw PreconditionError("feature dimension " + std::to_string(x.size()) +
                            " differs from model dimension " + std::to_string(m.dim));
  }
  std::vector<double> out(m.dim);
  for (std::size_t j = 0; j < m.dim; ++j) {
    out[j] = (static_cast<double>(x[j]) - static_cast<double>(m.mean[j])) /
             static_cast<double>(m.stddev[j]);
  }
  return out;
}

template <typename T>
std::vector<double> logits(const BasicLinearSoftmax<T>& m, std::span<const double> xhat) {
  std::vector<double> z(m.num_classes);
  for (std::size_t c = 0; c < m.num_classes; ++c) {
    double acc = static_cast<double>(m.bias[c]);
    for (std::size_t j = 0; j < m.dim; ++j) acc += static_cast<double>(m.w(c, j)) * xhat[j];
    z[c] = acc;
  }
  return z;
}

inline std::vector<double> softmax(std::span<const double> z) {
  const double mx = *std::max_element(z.begin(), z.end());
  std::vector<double> p(z.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    p[i] = std::exp(z[i] - mx);
    sum += p[i];
  }
  for (double& v : p) v /= sum;
  return p;
}

template <typename T>
std::vector<double> softmax_forward(const BasicLinearSoftmax<T>& m, std::span<const float> x) {
  const auto xhat = standardize(m, x);
  return softmax(logits(m, xhat));
}

namespace detail {

inline void check_batch(std::size_t n_x, std::span<const int> labels, std::size_t k) {
  if (n_x != labels.size()) {
    throw PreconditionError("batch has " + std::to_string(n_x) + " rows but " +
                            std::to_string(labels.size()) + " labels");
  }
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= k) {
      throw PreconditionError("label " + std::to_string(y) + " out of range for " +
                              std::to_string(k) + " classes");
    }
  }
}

// -log softmax(z)[y] via log-sum-exp.
inline double nll(std::span<const double> z, int y) {
  const double mx = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double v : z) sum += std::exp(v - mx);
  return mx + std::log(sum) - z[static_cast<std::size_t>(y)];
}

}  // namespace detail

// Summed (not averaged) cross-entropy plus l2/2 * ||W||^2.
template <typename T>
double ce_loss(const BasicLinearSoftmax<T>& m, const std::vector<std::vector<float>>& x,
               std::span<const int> labels, double l2 = 0.0) {
  detail::check_batch(x.size(), labels, m.num_classes);
  double loss = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    loss += detail::nll(logits(m, standardize(m, x[i])), labels[i]);
  }
  if (l2 > 0.0) {
    double sq = 0.0;
    for (const T& w : m.weights) sq += static_cast<double>(w) * static_cast<double>(w);
    loss += 0.5 * l2 * sq;
  }
  return loss;
}

struct Gradient {
  std::vector<double> d_weights;  // [num_classes, dim]
  std::vector<double> d_bias;     // [num_classes]
};

// dW = sum_i (p_i - onehot_i) xhat_i^T + l2 W, db = sum_i (p_i - onehot_i).
template <typename T>
Gradient ce_gradient(const BasicLinearSoftmax<T>& m, const std::vector<std::vector<float>>& x,
                     std::span<const int> labels, double l2 = 0.0) {
  detail::check_batch(x.size(), labels, m.num_classes);
  Gradient g;
  g.d_weights.assign(m.num_classes * m.dim, 0.0);
  g.d_bias.assign(m.num_classes, 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const auto xhat = standardize(m, x[i]);
    auto p = softmax(logits(m, xhat));
    p[static_cast<std::size_t>(labels[i])] -= 1.0;
    for (std::size_t c = 0; c < m.num_classes; ++c) {
      g.d_bias[c] += p[c];
      double* row = &g.d_weights[c * m.dim];
      for (std::size_t j = 0; j < m.dim; ++j) row[j] += p[c] * xhat[j];
    }
  }
  if (l2 > 0.0) {
    for (std::size_t i = 0; i < g.d_weights.size(); ++i) {
      g.d_weights[i] += l2 * static_cast<double>(m.weights[i]);
    }
  }
  return g;
}

struct TrainResult {
  LinearSoftmaxModel model;
  BasicLinearSoftmax<double> exact;  // double-precision parameters before rounding
  std::vector<double> loss_history;  // loss before each epoch, then the final loss
};

// Per-dimension mean and population standard deviation (floored).
inline void fit_standardization(BasicLinearSoftmax<double>& m,
                                const std::vector<std::vector<float>>& x) {
  const double n = static_cast<double>(x.size());
  for (std::size_t j = 0; j < m.dim; ++j) {
    double s = 0.0;
    for (const auto& row : x) s += row[j];
    const double mu = s / n;
    double v = 0.0;
    for (const auto& row : x) v += (row[j] - mu) * (row[j] - mu);
    m.mean[j] = mu;
    m.stddev[j] = std::max(std::sqrt(v / n), kStdFloor);
  }
}

inline TrainResult train_linear(const std::vector<std::vector<float>>& features,
                                std::span<const int> labels, LabelSpace ls,
                                const TrainConfig& cfg) {
  cfg.validate();
  require(!features.empty(), "no training features");
  const std::size_t k = static_cast<std::size_t>(ls.num_classes());
  detail::check_batch(features.size(), labels, k);
  const std::size_t d = features.front().size();
  for (const auto& row : features) {
    if (row.size() != d) throw PreconditionError("ragged feature rows");
  }
  const auto hist = class_histogram(labels, ls.num_classes());
  const auto present = std::count_if(hist.begin(), hist.end(), [](int h) { return h > 0; });
  if (present < 2) {
    throw PreconditionError("linear training needs at least 2 classes, got " +
                            std::to_string(present));
  }

  auto m = BasicLinearSoftmax<double>::zeros(k, d);
  m.label_space = ls;
  m.config = cfg;
  fit_standardization(m, features);

  TrainResult r;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double loss = ce_loss(m, features, labels, cfg.l2);
    if (!std::isfinite(loss)) {
      throw NumericError("training diverged: non-finite loss at epoch " + std::to_string(epoch));
    }
    r.loss_history.push_back(loss);
    const Gradient g = ce_gradient(m, features, labels, cfg.l2);
    for (std::size_t i = 0; i < m.weights.size(); ++i) {
      m.weights[i] -= cfg.learning_rate * g.d_weights[i];
    }
    for (std::size_t c = 0; c < k; ++c) m.bias[c] -= cfg.learning_rate * g.d_bias[c];
  }
  const double final_loss = ce_loss(m, features, labels, cfg.l2);
  if (!std::isfinite(final_loss)) {
    throw NumericError("training diverged: non-finite loss at epoch " +
                       std::to_string(cfg.epochs));
  }
  r.loss_history.push_back(final_loss);
  r.exact = m;
  r.model = m.cast<float>();
  return r;
}

template <typename T>
int predict_linear(const BasicLinearSoftmax<T>& m, std::span<const float> x) {
  const auto p = softmax_forward(m, x);
  int best = 0;
  for (std::size_t i = 1; i < p.size(); ++i) {
    if (p[i] > p[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
  }
  return best;
}

}  // namespace imgprov::linear
