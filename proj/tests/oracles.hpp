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

// Independent reference computations used only by tests. Nothing here calls
// into the code paths it checks.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "imgprov/linear_probe.hpp"

namespace imgprov::oracle {

// ln(1 + |X[u, v]|) with X the DFT of `gray` (n x n), evaluated from the
// definition and written at the fft-shifted position.
inline std::vector<double> naive_log_spectrum(const std::vector<double>& gray, std::size_t n) {
  std::vector<double> out(n * n);
  for (std::size_t u = 0; u < n; ++u) {
    for (std::size_t v = 0; v < n; ++v) {
      std::complex<double> acc = 0.0;
      for (std::size_t y = 0; y < n; ++y) {
        for (std::size_t x = 0; x < n; ++x) {
          const double angle = -2.0 * std::numbers::pi *
                               (static_cast<double>(u * y) + static_cast<double>(v * x)) /
                               static_cast<double>(n);
          acc += gray[y * n + x] * std::complex<double>(std::cos(angle), std::sin(angle));
        }
      }
      out[((u + n / 2) % n) * n + (v + n / 2) % n] = std::log(1.0 + std::abs(acc));
    }
  }
  return out;
}

// Euclidean projection onto {0 <= a <= c, sum a_i y_i = 0} by bisection on
// the multiplier of the equality constraint.
inline std::vector<double> project_box_hyperplane(const std::vector<double>& v,
                                                  const std::vector<int>& y, double c) {
  auto residual = [&](double mu) {
    double s = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) s += std::clamp(v[i] - mu * y[i], 0.0, c) * y[i];
    return s;
  };
  double lo = -1.0, hi = 1.0;
  while (residual(lo) < 0) lo *= 2.0;
  while (residual(hi) > 0) hi *= 2.0;
  for (int it = 0; it < 100 && hi - lo > 1e-15 * (1.0 + std::fabs(lo)); ++it) {
    const double mid = 0.5 * (lo + hi);
    if (residual(mid) > 0) lo = mid; else hi = mid;
  }
  const double mu = 0.5 * (lo + hi);
  std::vector<double> a(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) a[i] = std::clamp(v[i] - mu * y[i], 0.0, c);
  return a;
}

inline double dual_objective(const std::vector<double>& a, const std::vector<int>& y,
                             const std::vector<std::vector<double>>& k) {
  double lin = 0.0, quad = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    lin += a[i];
    for (std::size_t j = 0; j < a.size(); ++j) quad += a[i] * a[j] * y[i] * y[j] * k[i][j];
  }
  return lin - 0.5 * quad;
}

// Accelerated projected gradient ascent on the SVM dual.
inline double qp_dual_optimum(const std::vector<int>& y, const std::vector<std::vector<double>>& k,
                              double c, int iterations = 20000) {
  const std::size_t n = y.size();
  // Lipschitz bound of the gradient: max row sum of |Q|.
  double lip = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < n; ++j) row += std::fabs(k[i][j]);
    lip = std::max(lip, row);
  }
  const double step = 1.0 / lip;
  std::vector<double> a(n, 0.0), z = a, prev = a;
  double t = 1.0;
  double best = dual_objective(a, y, k);
  for (int it = 0; it < iterations; ++it) {
    std::vector<double> grad(n);
    for (std::size_t i = 0; i < n; ++i) {
      double g = 1.0;
      for (std::size_t j = 0; j < n; ++j) g -= y[i] * y[j] * k[i][j] * z[j];
      grad[i] = z[i] + step * g;
    }
    prev = a;
    a = project_box_hyperplane(grad, y, c);
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    for (std::size_t i = 0; i < n; ++i) z[i] = a[i] + ((t - 1.0) / t_next) * (a[i] - prev[i]);
    t = t_next;
    best = std::max(best, dual_objective(a, y, k));
  }
  return best;
}

// Per-definition accuracy and macro-F1 (classes absent from truth excluded).
struct MetricPair {
  double accuracy;
  double macro_f1;
};

inline MetricPair definitional_metrics(const std::vector<std::vector<std::int64_t>>& cm) {
  const std::size_t k = cm.size();
  double n = 0, diag = 0;
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) n += static_cast<double>(cm[i][j]);
    diag += static_cast<double>(cm[i][i]);
  }
  double f1_sum = 0;
  int present = 0;
  for (std::size_t c = 0; c < k; ++c) {
    double tp = static_cast<double>(cm[c][c]), fn = 0, fp = 0;
    for (std::size_t j = 0; j < k; ++j) {
      if (j == c) continue;
      fn += static_cast<double>(cm[c][j]);
      fp += static_cast<double>(cm[j][c]);
    }
    if (tp + fn == 0) continue;
    ++present;
    // F1 = 2TP / (2TP + FP + FN), zero when TP == 0.
    f1_sum += tp > 0 ? 2 * tp / (2 * tp + fp + fn) : 0.0;
  }
  return {diag / n, f1_sum / present};
}

// Six Gaussian clusters, mean 10 * e_c, unit variance, in `dim` dimensions.
struct Clusters {
  std::vector<std::vector<float>> x;
  std::vector<int> labels;
};

inline Clusters gaussian_clusters(int classes, int per_class, std::size_t dim,
                                  std::uint64_t seed, double scale = 10.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01(0.0, 1.0);
  Clusters c;
  for (int i = 0; i < per_class; ++i) {
    for (int cls = 0; cls < classes; ++cls) {
      std::vector<float> v(dim);
      for (std::size_t d = 0; d < dim; ++d) {
        v[d] = static_cast<float>((static_cast<int>(d) == cls ? scale : 0.0) + n01(rng));
      }
      c.x.push_back(std::move(v));
      c.labels.push_back(cls);
    }
  }
  return c;
}

// Central-difference gradient of ce_loss with respect to every weight and
// bias coordinate, each perturbed by +-h.
struct FiniteDifferenceGradient {
  std::vector<double> d_weights;
  std::vector<double> d_bias;
};

inline FiniteDifferenceGradient central_differences(
    const linear::BasicLinearSoftmax<double>& m, const std::vector<std::vector<float>>& x,
    const std::vector<int>& labels, double l2, double h) {
  FiniteDifferenceGradient g;
  // Coordinate i indexes weights first, then biases.
  auto probe = [&](std::size_t i) {
    linear::BasicLinearSoftmax<double> p = m;
    double& v = i < p.weights.size() ? p.weights[i] : p.bias[i - p.weights.size()];
    const double orig = v;
    v = orig + h;
    const double up = linear::ce_loss(p, x, labels, l2);
    v = orig - h;
    const double down = linear::ce_loss(p, x, labels, l2);
    return (up - down) / (2.0 * h);
  };
  for (std::size_t i = 0; i < m.weights.size(); ++i) g.d_weights.push_back(probe(i));
  for (std::size_t i = 0; i < m.bias.size(); ++i) g.d_bias.push_back(probe(m.weights.size() + i));
  return g;
}

inline double relative_error(double a, double b) {
  return std::fabs(a - b) / std::max({std::fabs(a), std::fabs(b), 1e-8});
}

// Random 3-class batch in `dim` dimensions with a random nonzero model.
struct GradientCase {
  linear::BasicLinearSoftmax<double> model;
  std::vector<std::vector<float>> x;
  std::vector<int> labels;
};

inline GradientCase random_gradient_case(std::uint64_t seed, std::size_t dim = 8,
                                         std::size_t classes = 3, std::size_t batch = 12) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01(0.0, 1.0);
  GradientCase gc;
  gc.model = linear::BasicLinearSoftmax<double>::zeros(classes, dim);
  for (auto& w : gc.model.weights) w = 0.5 * n01(rng);
  for (auto& b : gc.model.bias) b = 0.5 * n01(rng);
  for (std::size_t j = 0; j < dim; ++j) {
    gc.model.mean[j] = 0.3 * n01(rng);
    gc.model.stddev[j] = 0.5 + std::fabs(n01(rng));
  }
  for (std::size_t i = 0; i < batch; ++i) {
    std::vector<float> row(dim);
    for (auto& v : row) v = static_cast<float>(n01(rng));
    gc.x.push_back(std::move(row));
    gc.labels.push_back(static_cast<int>(rng() % classes));
  }
  return gc;
}

}  // namespace imgprov::oracle
