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

// RBF-kernel soft-margin SVM: SMO dual solver, Platt calibration,
// one-vs-rest multiclass training and (C, gamma) grid search.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "imgprov/error.hpp"
#include "imgprov/evalkit.hpp"
#include "imgprov/parallel.hpp"
#include "imgprov/tensor_store.hpp"

namespace imgprov::svm {

using Embedding = std::vector<float>;

inline double squared_distance(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) {
    throw PreconditionError("embedding dimension mismatch: " + std::to_string(a.size()) +
                            " vs " + std::to_string(b.size()));
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - b[i];
    acc += d * d;
  }
  return acc;
}

// exp(-gamma * ||a - b||^2). gamma multiplies the squared distance directly.
inline double rbf_kernel(std::span<const float> a, std::span<const float> b, double gamma) {
  require(gamma > 0.0, "rbf gamma must be > 0");
  return std::exp(-gamma * squared_distance(a, b));
}

// Dense symmetric kernel matrix.
class GramMatrix {
 public:
  GramMatrix() = default;

  GramMatrix(const std::vector<Embedding>& x, double gamma, int jobs = 1)
      : n_(x.size()), k_(x.size() * x.size()) {
    require(gamma > 0.0, "rbf gamma must be > 0");
    parallel_for(n_, jobs, [&](std::size_t i) {
      k_[i * n_ + i] = 1.0;
      for (std::size_t j = i + 1; j < n_; ++j) {
        k_[i * n_ + j] = std::exp(-gamma * squared_distance(x[i], x[j]));
      }
    });
    for (std::size_t i = 0; i < n_; ++i) {
      for (std::size_t j = 0; j < i; ++j) k_[i * n_ + j] = k_[j * n_ + i];
    }
  }

  std::size_t size() const { return n_; }
  double operator()(std::size_t i, std::size_t j) const { return k_[i * n_ + j]; }

 private:
  std::size_t n_ = 0;
  std::vector<double> k_;
};

// Rows/columns of a GramMatrix restricted to an index subset.
struct GramView {
  const GramMatrix* gram;
  std::span<const std::size_t> index;

  std::size_t size() const { return index.size(); }
  double operator()(std::size_t i, std::size_t j) const { return (*gram)(index[i], index[j]); }
};

struct SmoOptions {
  double c = 1.0;
  double tol = 1e-3;
  int max_passes = 200;
};

struct SmoSolution {
  std::vector<double> alpha;  // one multiplier per training point
  double bias = 0.0;
  double objective = 0.0;     // sum(alpha) - 1/2 sum_ij alpha_i alpha_j y_i y_j K_ij
  double max_kkt_violation = 0.0;
  int passes = 0;
  bool converged = false;
};

inline constexpr double kSupportThreshold = 1e-8;

// Largest margin violation y_i * (f_i + b) against the box-constrained KKT
// conditions. f holds sum_j alpha_j y_j K_ij without the bias.
inline double kkt_max_violation(std::span<const double> alpha, std::span<const int> y,
                                std::span<const double> f, double bias, double c) {
  double worst = 0.0;
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    const double m = y[i] * (f[i] + bias) - 1.0;
    double v = 0.0;
    if (alpha[i] <= 0.0) {
      v = std::max(0.0, -m);
    } else if (alpha[i] >= c) {
      v = std::max(0.0, m);
    } else {
      v = std::fabs(m);
    }
    worst = std::max(worst, v);
  }
  return worst;
}

namespace detail {

// Bias minimizing the worst KKT violation for fixed multipliers. Each point
// puts a bound on b through g_i = y_i - f_i; free vectors pin b = g_i.
inline double optimal_bias(std::span<const double> alpha, std::span<const int> y,
                           std::span<const double> f, double c) {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  double free_sum = 0.0;
  std::size_t free_count = 0;
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    const double g = y[i] - f[i];
    const bool at_lower = alpha[i] <= 0.0;
    const bool at_upper = alpha[i] >= c;
    if (!at_lower && !at_upper) {
      lo = std::max(lo, g);
      hi = std::min(hi, g);
      free_sum += g;
      ++free_count;
    } else if ((at_lower && y[i] > 0) || (at_upper && y[i] < 0)) {
      lo = std::max(lo, g);
    } else {
      hi = std::min(hi, g);
    }
  }
  if (lo > hi) return 0.5 * (lo + hi);
  if (free_count > 0) return std::clamp(free_sum / static_cast<double>(free_count), lo, hi);
  if (std::isinf(lo)) return hi;
  if (std::isinf(hi)) return lo;
  return 0.5 * (lo + hi);
}

template <typename Kernel>
class SmoSolver {
 public:
  SmoSolver(const Kernel& k, std::span<const int> y, const SmoOptions& opt)
      : k_(k), y_(y), opt_(opt), n_(y.size()), alpha_(n_, 0.0), f_(n_, 0.0) {}

  SmoSolution run() {
    SmoSolution s;
    bool changed = true;
    while (changed && s.passes < opt_.max_passes) {
      changed = false;
      for (std::size_t i = 0; i < n_; ++i) {
        if (examine(i)) changed = true;
      }
      ++s.passes;
    }
    s.converged = !changed;
    s.bias = optimal_bias(alpha_, y_, f_, opt_.c);
    s.max_kkt_violation = kkt_max_violation(alpha_, y_, f_, s.bias, opt_.c);
    double sum_alpha = 0.0, quad = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
      sum_alpha += alpha_[i];
      quad += alpha_[i] * y_[i] * f_[i];
    }
    s.objective = sum_alpha - 0.5 * quad;
    s.alpha = std::move(alpha_);
    return s;
  }

 private:
  double error(std::size_t i) const { return f_[i] + bias_ - y_[i]; }

  bool examine(std::size_t i2) {
    const double e2 = error(i2);
    const double r2 = e2 * y_[i2];
    const double a2 = alpha_[i2];
    if (!((r2 < -opt_.tol && a2 < opt_.c) || (r2 > opt_.tol && a2 > 0.0))) return false;

    // Second choice: largest |E1 - E2|, lowest index on ties.
    std::size_t best = n_;
    double best_gap = -1.0;
    for (std::size_t j = 0; j < n_; ++j) {
      if (j == i2) continue;
      const double gap = std::fabs(error(j) - e2);
      if (gap > best_gap) {
        best_gap = gap;
        best = j;
      }
    }
    if (best < n_ && step(best, i2)) return true;
    for (std::size_t j = 0; j < n_; ++j) {
      if (j != best && alpha_[j] > 0.0 && alpha_[j] < opt_.c && step(j, i2)) return true;
    }
    for (std::size_t j = 0; j < n_; ++j) {
      if (j != best && !(alpha_[j] > 0.0 && alpha_[j] < opt_.c) && step(j, i2)) return true;
    }
    return false;
  }

  bool step(std::size_t i1, std::size_t i2) {
    if (i1 == i2) return false;
    const double c = opt_.c;
    const double a1 = alpha_[i1], a2 = alpha_[i2];
    const int y1 = y_[i1], y2 = y_[i2];
    const double e1 = error(i1), e2 = error(i2);
    const int s = y1 * y2;
    double lo = 0.0, hi = 0.0;
    if (y1 != y2) {
      lo = std::max(0.0, a2 - a1);
      hi = std::min(c, c + a2 - a1);
    } else {
      lo = std::max(0.0, a1 + a2 - c);
      hi = std::min(c, a1 + a2);
    }
    if (hi - lo <= kEps * c) return false;
    const double k11 = k_(i1, i1), k12 = k_(i1, i2), k22 = k_(i2, i2);
    const double eta = k11 + k22 - 2.0 * k12;
    double a2_new = 0.0;
    if (eta > kEps) {
      a2_new = std::clamp(a2 + y2 * (e1 - e2) / eta, lo, hi);
    } else {
      // Dual objective along the constraint line; pick the better end.
      const double v1 = f_[i1] - a1 * y1 * k11 - a2 * y2 * k12;
      const double v2 = f_[i2] - a1 * y1 * k12 - a2 * y2 * k22;
      auto objective_at = [&](double a2x) {
        const double a1x = a1 + s * (a2 - a2x);
        return a1x + a2x - 0.5 * (a1x * a1x * k11 + a2x * a2x * k22 + 2.0 * s * a1x * a2x * k12) -
               y1 * a1x * v1 - y2 * a2x * v2;
      };
      const double l_obj = objective_at(lo), h_obj = objective_at(hi);
      if (l_obj > h_obj + kEps) {
        a2_new = lo;
      } else if (h_obj > l_obj + kEps) {
        a2_new = hi;
      } else {
        return false;
      }
    }
    if (std::fabs(a2_new - a2) < kEps * (a2_new + a2 + kEps)) return false;
    double a1_new = a1 + s * (a2 - a2_new);
    if (a1_new < kEps * c) a1_new = 0.0;
    if (a1_new > c * (1.0 - kEps)) a1_new = c;
    if (a2_new < kEps * c) a2_new = 0.0;
    if (a2_new > c * (1.0 - kEps)) a2_new = c;

    const double d1 = y1 * (a1_new - a1), d2 = y2 * (a2_new - a2);
    const double b1 = bias_ - e1 - d1 * k11 - d2 * k12;
    const double b2 = bias_ - e2 - d1 * k12 - d2 * k22;
    if (a1_new > 0.0 && a1_new < c) {
      bias_ = b1;
    } else if (a2_new > 0.0 && a2_new < c) {
      bias_ = b2;
    } else {
      bias_ = 0.5 * (b1 + b2);
    }
    for (std::size_t i = 0; i < n_; ++i) f_[i] += d1 * k_(i, i1) + d2 * k_(i, i2);
    alpha_[i1] = a1_new;
    alpha_[i2] = a2_new;
    return true;
  }

  static constexpr double kEps = 1e-12;

  const Kernel& k_;
  std::span<const int> y_;
  SmoOptions opt_;
  std::size_t n_;
  std::vector<double> alpha_;
  std::vector<double> f_;
  double bias_ = 0.0;
};

}  // namespace detail

inline void check_binary_labels(std::span<const int> y) {
  require(y.size() >= 2, "SMO needs at least 2 training points");
  std::size_t pos = 0;
  for (int v : y) {
    if (v != 1 && v != -1) throw PreconditionError("binary labels must be +1 or -1");
    if (v == 1) ++pos;
  }
  if (pos == 0 || pos == y.size()) {
    throw PreconditionError("SMO needs both classes; got a single class of " +
                            std::to_string(y.size()) + " points");
  }
}

// Solves the soft-margin dual on a precomputed kernel. Returns the best
// iterate reached; `converged` is false if max_passes was exhausted.
template <typename Kernel>
SmoSolution smo_solve(const Kernel& k, std::span<const int> y, const SmoOptions& opt) {
  check_binary_labels(y);
  require(opt.c > 0.0, "SVM C must be > 0");
  require(opt.tol > 0.0, "SMO tol must be > 0");
  require(opt.max_passes >= 1, "SMO max_passes must be >= 1");
  require(k.size() == y.size(), "kernel size differs from label count");
  return detail::SmoSolver<Kernel>(k, y, opt).run();
}

struct SvmBinaryModel {
  std::vector<Embedding> support_vectors;
  std::vector<float> dual_coeffs;  // alpha_i * y_i
  float bias = 0.0f;
  float gamma = 1.0f;
  float c = 1.0f;

  std::size_t dimension() const {
    return support_vectors.empty() ? 0 : support_vectors.front().size();
  }

  friend bool operator==(const SvmBinaryModel&, const SvmBinaryModel&) = default;
};

// Pre-sign value sum_i coef_i K(z, sv_i) + b.
inline double svm_decision(const SvmBinaryModel& m, std::span<const float> z) {
  double acc = m.bias;
  for (std::size_t i = 0; i < m.support_vectors.size(); ++i) {
    acc += m.dual_coeffs[i] * std::exp(-static_cast<double>(m.gamma) *
                                       squared_distance(z, m.support_vectors[i]));
  }
  return acc;
}

inline SvmBinaryModel make_binary_model(const std::vector<Embedding>& x,
                                        std::span<const std::size_t> index,
                                        std::span<const int> y, const SmoSolution& s,
                                        double c, double gamma) {
  SvmBinaryModel m;
  m.bias = static_cast<float>(s.bias);
  m.gamma = static_cast<float>(gamma);
  m.c = static_cast<float>(c);
  for (std::size_t i = 0; i < s.alpha.size(); ++i) {
    if (s.alpha[i] > kSupportThreshold) {
      m.support_vectors.push_back(x[index[i]]);
      m.dual_coeffs.push_back(static_cast<float>(s.alpha[i] * y[i]));
    }
  }
  return m;
}

struct SmoTrainResult {
  SvmBinaryModel model;
  SmoSolution solution;
};

inline SmoTrainResult smo_train(const std::vector<Embedding>& x, std::span<const int> y,
                                double c, double gamma, double tol = 1e-3,
                                int max_passes = 200) {
  require(x.size() == y.size(), "embedding count differs from label count");
  check_binary_labels(y);
  const GramMatrix gram(x, gamma);
  std::vector<std::size_t> index(x.size());
  std::iota(index.begin(), index.end(), std::size_t{0});
  SmoTrainResult r;
  r.solution = smo_solve(gram, y, SmoOptions{c, tol, max_passes});
  r.model = make_binary_model(x, index, y, r.solution, c, gamma);
  return r;
}

// ---------------------------------------------------------------------------
// Platt scaling

struct PlattCalibrator {
  float a = 0.0f;
  float b = 0.0f;
  // True when a > 0, i.e. probability falls as the decision value grows.
  bool inverted = false;
  int iterations = 0;  // fit diagnostic, not part of the model

  double probability(double decision) const {
    const double t = static_cast<double>(a) * decision + b;
    // Stable evaluation of 1 / (1 + exp(t)).
    return t >= 0 ? std::exp(-t) / (1.0 + std::exp(-t)) : 1.0 / (1.0 + std::exp(t));
  }

  friend bool operator==(const PlattCalibrator& x, const PlattCalibrator& y) {
    return x.a == y.a && x.b == y.b && x.inverted == y.inverted;
  }
};

// Newton's method with backtracking on the regularized-target sigmoid NLL.
inline PlattCalibrator platt_fit(std::span<const double> decisions, std::span<const int> y) {
  require(decisions.size() == y.size(), "decision count differs from label count");
  double n_pos = 0, n_neg = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (!std::isfinite(decisions[i])) throw PreconditionError("non-finite decision value");
    (y[i] > 0 ? n_pos : n_neg) += 1;
  }
  if (n_pos == 0 || n_neg == 0) {
    throw PreconditionError("Platt fit needs both classes; got a single class of " +
                            std::to_string(y.size()) + " points");
  }
  const double hi_target = (n_pos + 1.0) / (n_pos + 2.0);
  const double lo_target = 1.0 / (n_neg + 2.0);
  std::vector<double> t(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) t[i] = y[i] > 0 ? hi_target : lo_target;

  auto nll = [&](double a, double b) {
    double f = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double z = decisions[i] * a + b;
      f += z >= 0 ? t[i] * z + std::log1p(std::exp(-z)) : (t[i] - 1.0) * z + std::log1p(std::exp(z));
    }
    return f;
  };

  constexpr int kMaxIter = 100;
  constexpr double kGradTol = 1e-8;
  constexpr double kMinStep = 1e-10;
  constexpr double kRidge = 1e-12;
  double a = 0.0;
  double b = std::log((n_neg + 1.0) / (n_pos + 1.0));
  double fval = nll(a, b);
  int iter = 0;
  for (; iter < kMaxIter; ++iter) {
    double h11 = kRidge, h22 = kRidge, h21 = 0.0, g1 = 0.0, g2 = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double z = decisions[i] * a + b;
      double p, q;
      if (z >= 0) {
        p = std::exp(-z) / (1.0 + std::exp(-z));
        q = 1.0 / (1.0 + std::exp(-z));
      } else {
        p = 1.0 / (1.0 + std::exp(z));
        q = std::exp(z) / (1.0 + std::exp(z));
      }
      const double d2 = p * q;
      h11 += decisions[i] * decisions[i] * d2;
      h22 += d2;
      h21 += decisions[i] * d2;
      const double d1 = t[i] - p;
      g1 += decisions[i] * d1;
      g2 += d1;
    }
    if (std::hypot(g1, g2) < kGradTol) break;
    const double det = h11 * h22 - h21 * h21;
    const double da = -(h22 * g1 - h21 * g2) / det;
    const double db = -(-h21 * g1 + h11 * g2) / det;
    const double gd = g1 * da + g2 * db;
    double stepsize = 1.0;
    bool moved = false;
    while (stepsize >= kMinStep) {
      const double na = a + stepsize * da, nb = b + stepsize * db;
      const double nf = nll(na, nb);
      if (nf < fval + 1e-4 * stepsize * gd) {
        a = na;
        b = nb;
        fval = nf;
        moved = true;
        break;
      }
      stepsize /= 2.0;
    }
    if (!moved) break;
  }
  PlattCalibrator cal;
  cal.a = static_cast<float>(a);
  cal.b = static_cast<float>(b);
  cal.inverted = a > 0.0;
  cal.iterations = iter;
  return cal;
}

// ---------------------------------------------------------------------------
// One-vs-rest

struct OvrClassModel {
  SvmBinaryModel svm;
  PlattCalibrator platt;
  bool converged = true;

  friend bool operator==(const OvrClassModel& x, const OvrClassModel& y) {
    return x.svm == y.svm && x.platt == y.platt;
  }
};

struct SvmOvrModel {
  LabelSpace label_space{Task::kB};
  std::vector<OvrClassModel> per_class;

  bool all_converged() const {
    return std::all_of(per_class.begin(), per_class.end(),
                       [](const OvrClassModel& m) { return m.converged; });
  }

  friend bool operator==(const SvmOvrModel&, const SvmOvrModel&) = default;
};

struct OvrOptions {
  double c = 1.0;
  double gamma = 1.0;
  double tol = 1e-3;
  int max_passes = 200;
  int calibration_folds = 3;
  int jobs = 1;
};

struct OvrPrediction {
  int class_id = 0;
  std::vector<double> probabilities;  // independent one-vs-rest, not renormalized
};

// Argmax with ties to the lowest index.
inline int argmax_lowest(std::span<const double> v) {
  int best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
  }
  return best;
}

namespace detail {

// Deterministic stratified assignment: the k-th member of each class (in
// index order) goes to fold k mod folds.
inline std::vector<int> round_robin_folds(std::span<const int> labels, int num_classes,
                                          int folds) {
  std::vector<int> counter(static_cast<std::size_t>(num_classes), 0);
  std::vector<int> fold(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    fold[i] = counter[static_cast<std::size_t>(labels[i])]++ % folds;
  }
  return fold;
}

inline void check_class_counts(std::span<const int> labels, LabelSpace ls, int min_count,
                               const char* why) {
  const auto hist = class_histogram(labels, ls.num_classes());
  int present = 0;
  for (int h : hist) present += h > 0;
  if (present < 2) {
    throw PreconditionError("need at least 2 distinct classes, got " + std::to_string(present));
  }
  for (int c = 0; c < ls.num_classes(); ++c) {
    if (hist[static_cast<std::size_t>(c)] < min_count) {
      throw PreconditionError("class " + std::to_string(c) + " (" + ls.class_name(c) + ") has " +
                              std::to_string(hist[static_cast<std::size_t>(c)]) +
                              " examples; " + why + " needs at least " +
                              std::to_string(min_count));
    }
  }
}

// Trains the OvR model on the rows `index` of x, using a Gram matrix over
// all of x. labels are indexed like x.
inline SvmOvrModel ovr_train_indexed(const std::vector<Embedding>& x, const GramMatrix& gram,
                                     std::span<const std::size_t> index,
                                     std::span<const int> labels, LabelSpace ls,
                                     const OvrOptions& opt) {
  std::vector<int> sub_labels(index.size());
  for (std::size_t i = 0; i < index.size(); ++i) sub_labels[i] = labels[index[i]];
  check_class_counts(sub_labels, ls, opt.calibration_folds, "calibration folding");
  const auto fold = round_robin_folds(sub_labels, ls.num_classes(), opt.calibration_folds);
  const SmoOptions smo{opt.c, opt.tol, opt.max_passes};

  SvmOvrModel model;
  model.label_space = ls;
  model.per_class.resize(static_cast<std::size_t>(ls.num_classes()));
  parallel_for(model.per_class.size(), opt.jobs, [&](std::size_t cls) {
    std::vector<int> y(index.size());
    for (std::size_t i = 0; i < index.size(); ++i) {
      y[i] = sub_labels[i] == static_cast<int>(cls) ? 1 : -1;
    }
    OvrClassModel& out = model.per_class[cls];
    const SmoSolution full = smo_solve(GramView{&gram, index}, y, smo);
    out.svm = make_binary_model(x, index, y, full, opt.c, opt.gamma);
    out.converged = full.converged;

    // Out-of-fold decision values for calibration.
    std::vector<double> decisions(index.size());
    for (int f = 0; f < opt.calibration_folds; ++f) {
      std::vector<std::size_t> train_idx;
      std::vector<int> train_y;
      for (std::size_t i = 0; i < index.size(); ++i) {
        if (fold[i] != f) {
          train_idx.push_back(index[i]);
          train_y.push_back(y[i]);
        }
      }
      const SmoSolution part = smo_solve(GramView{&gram, train_idx}, train_y, smo);
      out.converged = out.converged && part.converged;
      for (std::size_t i = 0; i < index.size(); ++i) {
        if (fold[i] != f) continue;
        double acc = part.bias;
        for (std::size_t j = 0; j < train_idx.size(); ++j) {
          if (part.alpha[j] > kSupportThreshold) {
            acc += part.alpha[j] * train_y[j] * gram(index[i], train_idx[j]);
          }
        }
        decisions[i] = acc;
      }
    }
    out.platt = platt_fit(decisions, y);
  });
  return model;
}

}  // namespace detail

inline SvmOvrModel ovr_train(const std::vector<Embedding>& z, std::span<const int> labels,
                             LabelSpace ls, const OvrOptions& opt) {
  require(z.size() == labels.size(), "embedding count differs from label count");
  require(!z.empty(), "no training embeddings");
  const GramMatrix gram(z, opt.gamma, opt.jobs);
  std::vector<std::size_t> index(z.size());
  std::iota(index.begin(), index.end(), std::size_t{0});
  return detail::ovr_train_indexed(z, gram, index, labels, ls, opt);
}

inline OvrPrediction ovr_predict(const SvmOvrModel& m, std::span<const float> z) {
  OvrPrediction p;
  p.probabilities.reserve(m.per_class.size());
  for (const auto& cls : m.per_class) {
    if (cls.svm.dimension() != 0 && cls.svm.dimension() != z.size()) {
      throw PreconditionError("query dimension " + std::to_string(z.size()) +
                              " differs from model dimension " +
                              std::to_string(cls.svm.dimension()));
    }
    p.probabilities.push_back(cls.platt.probability(svm_decision(cls.svm, z)));
  }
  p.class_id = argmax_lowest(p.probabilities);
  return p;
}

// ---------------------------------------------------------------------------
// Grid search

inline const std::vector<double> kDefaultGrid = {0.001, 0.01, 0.1, 1.0, 10.0, 100.0, 1000.0};

struct GridCell {
  double c = 0.0;
  double gamma = 0.0;
  double mean_macro_f1 = 0.0;
  std::vector<double> fold_macro_f1;
  bool converged = true;
};

struct GridSearchResult {
  double best_c = 0.0;
  double best_gamma = 0.0;
  double best_score = 0.0;
  std::vector<GridCell> table;  // ordered by C then gamma, ascending
};

struct GridOptions {
  int folds = 3;
  std::uint64_t seed = 42;
  double tol = 1e-3;
  int max_passes = 200;
  int jobs = 1;
};

// Stratified k-fold assignment: members of each class are shuffled with a
// Fisher-Yates pass driven by mt19937_64(seed), then dealt round-robin.
inline std::vector<int> stratified_folds(std::span<const int> labels, int num_classes, int k,
                                         std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<int> fold(labels.size(), 0);
  for (int cls = 0; cls < num_classes; ++cls) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == cls) members.push_back(i);
    }
    for (std::size_t i = members.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(rng() % i);
      std::swap(members[i - 1], members[j]);
    }
    for (std::size_t r = 0; r < members.size(); ++r) {
      fold[members[r]] = static_cast<int>(r % static_cast<std::size_t>(k));
    }
  }
  return fold;
}

inline GridSearchResult grid_search(const std::vector<Embedding>& z, std::span<const int> labels,
                                    LabelSpace ls, std::span<const double> c_grid,
                                    std::span<const double> gamma_grid,
                                    const GridOptions& opt) {
  require(opt.folds >= 2, "grid search needs k >= 2 folds");
  require(!c_grid.empty() && !gamma_grid.empty(), "grid search needs nonempty grids");
  require(z.size() == labels.size(), "embedding count differs from label count");
  // Each outer training split must keep 3 members per class for calibration.
  const auto hist = class_histogram(labels, ls.num_classes());
  for (int cls = 0; cls < ls.num_classes(); ++cls) {
    if (hist[static_cast<std::size_t>(cls)] < opt.folds) {
      throw PreconditionError("class " + std::to_string(cls) + " (" + ls.class_name(cls) +
                              ") has " + std::to_string(hist[static_cast<std::size_t>(cls)]) +
                              " examples, fewer than k = " + std::to_string(opt.folds));
    }
  }
  std::vector<double> cs(c_grid.begin(), c_grid.end());
  std::vector<double> gs(gamma_grid.begin(), gamma_grid.end());
  std::sort(cs.begin(), cs.end());
  std::sort(gs.begin(), gs.end());

  const auto fold = stratified_folds(labels, ls.num_classes(), opt.folds, opt.seed);
  std::vector<std::vector<std::size_t>> train_idx(static_cast<std::size_t>(opt.folds));
  std::vector<std::vector<std::size_t>> test_idx(static_cast<std::size_t>(opt.folds));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    for (int f = 0; f < opt.folds; ++f) {
      (fold[i] == f ? test_idx : train_idx)[static_cast<std::size_t>(f)].push_back(i);
    }
  }

  GridSearchResult result;
  result.table.resize(cs.size() * gs.size());
  for (std::size_t gi = 0; gi < gs.size(); ++gi) {
    const GramMatrix gram(z, gs[gi], opt.jobs);
    std::vector<double> scores(cs.size() * static_cast<std::size_t>(opt.folds));
    std::vector<char> converged(scores.size(), 1);
    parallel_for(scores.size(), opt.jobs, [&](std::size_t task) {
      const std::size_t ci = task / static_cast<std::size_t>(opt.folds);
      const std::size_t f = task % static_cast<std::size_t>(opt.folds);
      OvrOptions o;
      o.c = cs[ci];
      o.gamma = gs[gi];
      o.tol = opt.tol;
      o.max_passes = opt.max_passes;
      const SvmOvrModel m = detail::ovr_train_indexed(z, gram, train_idx[f], labels, ls, o);
      std::vector<int> truth, pred;
      for (std::size_t i : test_idx[f]) {
        truth.push_back(labels[i]);
        pred.push_back(ovr_predict(m, z[i]).class_id);
      }
      scores[task] = eval::macro_f1(eval::confusion_matrix(truth, pred, ls.num_classes()));
      converged[task] = m.all_converged();
    });
    for (std::size_t ci = 0; ci < cs.size(); ++ci) {
      GridCell& cell = result.table[ci * gs.size() + gi];
      cell.c = cs[ci];
      cell.gamma = gs[gi];
      double sum = 0.0;
      for (int f = 0; f < opt.folds; ++f) {
        const std::size_t task = ci * static_cast<std::size_t>(opt.folds) + static_cast<std::size_t>(f);
        cell.fold_macro_f1.push_back(scores[task]);
        sum += scores[task];
        cell.converged = cell.converged && converged[task];
      }
      cell.mean_macro_f1 = sum / opt.folds;
    }
  }
  // Table is C-major ascending, so a strict improvement keeps the smaller C,
  // then the smaller gamma, on ties.
  result.best_score = -1.0;
  for (const GridCell& cell : result.table) {
    if (cell.mean_macro_f1 > result.best_score) {
      result.best_score = cell.mean_macro_f1;
      result.best_c = cell.c;
      result.best_gamma = cell.gamma;
    }
  }
  return result;
}

}  // namespace imgprov::svm
