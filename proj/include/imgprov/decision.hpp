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

// Task-level decision rules: probability thresholding, the max-probability
// fusion of per-generator detectors, and score-threshold detection backed by
// a Gaussian KDE of the score distribution.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "imgprov/error.hpp"

namespace imgprov::decision {

inline constexpr std::size_t kFusionArity = 5;
inline constexpr double kDefaultTau = 0.5;
inline constexpr double kDefaultScoreThreshold = -0.035;

// p[j] is the probability that the image comes from generator j + 1
// (sd21, sdxl, sd3, dalle, midjourney). Returns the Task B class id of the
// most probable generator if it exceeds tau, else 0 (real).
inline int fuse_occ(std::span<const double> p, double tau = kDefaultTau) {
  if (p.size() != kFusionArity) {
    throw PreconditionError("fusion needs exactly 5 probabilities, got " +
                            std::to_string(p.size()));
  }
  std::size_t best = 0;
  for (std::size_t j = 0; j < p.size(); ++j) {
    if (!(p[j] >= 0.0 && p[j] <= 1.0)) {
      throw PreconditionError("fusion probability " + std::to_string(p[j]) + " outside [0, 1]");
    }
    if (p[j] > p[best]) best = j;
  }
  return p[best] > tau ? static_cast<int>(best) + 1 : 0;
}

enum class Verdict { kReal = 0, kFake = 1 };

// Strict inequality: p_fake == tau is real.
inline Verdict binary_decide(double p_fake, double tau = kDefaultTau) {
  if (!(p_fake >= 0.0 && p_fake <= 1.0)) {
    throw PreconditionError("probability " + std::to_string(p_fake) + " outside [0, 1]");
  }
  return p_fake > tau ? Verdict::kFake : Verdict::kReal;
}

// ---------------------------------------------------------------------------
// Kernel density estimate

struct KdeModel {
  std::vector<double> samples;
  double bandwidth = 1.0;
};

// Linear-interpolation quantile of sorted data.
inline double quantile_sorted(std::span<const double> sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

// 0.9 * min(sd, IQR / 1.34) * n^(-1/5); falls back to sd when the IQR is 0.
inline double silverman_bandwidth(std::span<const double> samples) {
  const auto n = static_cast<double>(samples.size());
  double mean = 0.0;
  for (double s : samples) mean += s;
  mean /= n;
  double var = 0.0;
  for (double s : samples) var += (s - mean) * (s - mean);
  const double sd = std::sqrt(var / (n - 1.0));
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  const double iqr = quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);
  double spread = std::min(sd, iqr / 1.34);
  if (spread <= 0.0) spread = sd;
  return 0.9 * spread * std::pow(n, -0.2);
}

inline KdeModel kde_fit(std::span<const double> scores, std::optional<double> bandwidth = {}) {
  if (scores.size() < 2) {
    throw PreconditionError("KDE needs at least 2 samples, got " + std::to_string(scores.size()));
  }
  for (double s : scores) {
    if (!std::isfinite(s)) throw PreconditionError("KDE samples must be finite");
  }
  const auto [lo, hi] = std::minmax_element(scores.begin(), scores.end());
  if (*lo == *hi) throw PreconditionError("KDE input is degenerate: all samples are equal");
  KdeModel m;
  m.samples.assign(scores.begin(), scores.end());
  m.bandwidth = bandwidth ? *bandwidth : silverman_bandwidth(scores);
  require(m.bandwidth > 0.0, "KDE bandwidth must be > 0");
  return m;
}

inline double kde_density(const KdeModel& m, double x) {
  const double inv_h = 1.0 / m.bandwidth;
  double acc = 0.0;
  for (double s : m.samples) {
    const double u = (x - s) * inv_h;
    acc += std::exp(-0.5 * u * u);
  }
  return acc * inv_h / (static_cast<double>(m.samples.size()) * std::sqrt(2.0 * std::numbers::pi));
}

// ---------------------------------------------------------------------------
// Threshold detector

enum class Direction { kFakeIfBelow, kFakeIfAbove };

inline std::string direction_name(Direction d) {
  return d == Direction::kFakeIfBelow ? "below" : "above";
}

inline Direction parse_direction(const std::string& s) {
  if (s == "below" || s == "fake_if_below") return Direction::kFakeIfBelow;
  if (s == "above" || s == "fake_if_above") return Direction::kFakeIfAbove;
  throw PreconditionError("direction must be 'below' or 'above', got '" + s + "'");
}

struct ThresholdDetector {
  double threshold = kDefaultScoreThreshold;
  Direction direction = Direction::kFakeIfBelow;
};

// The boundary value itself counts as fake.
inline Verdict threshold_classify(const ThresholdDetector& d, double score) {
  const bool fake = d.direction == Direction::kFakeIfBelow ? score <= d.threshold
                                                           : score >= d.threshold;
  return fake ? Verdict::kFake : Verdict::kReal;
}

inline std::size_t count_errors(const ThresholdDetector& d, std::span<const double> real,
                                std::span<const double> fake) {
  std::size_t errors = 0;
  for (double s : real) errors += threshold_classify(d, s) == Verdict::kFake;
  for (double s : fake) errors += threshold_classify(d, s) == Verdict::kReal;
  return errors;
}

struct ThresholdFit {
  ThresholdDetector detector;
  std::size_t errors = 0;
  double error_rate = 0.0;
  std::vector<double> candidates;  // scanned thresholds, ascending
};

namespace detail {

inline double mean_of(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline void check_threshold_inputs(std::span<const double> real, std::span<const double> fake) {
  if (real.empty() || fake.empty()) {
    throw PreconditionError("threshold fit needs both real and fake scores (got " +
                            std::to_string(real.size()) + " real, " +
                            std::to_string(fake.size()) + " fake)");
  }
}

}  // namespace detail

// Scans midpoints between consecutive distinct merged scores in both
// directions and keeps the fewest misclassifications. Ties go to the
// threshold nearest the midpoint of the class means, then to fake-if-below,
// then to the lower threshold.
inline ThresholdFit fit_threshold(std::span<const double> real, std::span<const double> fake) {
  detail::check_threshold_inputs(real, fake);
  struct Tagged {
    double score;
    bool is_fake;
  };
  std::vector<Tagged> all;
  for (double s : real) all.push_back({s, false});
  for (double s : fake) all.push_back({s, true});
  std::sort(all.begin(), all.end(), [](const Tagged& a, const Tagged& b) {
    return a.score < b.score;
  });
  const double center = 0.5 * (detail::mean_of(real) + detail::mean_of(fake));
  const std::size_t n_real = real.size(), n_fake = fake.size();

  ThresholdFit fit;
  bool have = false;
  double best_dist = 0.0;
  std::size_t real_below = 0, fake_below = 0;
  for (std::size_t i = 0; i + 1 < all.size(); ++i) {
    (all[i].is_fake ? fake_below : real_below) += 1;
    if (all[i + 1].score == all[i].score) continue;
    const double t = 0.5 * (all[i].score + all[i + 1].score);
    fit.candidates.push_back(t);
    const std::size_t err_below = real_below + (n_fake - fake_below);
    const std::size_t err_above = (n_real - real_below) + fake_below;
    const double dist = std::fabs(t - center);
    for (auto [dir, err] : {std::pair{Direction::kFakeIfBelow, err_below},
                            std::pair{Direction::kFakeIfAbove, err_above}}) {
      if (!have || err < fit.errors || (err == fit.errors && dist < best_dist)) {
        fit.detector = {t, dir};
        fit.errors = err;
        best_dist = dist;
        have = true;
      }
    }
  }
  if (!have) {
    // Every score identical: nothing separates the classes.
    fit.detector = {all.front().score, Direction::kFakeIfBelow};
    fit.errors = count_errors(fit.detector, real, fake);
  }
  fit.error_rate = static_cast<double>(fit.errors) / static_cast<double>(all.size());
  return fit;
}

// Fixed operating point. Without a direction, the one with fewer errors is
// chosen (fake-if-below on ties).
inline ThresholdFit fit_threshold_fixed(std::span<const double> real, std::span<const double> fake,
                                        double threshold, std::optional<Direction> direction = {}) {
  detail::check_threshold_inputs(real, fake);
  ThresholdFit fit;
  fit.candidates = {threshold};
  if (direction) {
    fit.detector = {threshold, *direction};
    fit.errors = count_errors(fit.detector, real, fake);
  } else {
    const ThresholdDetector below{threshold, Direction::kFakeIfBelow};
    const ThresholdDetector above{threshold, Direction::kFakeIfAbove};
    const std::size_t eb = count_errors(below, real, fake), ea = count_errors(above, real, fake);
    fit.detector = ea < eb ? above : below;
    fit.errors = std::min(ea, eb);
  }
  fit.error_rate = static_cast<double>(fit.errors) / static_cast<double>(real.size() + fake.size());
  return fit;
}

}  // namespace imgprov::decision
