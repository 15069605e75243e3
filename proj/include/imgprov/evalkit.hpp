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

// Confusion matrices, accuracy / macro-F1, robustness sweeps and CSV/JSON
// report emission.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "imgprov/error.hpp"
#include "imgprov/imaging.hpp"
#include "imgprov/parallel.hpp"

namespace imgprov::eval {

// Rows are ground truth, columns are predictions.
using ConfusionMatrix = std::vector<std::vector<std::int64_t>>;

inline ConfusionMatrix confusion_matrix(std::span<const int> truth, std::span<const int> pred,
                                        int k) {
  require(k >= 1, "confusion matrix needs k >= 1");
  if (truth.size() != pred.size()) {
    throw PreconditionError("truth has " + std::to_string(truth.size()) +
                            " entries but predictions have " + std::to_string(pred.size()));
  }
  ConfusionMatrix cm(static_cast<std::size_t>(k), std::vector<std::int64_t>(static_cast<std::size_t>(k), 0));
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] < 0 || truth[i] >= k || pred[i] < 0 || pred[i] >= k) {
      throw PreconditionError("class id out of range [0, " + std::to_string(k) + ") at index " +
                              std::to_string(i));
    }
    ++cm[static_cast<std::size_t>(truth[i])][static_cast<std::size_t>(pred[i])];
  }
  return cm;
}

inline std::int64_t total(const ConfusionMatrix& cm) {
  std::int64_t n = 0;
  for (const auto& row : cm) {
    for (auto v : row) n += v;
  }
  return n;
}

inline double accuracy(const ConfusionMatrix& cm) {
  const std::int64_t n = total(cm);
  if (n == 0) throw PreconditionError("accuracy of an empty confusion matrix");
  std::int64_t trace = 0;
  for (std::size_t i = 0; i < cm.size(); ++i) trace += cm[i][i];
  return static_cast<double>(trace) / static_cast<double>(n);
}

struct PerClassScores {
  std::vector<double> precision, recall, f1;
  std::vector<bool> in_truth;
};

inline PerClassScores per_class_scores(const ConfusionMatrix& cm) {
  const std::size_t k = cm.size();
  PerClassScores s;
  s.precision.assign(k, 0.0);
  s.recall.assign(k, 0.0);
  s.f1.assign(k, 0.0);
  s.in_truth.assign(k, false);
  for (std::size_t c = 0; c < k; ++c) {
    std::int64_t row = 0, col = 0;
    for (std::size_t j = 0; j < k; ++j) {
      row += cm[c][j];
      col += cm[j][c];
    }
    const auto tp = static_cast<double>(cm[c][c]);
    s.in_truth[c] = row > 0;
    s.precision[c] = col > 0 ? tp / static_cast<double>(col) : 0.0;
    s.recall[c] = row > 0 ? tp / static_cast<double>(row) : 0.0;
    const double denom = s.precision[c] + s.recall[c];
    s.f1[c] = denom > 0.0 ? 2.0 * s.precision[c] * s.recall[c] / denom : 0.0;
  }
  return s;
}

inline constexpr const char* kMacroAveraging = "unweighted mean over classes present in truth";

// Unweighted mean of per-class F1 over classes that occur in the truth.
inline double macro_f1(const ConfusionMatrix& cm) {
  if (total(cm) == 0) throw PreconditionError("macro-F1 of an empty confusion matrix");
  const auto s = per_class_scores(cm);
  double sum = 0.0;
  int count = 0;
  for (std::size_t c = 0; c < cm.size(); ++c) {
    if (!s.in_truth[c]) continue;
    sum += s.f1[c];
    ++count;
  }
  return sum / count;
}

struct MetricsReport {
  ConfusionMatrix confusion;
  double accuracy = 0.0;
  std::vector<double> precision, recall, f1;
  double macro_f1 = 0.0;
  int classes_in_mean = 0;
};

inline MetricsReport make_report(const ConfusionMatrix& cm) {
  MetricsReport r;
  r.confusion = cm;
  r.accuracy = accuracy(cm);
  const auto s = per_class_scores(cm);
  r.precision = s.precision;
  r.recall = s.recall;
  r.f1 = s.f1;
  r.macro_f1 = macro_f1(cm);
  for (bool b : s.in_truth) r.classes_in_mean += b;
  return r;
}

inline MetricsReport evaluate(std::span<const int> truth, std::span<const int> pred, int k) {
  return make_report(confusion_matrix(truth, pred, k));
}

// ---------------------------------------------------------------------------
// Robustness sweeps

struct SweepGrid {
  PerturbationKind kind = PerturbationKind::kNoise;
  std::vector<double> levels;
  std::vector<MetricsReport> reports;
};

inline std::vector<double> default_levels(PerturbationKind kind) {
  switch (kind) {
    case PerturbationKind::kNoise: return {0.0, 0.1, 0.2};
    case PerturbationKind::kJpeg: return {100, 80, 60};
    case PerturbationKind::kBrightness: return {1.0, 0.75, 0.5};
    case PerturbationKind::kBlur: return {0.0, 2.0, 4.0};
  }
  return {};
}

inline void check_levels(std::span<const double> levels) {
  require(!levels.empty(), "sweep needs at least one level");
  if (levels.size() < 2) return;
  const bool up = levels[1] > levels[0];
  for (std::size_t i = 1; i < levels.size(); ++i) {
    const bool ok = up ? levels[i] > levels[i - 1] : levels[i] < levels[i - 1];
    require(ok, "sweep levels must be strictly monotone");
  }
}

struct SweepOptions {
  std::uint64_t base_seed = 42;
  int blur_kernel = 5;
  int jobs = 1;
};

// load(i) returns evaluation image i; predict(img, i) returns a class id.
// Record i is perturbed with noise seed base_seed + i.
inline SweepGrid robustness_sweep(std::span<const int> truth, int num_classes,
                                  const std::function<ImageRgb(std::size_t)>& load,
                                  const std::function<int(const ImageRgb&, std::size_t)>& predict,
                                  PerturbationKind kind, std::span<const double> levels,
                                  const SweepOptions& opt = {}) {
  check_levels(levels);
  for (double level : levels) (void)make_perturbation(kind, level, 0, opt.blur_kernel);
  SweepGrid g;
  g.kind = kind;
  g.levels.assign(levels.begin(), levels.end());
  for (double level : levels) {
    std::vector<int> pred(truth.size());
    parallel_for(truth.size(), opt.jobs, [&](std::size_t i) {
      const auto spec = make_perturbation(kind, level, opt.base_seed + i, opt.blur_kernel);
      pred[i] = predict(apply_perturbation(load(i), spec), i);
    });
    g.reports.push_back(evaluate(truth, pred, num_classes));
  }
  return g;
}

// ---------------------------------------------------------------------------
// Reports

inline std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

inline std::vector<std::string> default_class_names(std::size_t k) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < k; ++i) names.push_back(std::to_string(i));
  return names;
}

inline nlohmann::ordered_json report_json(const MetricsReport& r,
                                          const std::vector<std::string>& names) {
  nlohmann::ordered_json j;
  j["accuracy"] = r.accuracy;
  j["macro_f1"] = r.macro_f1;
  j["macro_f1_averaging"] = kMacroAveraging;
  j["classes_in_mean"] = r.classes_in_mean;
  j["classes"] = names;
  j["precision"] = r.precision;
  j["recall"] = r.recall;
  j["f1"] = r.f1;
  j["confusion"] = r.confusion;
  return j;
}

namespace detail {

inline std::string json_twin_path(const std::string& csv_path) {
  std::filesystem::path p(csv_path);
  p.replace_extension(".json");
  return p.string();
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open " + path + " for writing");
  out << text;
  if (!out) throw DataError("write failed for " + path);
}

inline std::string csv_header(const std::string& first, const std::vector<std::string>& names) {
  std::string h = first + ",accuracy,macro_f1";
  for (const auto& n : names) h += ",f1_" + n;
  return h + "\n";
}

inline std::string csv_row(const std::string& first, const MetricsReport& r) {
  std::string row = first + "," + fixed6(r.accuracy) + "," + fixed6(r.macro_f1);
  for (double f : r.f1) row += "," + fixed6(f);
  return row + "\n";
}

inline std::string format_level(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace detail

inline std::string sweep_csv(const SweepGrid& g, const std::vector<std::string>& names) {
  std::string out = detail::csv_header("level", names);
  for (std::size_t i = 0; i < g.levels.size(); ++i) {
    out += detail::csv_row(detail::format_level(g.levels[i]), g.reports[i]);
  }
  return out;
}

// Writes `path` (CSV) and a JSON twin with the extension replaced by .json.
inline void emit_report(const SweepGrid& g, const std::string& path,
                        std::vector<std::string> names = {}) {
  if (g.reports.empty()) throw PreconditionError("sweep has no reports");
  if (names.empty()) names = default_class_names(g.reports.front().f1.size());
  detail::write_text(path, sweep_csv(g, names));
  nlohmann::ordered_json j;
  j["kind"] = std::string(perturbation_name(g.kind));
  j["levels"] = g.levels;
  nlohmann::ordered_json reports = nlohmann::ordered_json::array();
  for (const auto& r : g.reports) reports.push_back(report_json(r, names));
  j["reports"] = reports;
  detail::write_text(detail::json_twin_path(path), j.dump(2) + "\n");
}

inline void emit_report(const MetricsReport& r, const std::string& path,
                        std::vector<std::string> names = {}, const std::string& tag = "run") {
  if (names.empty()) names = default_class_names(r.f1.size());
  detail::write_text(path, detail::csv_header("method", names) + detail::csv_row(tag, r));
  detail::write_text(detail::json_twin_path(path), report_json(r, names).dump(2) + "\n");
}

// One row per method tag, e.g. a side-by-side comparison table.
inline void emit_table(const std::vector<std::pair<std::string, MetricsReport>>& rows,
                       const std::string& path, std::vector<std::string> names = {}) {
  if (rows.empty()) throw PreconditionError("table has no rows");
  if (names.empty()) names = default_class_names(rows.front().second.f1.size());
  std::string csv = detail::csv_header("method", names);
  nlohmann::ordered_json j = nlohmann::ordered_json::array();
  for (const auto& [tag, r] : rows) {
    csv += detail::csv_row(tag, r);
    auto entry = report_json(r, names);
    entry["method"] = tag;
    j.push_back(entry);
  }
  detail::write_text(path, csv);
  detail::write_text(detail::json_twin_path(path), j.dump(2) + "\n");
}

}  // namespace imgprov::eval
