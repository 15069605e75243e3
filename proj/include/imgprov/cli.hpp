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

// The imgprov command line. run() parses one subcommand, executes it and
// prints a one-line JSON summary as the last line of `out`.
//
// Exit codes: 0 success, 1 usage error, 2 data or precondition error,
// 3 numeric failure (SMO non-convergence, divergent training).

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "imgprov/decision.hpp"
#include "imgprov/error.hpp"
#include "imgprov/evalkit.hpp"
#include "imgprov/features.hpp"
#include "imgprov/imaging.hpp"
#include "imgprov/linear_probe.hpp"
#include "imgprov/model_io.hpp"
#include "imgprov/parallel.hpp"
#include "imgprov/svm.hpp"
#include "imgprov/tensor_store.hpp"

namespace imgprov::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitNumeric = 3;

// Raised by a command that completed its outputs but must report a numeric
// failure (e.g. an SVM that hit max_passes).
class NumericExit : public Error {
 public:
  NumericExit(std::string what, nlohmann::ordered_json summary)
      : Error(std::move(what)), summary_(std::move(summary)) {}
  const nlohmann::ordered_json& summary() const { return summary_; }

 private:
  nlohmann::ordered_json summary_;
};

namespace detail {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

struct Globals {
  std::uint64_t seed = 42;
  int jobs = 1;
};

inline std::vector<std::vector<float>> read_rows(const std::string& path) {
  const auto t = read_tensor(path);
  if (t.dtype() != DType::kF32) throw DataError(path + ": expected an f32 tensor");
  if (t.rank() != 2) throw DataError(path + ": expected a rank-2 tensor [n, d]");
  return tensor_rows(t);
}

inline std::vector<int> read_labels(const std::string& path) {
  return tensor_to_labels(read_tensor(path));
}

inline std::vector<double> read_scores(const std::string& path) {
  const auto t = read_tensor(path);
  if (t.dtype() != DType::kF32 || t.rank() != 1) {
    throw DataError(path + ": expected an f32 score vector [n]");
  }
  const auto v = t.as_f32();
  return {v.begin(), v.end()};
}

inline void check_same_count(std::size_t a, std::size_t b, const std::string& what) {
  if (a != b) {
    throw PreconditionError(what + ": " + std::to_string(a) + " rows vs " + std::to_string(b) +
                            " labels");
  }
}

inline std::vector<std::string> class_names(LabelSpace ls) {
  std::vector<std::string> names;
  for (int c = 0; c < ls.num_classes(); ++c) names.push_back(ls.class_name(c));
  return names;
}

inline std::string join_levels(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + eval::detail::format_level(v[i]);
  return s;
}

// Image records of a manifest resolved against the manifest's directory.
struct ImageSet {
  DatasetManifest manifest;
  std::vector<std::size_t> index;  // manifest record index per selected image
  fs::path root;

  std::string path(std::size_t i) const {
    const fs::path p(manifest.records[index[i]].path);
    return (p.is_absolute() ? p : root / p).string();
  }
  std::size_t size() const { return index.size(); }
};

inline ImageSet open_images(const std::string& manifest_path, const std::string& split) {
  ImageSet s;
  s.manifest = read_manifest(manifest_path);
  s.root = fs::path(manifest_path).parent_path();
  std::optional<Split> want;
  if (split == "train") want = Split::kTrain;
  else if (split == "val") want = Split::kVal;
  else if (split == "test") want = Split::kTest;
  else if (split != "all") throw PreconditionError("split must be all, train, val or test");
  for (std::size_t i = 0; i < s.manifest.size(); ++i) {
    if (!want || s.manifest.records[i].split == *want) s.index.push_back(i);
  }
  if (s.index.empty()) throw PreconditionError(manifest_path + ": no records selected");
  return s;
}

inline std::vector<int> selected_labels(const ImageSet& s, LabelSpace ls) {
  std::vector<int> y;
  for (std::size_t i : s.index) y.push_back(ls.class_id(s.manifest.records[i].label));
  return y;
}

// Pooled feature vector, or the flattened full stack when pool == 0.
inline std::vector<float> feature_vector(const ImageRgb& img, const ImageRgb* recon,
                                         std::size_t pool) {
  const FeatureStack st = build_features(img, recon);
  if (pool == 0) return st.values;
  return pool_features(st, pool);
}

inline PerturbationSpec augmentation_spec(const std::string& kind, std::optional<double> level,
                                          std::uint64_t seed, int blur_kernel) {
  const auto k = parse_perturbation_kind(kind);
  if (level) return make_perturbation(k, *level, seed, blur_kernel);
  PerturbationSpec s;
  s.seed = seed;
  switch (k) {
    case PerturbationKind::kNoise: s.params = NoiseSpec{}; break;
    case PerturbationKind::kJpeg: s.params = JpegSpec{}; break;
    case PerturbationKind::kBrightness: s.params = BrightnessSpec{}; break;
    case PerturbationKind::kBlur: s.params = BlurSpec{BlurSpec{}.sigma, blur_kernel}; break;
  }
  s.validate();
  return s;
}

// ---------------------------------------------------------------------------
// Subcommand option sets

struct ExtractArgs {
  std::string manifest, recon, out, labels_out, scores_out, split = "all", task = "b";
  std::string perturb = "none";
  std::optional<double> level;
  std::size_t pool = 32, side = kStandardSide;
  int blur_kernel = 5;
};

struct TrainSvmArgs {
  std::string embeddings, labels, out, task = "b";
  double c = 1.0, gamma = 1.0, tol = 1e-3;
  int max_passes = 200, calibration_folds = 3;
};

struct TrainLinearArgs {
  std::string features, labels, out, task = "b";
  double lr = 1e-3, l2 = 0.0;
  int epochs = 500;
};

struct GridArgs {
  std::string embeddings, labels, out, model_out, task = "b";
  int folds = 3, max_passes = 200;
  double tol = 1e-3;
  std::vector<double> c_grid{svm::kDefaultGrid.begin(), svm::kDefaultGrid.end()};
  std::vector<double> gamma_grid{svm::kDefaultGrid.begin(), svm::kDefaultGrid.end()};
};

struct PredictArgs {
  std::string model, input, out, probs_out;
};

struct FuseArgs {
  std::string probs, out;
  double tau = decision::kDefaultTau;
};

struct ThresholdArgs {
  std::string scores, labels, out, detector, kde_out, direction = "below";
  std::optional<double> threshold, bandwidth;
  int points = 512;
};

struct EvalArgs {
  std::string truth, pred, out, task, tag = "run";
  int classes = 0;
};

struct SweepArgs {
  std::string manifest, model, out, kind = "noise", split = "all";
  std::vector<double> levels;
  std::size_t pool = 32, side = kStandardSide;
  int blur_kernel = 5;
};

// ---------------------------------------------------------------------------
// Commands

inline Json cmd_extract(const ExtractArgs& a, const Globals& g) {
  const LabelSpace ls = parse_task(a.task);
  const ImageSet set = open_images(a.manifest, a.split);
  std::optional<TensorFile> recon;
  if (!a.recon.empty()) {
    recon = read_tensor(a.recon);
    if (recon->rank() != 4 || recon->dim(0) != set.manifest.size()) {
      throw DataError(a.recon + ": expected [" + std::to_string(set.manifest.size()) +
                      ", h, w, 3] reconstructions aligned with the manifest");
    }
  }
  if (!a.scores_out.empty() && !recon) {
    throw PreconditionError("--scores-out needs --recon");
  }
  std::optional<PerturbationSpec> base;
  if (a.perturb != "none") base = augmentation_spec(a.perturb, a.level, 0, a.blur_kernel);

  const std::size_t n = set.size();
  std::vector<std::vector<float>> rows(n);
  std::vector<float> scores(n, 0.0f);
  parallel_for(n, g.jobs, [&](std::size_t i) {
    ImageRgb img = load_image(set.path(i), a.side);
    if (base) {
      PerturbationSpec spec = *base;
      spec.seed = g.seed + set.index[i];
      img = apply_perturbation(img, spec);
    }
    std::optional<ImageRgb> r;
    if (recon) r = standardize(image_from_batch(*recon, set.index[i]), a.side);
    rows[i] = feature_vector(img, r ? &*r : nullptr, a.pool);
    if (r) scores[i] = static_cast<float>(reconstruction_distance(img, *r));
  });

  if (a.pool == 0) {
    std::vector<float> flat;
    flat.reserve(n * rows.front().size());
    for (const auto& row : rows) flat.insert(flat.end(), row.begin(), row.end());
    write_tensor(TensorFile::f32({n, a.side, a.side, kFeatureChannels}, std::move(flat)), a.out);
  } else {
    write_tensor(rows_to_tensor(rows), a.out);
  }
  if (!a.labels_out.empty()) write_tensor(labels_to_tensor(selected_labels(set, ls)), a.labels_out);
  if (!a.scores_out.empty()) write_tensor(TensorFile::f32({n}, scores), a.scores_out);
  return Json{{"images", n}, {"dim", rows.front().size()}, {"out", a.out}};
}

inline Json cmd_train_svm(const TrainSvmArgs& a, const Globals& g) {
  const LabelSpace ls = parse_task(a.task);
  const auto x = read_rows(a.embeddings);
  const auto y = read_labels(a.labels);
  check_same_count(x.size(), y.size(), "train-svm");
  svm::OvrOptions opt;
  opt.c = a.c;
  opt.gamma = a.gamma;
  opt.tol = a.tol;
  opt.max_passes = a.max_passes;
  opt.calibration_folds = a.calibration_folds;
  opt.jobs = g.jobs;
  const auto m = svm::ovr_train(x, y, ls, opt);
  io::save_svm(m, a.out);
  std::size_t sv = 0;
  for (const auto& pc : m.per_class) sv += pc.svm.support_vectors.size();
  Json s{{"model", a.out}, {"c", a.c}, {"gamma", a.gamma}, {"support_vectors", sv},
         {"converged", m.all_converged()}};
  if (!m.all_converged()) {
    throw NumericExit("SMO did not converge within " + std::to_string(a.max_passes) +
                          " passes for at least one class; model saved",
                      s);
  }
  return s;
}

inline Json cmd_train_linear(const TrainLinearArgs& a, const Globals&) {
  const LabelSpace ls = parse_task(a.task);
  const auto x = read_rows(a.features);
  const auto y = read_labels(a.labels);
  check_same_count(x.size(), y.size(), "train-linear");
  linear::TrainConfig cfg;
  cfg.learning_rate = a.lr;
  cfg.epochs = a.epochs;
  cfg.l2 = a.l2;
  const auto r = linear::train_linear(x, y, ls, cfg);
  io::save_linear(r.model, a.out);
  return Json{{"model", a.out},
              {"epochs", a.epochs},
              {"initial_loss", r.loss_history.front()},
              {"final_loss", r.loss_history.back()}};
}

inline Json cmd_grid_search(const GridArgs& a, const Globals& g) {
  const LabelSpace ls = parse_task(a.task);
  const auto x = read_rows(a.embeddings);
  const auto y = read_labels(a.labels);
  check_same_count(x.size(), y.size(), "grid-search");
  svm::GridOptions opt;
  opt.folds = a.folds;
  opt.seed = g.seed;
  opt.tol = a.tol;
  opt.max_passes = a.max_passes;
  opt.jobs = g.jobs;
  const auto r = svm::grid_search(x, y, ls, a.c_grid, a.gamma_grid, opt);

  std::string csv = "c,gamma,mean_macro_f1,converged\n";
  Json cells = Json::array();
  for (const auto& cell : r.table) {
    csv += eval::detail::format_level(cell.c) + "," + eval::detail::format_level(cell.gamma) +
           "," + eval::fixed6(cell.mean_macro_f1) + "," + (cell.converged ? "1" : "0") + "\n";
    cells.push_back(Json{{"c", cell.c},
                         {"gamma", cell.gamma},
                         {"mean_macro_f1", cell.mean_macro_f1},
                         {"fold_macro_f1", cell.fold_macro_f1},
                         {"converged", cell.converged}});
  }
  eval::detail::write_text(a.out, csv);
  Json j{{"folds", a.folds}, {"seed", g.seed},       {"best_c", r.best_c},
         {"best_gamma", r.best_gamma}, {"best_score", r.best_score}, {"cells", cells}};
  eval::detail::write_text(eval::detail::json_twin_path(a.out), j.dump(2) + "\n");

  Json s{{"best_c", r.best_c}, {"best_gamma", r.best_gamma}, {"best_score", r.best_score},
         {"out", a.out}};
  if (!a.model_out.empty()) {
    svm::OvrOptions o;
    o.c = r.best_c;
    o.gamma = r.best_gamma;
    o.tol = a.tol;
    o.max_passes = a.max_passes;
    o.jobs = g.jobs;
    const auto m = svm::ovr_train(x, y, ls, o);
    io::save_svm(m, a.model_out);
    s["model"] = a.model_out;
    s["converged"] = m.all_converged();
  }
  return s;
}

inline Json cmd_predict(const PredictArgs& a, const Globals& g) {
  const auto model = io::load_model(a.model);
  const auto x = read_rows(a.input);
  const LabelSpace ls = io::model_label_space(model);
  std::vector<io::Prediction> p(x.size());
  parallel_for(x.size(), g.jobs, [&](std::size_t i) { p[i] = io::predict(model, x[i]); });
  std::vector<int> ids;
  std::vector<float> probs;
  for (const auto& q : p) {
    ids.push_back(q.class_id);
    for (double v : q.probabilities) probs.push_back(static_cast<float>(v));
  }
  write_tensor(labels_to_tensor(ids), a.out);
  if (!a.probs_out.empty() && !x.empty()) {
    write_tensor(TensorFile::f32({x.size(), static_cast<std::size_t>(ls.num_classes())}, probs),
                 a.probs_out);
  }
  return Json{{"rows", x.size()}, {"task", std::string(ls.task_name())}, {"out", a.out}};
}

inline Json cmd_fuse(const FuseArgs& a, const Globals&) {
  const auto rows = read_rows(a.probs);
  std::vector<int> ids;
  for (const auto& r : rows) {
    const std::vector<double> p(r.begin(), r.end());
    ids.push_back(decision::fuse_occ(p, a.tau));
  }
  write_tensor(labels_to_tensor(ids), a.out);
  const auto real = std::count(ids.begin(), ids.end(), 0);
  return Json{{"rows", rows.size()}, {"tau", a.tau}, {"predicted_real", real}, {"out", a.out}};
}

inline Json cmd_threshold_fit(const ThresholdArgs& a, const Globals&) {
  const auto scores = read_scores(a.scores);
  const auto labels = read_labels(a.labels);
  check_same_count(scores.size(), labels.size(), "threshold fit");
  std::vector<double> real, fake;
  for (std::size_t i = 0; i < scores.size(); ++i) (labels[i] == 0 ? real : fake).push_back(scores[i]);
  decision::ThresholdFit fit;
  if (a.threshold) {
    std::optional<decision::Direction> dir;
    if (!a.direction.empty() && a.direction != "auto") dir = decision::parse_direction(a.direction);
    fit = decision::fit_threshold_fixed(real, fake, *a.threshold, dir);
  } else {
    fit = decision::fit_threshold(real, fake);
  }
  const auto kde = decision::kde_fit(scores, a.bandwidth);
  io::save_detector(fit.detector, kde.bandwidth, a.out);
  if (!a.kde_out.empty()) {
    require(a.points >= 2, "--points must be >= 2");
    const auto rk = real.size() >= 2 ? std::optional(decision::kde_fit(real, kde.bandwidth))
                                     : std::nullopt;
    const auto fk = fake.size() >= 2 ? std::optional(decision::kde_fit(fake, kde.bandwidth))
                                     : std::nullopt;
    const auto [lo, hi] = std::minmax_element(scores.begin(), scores.end());
    const double a0 = *lo - 3.0 * kde.bandwidth, a1 = *hi + 3.0 * kde.bandwidth;
    std::string csv = "score,density_all,density_real,density_fake\n";
    char buf[160];
    for (int i = 0; i < a.points; ++i) {
      const double x = a0 + (a1 - a0) * i / (a.points - 1);
      std::snprintf(buf, sizeof buf, "%.6f,%.6f,%.6f,%.6f\n", x, decision::kde_density(kde, x),
                    rk ? decision::kde_density(*rk, x) : 0.0,
                    fk ? decision::kde_density(*fk, x) : 0.0);
      csv += buf;
    }
    eval::detail::write_text(a.kde_out, csv);
  }
  return Json{{"threshold", fit.detector.threshold},
              {"direction", decision::direction_name(fit.detector.direction)},
              {"errors", fit.errors},
              {"error_rate", fit.error_rate},
              {"bandwidth", kde.bandwidth},
              {"out", a.out}};
}

inline Json cmd_threshold_classify(const ThresholdArgs& a, const Globals&) {
  const auto scores = read_scores(a.scores);
  decision::ThresholdDetector d;
  if (!a.detector.empty()) {
    d = io::load_detector(a.detector);
  } else {
    d.threshold = a.threshold.value_or(decision::kDefaultScoreThreshold);
    d.direction = decision::parse_direction(a.direction);
  }
  std::vector<int> ids;
  for (double s : scores) ids.push_back(static_cast<int>(decision::threshold_classify(d, s)));
  write_tensor(labels_to_tensor(ids), a.out);
  return Json{{"threshold", d.threshold},
              {"direction", decision::direction_name(d.direction)},
              {"predicted_fake", std::count(ids.begin(), ids.end(), 1)},
              {"out", a.out}};
}

inline Json cmd_eval(const EvalArgs& a, const Globals&) {
  std::vector<std::string> names;
  int k = a.classes;
  if (!a.task.empty()) {
    const LabelSpace ls = parse_task(a.task);
    if (k != 0 && k != ls.num_classes()) {
      throw PreconditionError("--classes disagrees with --task");
    }
    k = ls.num_classes();
    names = class_names(ls);
  }
  if (k <= 0) throw PreconditionError("eval needs --classes or --task");
  const auto truth = read_labels(a.truth);
  const auto pred = read_labels(a.pred);
  const auto r = eval::evaluate(truth, pred, k);
  if (names.empty()) names = eval::default_class_names(static_cast<std::size_t>(k));
  if (fs::path(a.out).extension() == ".csv") {
    eval::emit_report(r, a.out, names, a.tag);
  } else {
    eval::detail::write_text(a.out, eval::report_json(r, names).dump(2) + "\n");
  }
  return Json{{"accuracy", r.accuracy}, {"macro_f1", r.macro_f1}, {"n", truth.size()},
              {"out", a.out}};
}

inline Json cmd_sweep(const SweepArgs& a, const Globals& g) {
  const auto kind = parse_perturbation_kind(a.kind);
  const auto levels = a.levels.empty() ? eval::default_levels(kind) : a.levels;
  const auto model = io::load_model(a.model);
  const LabelSpace ls = io::model_label_space(model);
  const ImageSet set = open_images(a.manifest, a.split);
  const auto truth = selected_labels(set, ls);

  // Record i of the selection carries noise seed base + manifest index.
  eval::SweepOptions opt;
  opt.base_seed = g.seed;
  opt.blur_kernel = a.blur_kernel;
  opt.jobs = g.jobs;
  std::vector<ImageRgb> images(set.size());
  parallel_for(set.size(), g.jobs, [&](std::size_t i) { images[i] = load_image(set.path(i), a.side); });
  auto load = [&](std::size_t i) { return images[i]; };
  auto predict = [&](const ImageRgb& img, std::size_t) {
    return io::predict(model, feature_vector(img, nullptr, a.pool)).class_id;
  };
  const auto grid =
      eval::robustness_sweep(truth, ls.num_classes(), load, predict, kind, levels, opt);
  eval::emit_report(grid, a.out, class_names(ls));
  Json acc = Json::array(), f1 = Json::array();
  for (const auto& r : grid.reports) {
    acc.push_back(r.accuracy);
    f1.push_back(r.macro_f1);
  }
  return Json{{"kind", a.kind}, {"levels", levels}, {"accuracy", acc}, {"macro_f1", f1},
              {"out", a.out}};
}

}  // namespace detail

// argv[0] is the program name.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
  using detail::Json;
  detail::Globals g;
  CLI::App app{"Image provenance toolkit: features, SVM / linear classifiers, decision rules "
               "and robustness evaluation over TNSR files and JSON-Lines manifests.",
               "imgprov"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1, 1);
  app.fallthrough();
  app.add_option("--seed", g.seed, "Seed for every random draw (noise, fold shuffles)");
  app.add_option("--jobs", g.jobs, "Worker threads; results do not depend on this")
      ->check(CLI::PositiveNumber);

  detail::ExtractArgs ex;
  auto* extract = app.add_subcommand("extract", "Compute 5-channel features for a manifest");
  extract->add_option("--manifest", ex.manifest, "JSON-Lines manifest")->required();
  extract->add_option("--recon", ex.recon, "Reconstructions TNSR [n, h, w, 3], manifest order");
  extract->add_option("--out", ex.out, "Output features TNSR")->required();
  extract->add_option("--pool", ex.pool, "Pooled side per channel; 0 writes the full stack");
  extract->add_option("--side", ex.side, "Standardized square image side");
  extract->add_option("--split", ex.split, "all | train | val | test");
  extract->add_option("--task", ex.task, "Label space for --labels-out: a | b");
  extract->add_option("--labels-out", ex.labels_out, "Write class ids as TNSR u8 [n]");
  extract->add_option("--scores-out", ex.scores_out,
                      "Write mean absolute reconstruction error per image (needs --recon)");
  extract->add_option("--perturb", ex.perturb,
                      "Augment before extraction: none | noise | jpeg | brightness | blur");
  extract->add_option("--level", ex.level,
                      "Perturbation level (default: noise 0.3, jpeg 50, brightness 0.5, blur 5)");
  extract->add_option("--blur-kernel", ex.blur_kernel, "Blur kernel size (odd)");

  detail::TrainSvmArgs ts;
  auto* train_svm = app.add_subcommand("train-svm", "Train a one-vs-rest RBF SVM with Platt scaling");
  train_svm->add_option("--embeddings", ts.embeddings, "Embeddings TNSR f32 [n, d]")->required();
  train_svm->add_option("--labels", ts.labels, "Class ids TNSR [n]")->required();
  train_svm->add_option("--task", ts.task, "a | b");
  train_svm->add_option("--c", ts.c, "Soft-margin penalty C")->check(CLI::PositiveNumber);
  train_svm->add_option("--gamma", ts.gamma, "RBF gamma")->check(CLI::PositiveNumber);
  train_svm->add_option("--tol", ts.tol, "KKT tolerance");
  train_svm->add_option("--max-passes", ts.max_passes, "SMO pass limit");
  train_svm->add_option("--calibration-folds", ts.calibration_folds,
                        "Folds for out-of-sample Platt decisions");
  train_svm->add_option("--out", ts.out, "Model directory")->required();

  detail::TrainLinearArgs tl;
  auto* train_linear = app.add_subcommand("train-linear", "Train the softmax linear probe");
  train_linear->add_option("--features", tl.features, "Features TNSR f32 [n, d]")->required();
  train_linear->add_option("--labels", tl.labels, "Class ids TNSR [n]")->required();
  train_linear->add_option("--task", tl.task, "a | b");
  train_linear->add_option("--lr", tl.lr, "Learning rate (loss is summed over the batch)");
  train_linear->add_option("--epochs", tl.epochs, "Full-batch gradient steps");
  train_linear->add_option("--l2", tl.l2, "Weight decay");
  train_linear->add_option("--out", tl.out, "Model directory")->required();

  detail::GridArgs gs;
  auto* grid = app.add_subcommand("grid-search", "Stratified k-fold search over C and gamma");
  grid->add_option("--embeddings", gs.embeddings, "Embeddings TNSR f32 [n, d]")->required();
  grid->add_option("--labels", gs.labels, "Class ids TNSR [n]")->required();
  grid->add_option("--task", gs.task, "a | b");
  grid->add_option("--folds", gs.folds, "k");
  grid->add_option("--c-grid", gs.c_grid, "Comma-separated C values")->delimiter(',');
  grid->add_option("--gamma-grid", gs.gamma_grid, "Comma-separated gamma values")->delimiter(',');
  grid->add_option("--tol", gs.tol, "KKT tolerance");
  grid->add_option("--max-passes", gs.max_passes, "SMO pass limit");
  grid->add_option("--out", gs.out, "Score table CSV (JSON twin written alongside)")->required();
  grid->add_option("--model-out", gs.model_out, "Also train the best cell on all data");

  detail::PredictArgs pa;
  auto* predict = app.add_subcommand("predict", "Predict class ids with a saved model");
  predict->add_option("--model", pa.model, "Model directory")->required();
  predict->add_option("--input", pa.input, "Embeddings or features TNSR f32 [n, d]")->required();
  predict->add_option("--out", pa.out, "Predicted class ids TNSR u8 [n]")->required();
  predict->add_option("--probs-out", pa.probs_out, "Per-class probabilities TNSR f32 [n, K]");

  detail::FuseArgs fa;
  auto* fuse = app.add_subcommand("fuse", "Max-probability fusion of five per-generator detectors");
  fuse->add_option("--probs", fa.probs, "Probabilities TNSR f32 [n, 5]")->required();
  fuse->add_option("--tau", fa.tau, "A generator must exceed this to be chosen");
  fuse->add_option("--out", fa.out, "Task B class ids TNSR u8 [n]")->required();

  detail::ThresholdArgs ta;
  auto* threshold = app.add_subcommand("threshold", "Score-threshold detector");
  threshold->require_subcommand(1, 1);
  auto* th_fit = threshold->add_subcommand("fit", "Fit a threshold on labelled scores");
  th_fit->add_option("--scores", ta.scores, "Scores TNSR f32 [n]")->required();
  th_fit->add_option("--labels", ta.labels, "0 = real, nonzero = fake, TNSR [n]")->required();
  th_fit->add_option("--threshold", ta.threshold,
                     "Fixed operating point (e.g. -0.035); omit to scan midpoints");
  th_fit->add_option("--direction", ta.direction,
                     "below | above | auto; used only with --threshold");
  th_fit->add_option("--bandwidth", ta.bandwidth, "KDE bandwidth (default: Silverman)");
  th_fit->add_option("--kde-out", ta.kde_out, "Write KDE curves as CSV");
  th_fit->add_option("--points", ta.points, "KDE curve resolution");
  th_fit->add_option("--out", ta.out, "Detector JSON")->required();
  auto* th_classify = threshold->add_subcommand("classify", "Classify scores as real / fake");
  th_classify->add_option("--scores", ta.scores, "Scores TNSR f32 [n]")->required();
  th_classify->add_option("--detector", ta.detector, "Detector JSON from 'threshold fit'");
  th_classify->add_option("--threshold", ta.threshold, "Operating point")
      ->default_str("-0.035");
  th_classify->add_option("--direction", ta.direction, "below | above");
  th_classify->add_option("--out", ta.out, "0 = real, 1 = fake, TNSR u8 [n]")->required();

  detail::EvalArgs ea;
  auto* evalc = app.add_subcommand("eval", "Accuracy, macro-F1 and confusion matrix");
  evalc->add_option("--truth", ea.truth, "True class ids TNSR [n]")->required();
  evalc->add_option("--pred", ea.pred, "Predicted class ids TNSR [n]")->required();
  evalc->add_option("--classes", ea.classes, "Number of classes");
  evalc->add_option("--task", ea.task, "a | b (names the classes)");
  evalc->add_option("--tag", ea.tag, "Method tag for CSV output");
  evalc->add_option("--out", ea.out, "Report path: .json, or .csv with a JSON twin")->required();

  detail::SweepArgs sa;
  auto* sweep = app.add_subcommand("sweep", "Robustness sweep through features and a saved model");
  sweep->add_option("--manifest", sa.manifest, "JSON-Lines manifest")->required();
  sweep->add_option("--model", sa.model, "Model directory trained on extract features")
      ->required();
  sweep->add_option("--kind", sa.kind, "noise | jpeg | brightness | blur");
  sweep->add_option("--levels", sa.levels,
                    "Comma-separated levels (default: noise 0,0.1,0.2; jpeg 100,80,60; "
                    "brightness 1,0.75,0.5; blur 0,2,4)")
      ->delimiter(',')
      ->default_str("per kind");
  sweep->add_option("--pool", sa.pool, "Pooled side; must match the model's features");
  sweep->add_option("--side", sa.side, "Standardized square image side");
  sweep->add_option("--split", sa.split, "all | train | val | test");
  sweep->add_option("--blur-kernel", sa.blur_kernel, "Blur kernel size (odd)");
  sweep->add_option("--out", sa.out, "Sweep CSV (JSON twin written alongside)")->required();

  std::string command;
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    std::string message = e.what();
    if (!app.get_subcommands().size()) {
      for (int i = 1; i < argc; ++i) {
        const std::string tok = argv[i];
        if (tok == "--seed" || tok == "--jobs") {
          ++i;
        } else if (!tok.starts_with("-")) {
          if (app.get_subcommand_no_throw(tok) == nullptr) {
            message = "unknown subcommand '" + tok + "'";
          }
          break;
        }
      }
    }
    err << "error: " << message << "\n\n" << app.help();
    out << Json{{"status", "usage_error"}, {"exit_code", kExitUsage}, {"message", message}}.dump()
        << "\n";
    return kExitUsage;
  }

  auto finish = [&](const std::string& status, int code, Json summary) {
    Json line{{"command", command}, {"status", status}, {"exit_code", code}};
    for (auto& [k, v] : summary.items()) line[k] = v;
    out << line.dump() << "\n";
    return code;
  };

  try {
    Json summary;
    if (extract->parsed()) {
      command = "extract";
      summary = detail::cmd_extract(ex, g);
    } else if (train_svm->parsed()) {
      command = "train-svm";
      summary = detail::cmd_train_svm(ts, g);
    } else if (train_linear->parsed()) {
      command = "train-linear";
      summary = detail::cmd_train_linear(tl, g);
    } else if (grid->parsed()) {
      command = "grid-search";
      summary = detail::cmd_grid_search(gs, g);
    } else if (predict->parsed()) {
      command = "predict";
      summary = detail::cmd_predict(pa, g);
    } else if (fuse->parsed()) {
      command = "fuse";
      summary = detail::cmd_fuse(fa, g);
    } else if (th_fit->parsed()) {
      command = "threshold fit";
      summary = detail::cmd_threshold_fit(ta, g);
    } else if (th_classify->parsed()) {
      command = "threshold classify";
      summary = detail::cmd_threshold_classify(ta, g);
    } else if (evalc->parsed()) {
      command = "eval";
      summary = detail::cmd_eval(ea, g);
    } else if (sweep->parsed()) {
      command = "sweep";
      summary = detail::cmd_sweep(sa, g);
    }
    return finish("ok", kExitOk, std::move(summary));
  } catch (const NumericExit& e) {
    err << "error: " << e.what() << "\n";
    Json s = e.summary();
    s["message"] = e.what();
    return finish("numeric_error", kExitNumeric, std::move(s));
  } catch (const NumericError& e) {
    err << "error: " << e.what() << "\n";
    return finish("numeric_error", kExitNumeric, Json{{"message", e.what()}});
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return finish("data_error", kExitData, Json{{"message", e.what()}});
  }
}

inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
  std::vector<const char*> argv = {"imgprov"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace imgprov::cli
