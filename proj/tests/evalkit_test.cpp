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


#include "imgprov/evalkit.hpp"

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <gtest/gtest.h>
#include <json.hpp>

#include "oracles.hpp"

namespace {

namespace eval = imgprov::eval;
using imgprov::ImageRgb;
using imgprov::PerturbationKind;

std::string ReadAll(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string TempPath(const std::string& name) {
  return (std::filesystem::path(::testing::TempDir()) / name).string();
}

TEST(Confusion, Examples) {
  EXPECT_EQ(eval::confusion_matrix(std::vector<int>{0, 1}, std::vector<int>{0, 1}, 2),
            (eval::ConfusionMatrix{{1, 0}, {0, 1}}));
  EXPECT_EQ(eval::confusion_matrix(std::vector<int>{0, 0}, std::vector<int>{1, 1}, 2),
            (eval::ConfusionMatrix{{0, 2}, {0, 0}}));
  EXPECT_EQ(eval::confusion_matrix(std::vector<int>{}, std::vector<int>{}, 3),
            eval::ConfusionMatrix(3, std::vector<std::int64_t>(3, 0)));
}

TEST(Confusion, Errors) {
  EXPECT_THROW(eval::confusion_matrix(std::vector<int>{0}, std::vector<int>{0, 1}, 2),
               imgprov::PreconditionError);
  EXPECT_THROW(eval::confusion_matrix(std::vector<int>{2}, std::vector<int>{0}, 2),
               imgprov::PreconditionError);
  EXPECT_THROW(eval::confusion_matrix(std::vector<int>{0}, std::vector<int>{-1}, 2),
               imgprov::PreconditionError);
}

TEST(Accuracy, Examples) {
  EXPECT_DOUBLE_EQ(eval::accuracy({{1, 0}, {0, 1}}), 1.0);
  EXPECT_DOUBLE_EQ(eval::accuracy({{0, 2}, {0, 0}}), 0.0);
  EXPECT_DOUBLE_EQ(eval::accuracy({{3, 1}, {1, 3}}), 0.75);
  EXPECT_THROW(eval::accuracy({{0, 0}, {0, 0}}), imgprov::PreconditionError);
}

TEST(MacroF1, WorkedExample) {
  const auto r = eval::evaluate(std::vector<int>{0, 0, 1, 1}, std::vector<int>{0, 1, 1, 1}, 2);
  EXPECT_NEAR(r.f1[0], 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(r.f1[1], 0.8, 1e-12);
  EXPECT_NEAR(r.macro_f1, 0.733333, 1e-6);
  EXPECT_DOUBLE_EQ(r.accuracy, 0.75);
  EXPECT_EQ(r.classes_in_mean, 2);
}

TEST(MacroF1, PerfectPredictionsAnyK) {
  for (int k = 1; k <= 8; ++k) {
    std::vector<int> t;
    for (int i = 0; i < 3 * k; ++i) t.push_back(i % k);
    EXPECT_DOUBLE_EQ(eval::evaluate(t, t, k).macro_f1, 1.0);
  }
}

TEST(MacroF1, NeverPredictedClassScoresZero) {
  // Class 1 is never predicted: precision 0/0 -> 0, f1 -> 0.
  const auto r = eval::evaluate(std::vector<int>{0, 1}, std::vector<int>{0, 0}, 2);
  EXPECT_DOUBLE_EQ(r.precision[1], 0.0);
  EXPECT_DOUBLE_EQ(r.f1[1], 0.0);
  EXPECT_NEAR(r.macro_f1, (2.0 / 3.0) / 2.0, 1e-12);
}

TEST(MacroF1, ClassesAbsentFromTruthExcluded) {
  // Six-class space, only classes 0 and 2 occur in the truth.
  const auto r = eval::evaluate(std::vector<int>{0, 0, 2, 2}, std::vector<int>{0, 0, 2, 2}, 6);
  EXPECT_EQ(r.classes_in_mean, 2);
  EXPECT_DOUBLE_EQ(r.macro_f1, 1.0);
  // A false positive on an absent class still lowers the present classes.
  const auto s = eval::evaluate(std::vector<int>{0, 0, 2, 2}, std::vector<int>{0, 5, 2, 2}, 6);
  EXPECT_EQ(s.classes_in_mean, 2);
  EXPECT_NEAR(s.macro_f1, 0.5 * (2.0 / 3.0 + 1.0), 1e-12);
}

TEST(MacroF1, RandomMatricesMatchDefinition) {
  std::mt19937_64 rng(1234);
  for (int t = 0; t < 1000; ++t) {
    const std::size_t k = 4;
    eval::ConfusionMatrix cm(k, std::vector<std::int64_t>(k));
    for (auto& row : cm) {
      for (auto& v : row) v = static_cast<std::int64_t>(rng() % 20) * (rng() % 5 != 0);
    }
    if (eval::total(cm) == 0) cm[0][0] = 1;
    const auto oracle = imgprov::oracle::definitional_metrics(cm);
    ASSERT_NEAR(eval::accuracy(cm), oracle.accuracy, 1e-9);
    ASSERT_NEAR(eval::macro_f1(cm), oracle.macro_f1, 1e-9);
    const auto r = eval::make_report(cm);
    double mean = 0.0;
    int present = 0;
    for (std::size_t c = 0; c < k; ++c) {
      std::int64_t row = 0;
      for (auto v : cm[c]) row += v;
      if (row > 0) {
        mean += r.f1[c];
        ++present;
      }
    }
    ASSERT_NEAR(r.macro_f1, mean / present, 1e-12);
    ASSERT_EQ(eval::total(r.confusion), eval::total(cm));
  }
}

TEST(Levels, DefaultsAndValidation) {
  EXPECT_EQ(eval::default_levels(PerturbationKind::kNoise), (std::vector<double>{0, 0.1, 0.2}));
  EXPECT_EQ(eval::default_levels(PerturbationKind::kJpeg), (std::vector<double>{100, 80, 60}));
  EXPECT_EQ(eval::default_levels(PerturbationKind::kBrightness),
            (std::vector<double>{1, 0.75, 0.5}));
  EXPECT_EQ(eval::default_levels(PerturbationKind::kBlur), (std::vector<double>{0, 2, 4}));
  EXPECT_THROW(eval::check_levels(std::vector<double>{0.0, 0.2, 0.1}), imgprov::PreconditionError);
  EXPECT_THROW(eval::check_levels(std::vector<double>{0.1, 0.1}), imgprov::PreconditionError);
  EXPECT_THROW(eval::check_levels(std::vector<double>{}), imgprov::PreconditionError);
  EXPECT_NO_THROW(eval::check_levels(std::vector<double>{3.0}));
}

// Small images whose class is decided by mean brightness.
struct ToyData {
  std::vector<ImageRgb> images;
  std::vector<int> truth;
};

ToyData MakeToy(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> bright(0.45f, 0.9f), dark(0.02f, 0.2f);
  ToyData d;
  for (int i = 0; i < n; ++i) {
    const int cls = i % 3 == 0 ? 0 : 1;
    d.images.emplace_back(8, 8, cls == 0 ? dark(rng) : bright(rng));
    d.truth.push_back(cls);
  }
  return d;
}

int BrightnessClassifier(const ImageRgb& img) {
  double s = 0.0;
  for (float v : img.pixels) s += v;
  return s / static_cast<double>(img.pixels.size()) > 0.4 ? 1 : 0;
}

TEST(Sweep, IdentityLevelReproducesBaseline) {
  const auto d = MakeToy(30, 3);
  auto load = [&](std::size_t i) { return d.images[i]; };
  std::vector<int> base_pred;
  for (const auto& img : d.images) base_pred.push_back(BrightnessClassifier(img));
  const auto base = eval::evaluate(d.truth, base_pred, 2);
  auto predict = [](const ImageRgb& img, std::size_t) { return BrightnessClassifier(img); };
  for (auto [kind, level] : {std::pair{PerturbationKind::kNoise, 0.0},
                             std::pair{PerturbationKind::kBrightness, 1.0},
                             std::pair{PerturbationKind::kBlur, 0.0}}) {
    const std::vector<double> levels = {level};
    const auto g = eval::robustness_sweep(d.truth, 2, load, predict, kind, levels);
    ASSERT_EQ(g.reports.size(), 1u);
    EXPECT_EQ(g.reports[0].confusion, base.confusion);
    EXPECT_EQ(g.reports[0].accuracy, base.accuracy);
    EXPECT_EQ(g.reports[0].macro_f1, base.macro_f1);
  }
}

TEST(Sweep, IdentityPassesImagesThroughUnchanged) {
  const auto d = MakeToy(6, 4);
  auto load = [&](std::size_t i) { return d.images[i]; };
  auto predict = [&](const ImageRgb& img, std::size_t i) {
    EXPECT_EQ(img, d.images[i]);
    return d.truth[i];
  };
  const std::vector<double> levels = {0.0};
  eval::robustness_sweep(d.truth, 2, load, predict, PerturbationKind::kNoise, levels);
}

TEST(Sweep, BrightnessDegradesMonotonically) {
  const auto d = MakeToy(60, 8);
  auto load = [&](std::size_t i) { return d.images[i]; };
  auto predict = [](const ImageRgb& img, std::size_t) { return BrightnessClassifier(img); };
  const auto levels = eval::default_levels(PerturbationKind::kBrightness);
  const auto g =
      eval::robustness_sweep(d.truth, 2, load, predict, PerturbationKind::kBrightness, levels);
  ASSERT_EQ(g.reports.size(), 3u);
  EXPECT_DOUBLE_EQ(g.reports[0].accuracy, 1.0);
  EXPECT_LT(g.reports[1].accuracy, g.reports[0].accuracy);
  EXPECT_LT(g.reports[2].accuracy, g.reports[1].accuracy);
}

TEST(Sweep, NoiseDeterministicAcrossJobs) {
  const auto d = MakeToy(40, 9);
  auto load = [&](std::size_t i) { return d.images[i]; };
  auto predict = [](const ImageRgb& img, std::size_t) { return BrightnessClassifier(img); };
  const std::vector<double> levels = {0.0, 0.3, 0.6};
  eval::SweepOptions one, many;
  many.jobs = 8;
  const auto a =
      eval::robustness_sweep(d.truth, 2, load, predict, PerturbationKind::kNoise, levels, one);
  const auto b =
      eval::robustness_sweep(d.truth, 2, load, predict, PerturbationKind::kNoise, levels, many);
  for (std::size_t i = 0; i < levels.size(); ++i) {
    EXPECT_EQ(a.reports[i].confusion, b.reports[i].confusion);
  }
}

TEST(Sweep, NoiseSeedIsBasePlusIndex) {
  const auto d = MakeToy(5, 10);
  auto load = [&](std::size_t i) { return d.images[i]; };
  auto predict = [&](const ImageRgb& img, std::size_t i) {
    EXPECT_EQ(img, imgprov::add_noise(d.images[i], 0.1f, 42 + i));
    return d.truth[i];
  };
  const std::vector<double> levels = {0.1};
  eval::robustness_sweep(d.truth, 2, load, predict, PerturbationKind::kNoise, levels);
}

TEST(Sweep, InvalidLevelRejectedUpFront) {
  const auto d = MakeToy(3, 1);
  int calls = 0;
  auto load = [&](std::size_t i) { return d.images[i]; };
  auto predict = [&](const ImageRgb&, std::size_t) { return ++calls, 0; };
  const std::vector<double> levels = {1.0, 0.0};
  EXPECT_THROW(eval::robustness_sweep(d.truth, 2, load, predict, PerturbationKind::kBrightness,
                                      levels),
               imgprov::PreconditionError);
  EXPECT_EQ(calls, 0);
}

eval::SweepGrid ThreeLevelGrid() {
  eval::SweepGrid g;
  g.kind = PerturbationKind::kJpeg;
  g.levels = {100, 80, 60};
  g.reports.push_back(eval::evaluate(std::vector<int>{0, 1, 2}, std::vector<int>{0, 1, 2}, 3));
  g.reports.push_back(eval::evaluate(std::vector<int>{0, 1, 2}, std::vector<int>{0, 1, 1}, 3));
  g.reports.push_back(eval::evaluate(std::vector<int>{0, 1, 2}, std::vector<int>{1, 1, 1}, 3));
  return g;
}

TEST(Report, SweepCsvRowsAndHeader) {
  const auto path = TempPath("sweep.csv");
  eval::emit_report(ThreeLevelGrid(), path, {"real", "sd21", "sdxl"});
  const std::string csv = ReadAll(path);
  EXPECT_EQ(csv,
            "level,accuracy,macro_f1,f1_real,f1_sd21,f1_sdxl\n"
            "100,1.000000,1.000000,1.000000,1.000000,1.000000\n"
            "80,0.666667,0.555556,1.000000,0.666667,0.000000\n"
            "60,0.333333,0.166667,0.000000,0.500000,0.000000\n");
  const auto j = nlohmann::json::parse(ReadAll(TempPath("sweep.json")));
  EXPECT_EQ(j["kind"], "jpeg");
  EXPECT_EQ(j["reports"].size(), 3u);
  EXPECT_EQ(j["reports"][0]["macro_f1_averaging"], eval::kMacroAveraging);
}

TEST(Report, ReemissionIsByteIdentical) {
  const auto path = TempPath("again.csv");
  eval::emit_report(ThreeLevelGrid(), path);
  const std::string first = ReadAll(path), first_json = ReadAll(TempPath("again.json"));
  eval::emit_report(ThreeLevelGrid(), path);
  EXPECT_EQ(ReadAll(path), first);
  EXPECT_EQ(ReadAll(TempPath("again.json")), first_json);
  EXPECT_NE(first.find("f1_0,f1_1,f1_2"), std::string::npos);
}

TEST(Report, MethodTaggedRow) {
  const auto path = TempPath("single.csv");
  const auto r = eval::evaluate(std::vector<int>{0, 1}, std::vector<int>{0, 1}, 2);
  eval::emit_report(r, path, {"real", "fake"}, "svm");
  EXPECT_EQ(ReadAll(path),
            "method,accuracy,macro_f1,f1_real,f1_fake\nsvm,1.000000,1.000000,1.000000,1.000000\n");
}

TEST(Report, TableOneRowPerMethod) {
  const auto path = TempPath("table.csv");
  const auto good = eval::evaluate(std::vector<int>{0, 1}, std::vector<int>{0, 1}, 2);
  const auto bad = eval::evaluate(std::vector<int>{0, 1}, std::vector<int>{1, 0}, 2);
  eval::emit_table({{"linear", good}, {"svm", bad}}, path, {"real", "fake"});
  const std::string csv = ReadAll(path);
  EXPECT_EQ(csv,
            "method,accuracy,macro_f1,f1_real,f1_fake\n"
            "linear,1.000000,1.000000,1.000000,1.000000\n"
            "svm,0.000000,0.000000,0.000000,0.000000\n");
  const auto j = nlohmann::json::parse(ReadAll(TempPath("table.json")));
  ASSERT_EQ(j.size(), 2u);
  EXPECT_EQ(j[1]["method"], "svm");
}

TEST(Report, UnwritablePathIsDataError) {
  EXPECT_THROW(eval::emit_report(ThreeLevelGrid(), "/nonexistent-dir/x.csv"), imgprov::DataError);
}

}  // namespace
