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

// On-disk model bundles: a directory holding model.json plus TNSR arrays.

#include <filesystem>
#include <fstream>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "imgprov/decision.hpp"
#include "imgprov/error.hpp"
#include "imgprov/linear_probe.hpp"
#include "imgprov/svm.hpp"
#include "imgprov/tensor_store.hpp"

namespace imgprov::io {

namespace fs = std::filesystem;

inline constexpr int kModelFormatVersion = 1;
inline constexpr const char* kSidecarName = "model.json";

inline void write_json(const fs::path& path, const nlohmann::ordered_json& j) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out << j.dump(2) << "\n";
  if (!out) throw DataError("write failed for " + path.string());
}

inline nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

template <typename T>
T json_get(const nlohmann::json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw DataError(where + ": missing field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(where + ": field '" + key + "': " + e.what());
  }
}

inline void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create directory " + dir.string() + ": " + ec.message());
}

// ---------------------------------------------------------------------------
// SVM

inline void save_svm(const svm::SvmOvrModel& m, const fs::path& dir) {
  ensure_dir(dir);
  nlohmann::ordered_json j;
  j["kind"] = "svm-ovr";
  j["format_version"] = kModelFormatVersion;
  j["task"] = std::string(m.label_space.task_name());
  nlohmann::ordered_json classes = nlohmann::ordered_json::array();
  for (std::size_t c = 0; c < m.per_class.size(); ++c) {
    const auto& pc = m.per_class[c];
    nlohmann::ordered_json e;
    e["id"] = c;
    e["name"] = m.label_space.class_name(static_cast<int>(c));
    e["bias"] = pc.svm.bias;
    e["gamma"] = pc.svm.gamma;
    e["c"] = pc.svm.c;
    e["platt_a"] = pc.platt.a;
    e["platt_b"] = pc.platt.b;
    e["platt_inverted"] = pc.platt.inverted;
    e["converged"] = pc.converged;
    e["num_support"] = pc.svm.support_vectors.size();
    if (!pc.svm.support_vectors.empty()) {
      const std::string sv = "sv_" + std::to_string(c) + ".tnsr";
      const std::string coef = "coef_" + std::to_string(c) + ".tnsr";
      write_tensor(rows_to_tensor(pc.svm.support_vectors), (dir / sv).string());
      write_tensor(TensorFile::f32({pc.svm.dual_coeffs.size()}, pc.svm.dual_coeffs),
                   (dir / coef).string());
      e["support_vectors"] = sv;
      e["dual_coeffs"] = coef;
    }
    classes.push_back(e);
  }
  j["classes"] = classes;
  write_json(dir / kSidecarName, j);
}

inline svm::SvmOvrModel svm_from_json(const nlohmann::json& j, const fs::path& dir) {
  const std::string where = (dir / kSidecarName).string();
  svm::SvmOvrModel m;
  m.label_space = parse_task(json_get<std::string>(j, "task", where));
  const auto& classes = j.at("classes");
  if (!classes.is_array() || classes.size() != static_cast<std::size_t>(m.label_space.num_classes())) {
    throw DataError(where + ": class list does not match the label space");
  }
  for (const auto& e : classes) {
    svm::OvrClassModel pc;
    pc.svm.bias = json_get<float>(e, "bias", where);
    pc.svm.gamma = json_get<float>(e, "gamma", where);
    pc.svm.c = json_get<float>(e, "c", where);
    pc.platt.a = json_get<float>(e, "platt_a", where);
    pc.platt.b = json_get<float>(e, "platt_b", where);
    pc.platt.inverted = json_get<bool>(e, "platt_inverted", where);
    pc.converged = json_get<bool>(e, "converged", where);
    const auto n_sv = json_get<std::size_t>(e, "num_support", where);
    if (n_sv > 0) {
      const auto sv = read_tensor((dir / json_get<std::string>(e, "support_vectors", where)).string());
      const auto coef = read_tensor((dir / json_get<std::string>(e, "dual_coeffs", where)).string());
      pc.svm.support_vectors = tensor_rows(sv);
      const auto cv = coef.as_f32();
      pc.svm.dual_coeffs.assign(cv.begin(), cv.end());
      if (pc.svm.support_vectors.size() != n_sv || pc.svm.dual_coeffs.size() != n_sv) {
        throw DataError(where + ": support vector count mismatch");
      }
    }
    m.per_class.push_back(std::move(pc));
  }
  return m;
}

// ---------------------------------------------------------------------------
// Linear probe

inline void save_linear(const linear::LinearSoftmaxModel& m, const fs::path& dir) {
  ensure_dir(dir);
  write_tensor(TensorFile::f32({m.num_classes, m.dim}, m.weights), (dir / "weights.tnsr").string());
  write_tensor(TensorFile::f32({m.num_classes}, m.bias), (dir / "bias.tnsr").string());
  write_tensor(TensorFile::f32({m.dim}, m.mean), (dir / "mean.tnsr").string());
  write_tensor(TensorFile::f32({m.dim}, m.stddev), (dir / "std.tnsr").string());
  nlohmann::ordered_json j;
  j["kind"] = "linear-softmax";
  j["format_version"] = kModelFormatVersion;
  j["task"] = std::string(m.label_space.task_name());
  j["num_classes"] = m.num_classes;
  j["dim"] = m.dim;
  j["config"] = {{"learning_rate", m.config.learning_rate},
                 {"epochs", m.config.epochs},
                 {"l2", m.config.l2}};
  write_json(dir / kSidecarName, j);
}

inline linear::LinearSoftmaxModel linear_from_json(const nlohmann::json& j, const fs::path& dir) {
  const std::string where = (dir / kSidecarName).string();
  linear::LinearSoftmaxModel m;
  m.label_space = parse_task(json_get<std::string>(j, "task", where));
  m.num_classes = json_get<std::size_t>(j, "num_classes", where);
  m.dim = json_get<std::size_t>(j, "dim", where);
  if (j.contains("config")) {
    const auto& c = j["config"];
    m.config.learning_rate = json_get<double>(c, "learning_rate", where);
    m.config.epochs = json_get<int>(c, "epochs", where);
    m.config.l2 = json_get<double>(c, "l2", where);
  }
  auto load = [&](const char* name, std::size_t expected) {
    const auto t = read_tensor((dir / name).string());
    const auto v = t.as_f32();
    if (v.size() != expected) throw DataError(where + ": " + name + " has the wrong size");
    return std::vector<float>(v.begin(), v.end());
  };
  m.weights = load("weights.tnsr", m.num_classes * m.dim);
  m.bias = load("bias.tnsr", m.num_classes);
  m.mean = load("mean.tnsr", m.dim);
  m.stddev = load("std.tnsr", m.dim);
  if (static_cast<int>(m.num_classes) != m.label_space.num_classes()) {
    throw DataError(where + ": class count does not match the label space");
  }
  return m;
}

// ---------------------------------------------------------------------------
// Either kind

using AnyModel = std::variant<svm::SvmOvrModel, linear::LinearSoftmaxModel>;

inline AnyModel load_model(const fs::path& dir) {
  const auto j = read_json(dir / kSidecarName);
  const auto kind = json_get<std::string>(j, "kind", (dir / kSidecarName).string());
  if (kind == "svm-ovr") return svm_from_json(j, dir);
  if (kind == "linear-softmax") return linear_from_json(j, dir);
  throw DataError((dir / kSidecarName).string() + ": unknown model kind '" + kind + "'");
}

inline LabelSpace model_label_space(const AnyModel& m) {
  return std::visit([](const auto& x) { return x.label_space; }, m);
}

struct Prediction {
  int class_id = 0;
  std::vector<double> probabilities;
};

inline Prediction predict(const AnyModel& m, std::span<const float> x) {
  if (const auto* s = std::get_if<svm::SvmOvrModel>(&m)) {
    auto p = svm::ovr_predict(*s, x);
    return {p.class_id, std::move(p.probabilities)};
  }
  const auto& l = std::get<linear::LinearSoftmaxModel>(m);
  return {linear::predict_linear(l, x), linear::softmax_forward(l, x)};
}

// ---------------------------------------------------------------------------
// Threshold detector

inline void save_detector(const decision::ThresholdDetector& d, double bandwidth,
                          const fs::path& path) {
  nlohmann::ordered_json j;
  j["threshold"] = d.threshold;
  j["direction"] = decision::direction_name(d.direction);
  j["bandwidth"] = bandwidth;
  write_json(path, j);
}

inline decision::ThresholdDetector load_detector(const fs::path& path) {
  const auto j = read_json(path);
  decision::ThresholdDetector d;
  d.threshold = json_get<double>(j, "threshold", path.string());
  d.direction = decision::parse_direction(json_get<std::string>(j, "direction", path.string()));
  return d;
}

}  // namespace imgprov::io
