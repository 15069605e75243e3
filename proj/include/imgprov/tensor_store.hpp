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

// TNSR container, JSON-Lines dataset manifests and label encoding.
//
// TNSR layout (all integers little-endian):
//   offset 0  : "TNSR"
//   offset 4  : version byte, 0x01
//   offset 5  : dtype byte (1 = f32, 2 = u8)
//   offset 6  : ndim byte (1..4)
//   offset 7  : ndim x u32 dimension sizes, each >= 1
//   then      : product(shape) scalars, row-major, little-endian

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <functional>
#include <iterator>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "imgprov/error.hpp"

namespace imgprov {

enum class DType : std::uint8_t { kF32 = 1, kU8 = 2 };

inline constexpr std::array<char, 4> kTensorMagic = {'T', 'N', 'S', 'R'};
inline constexpr std::uint8_t kTensorVersion = 1;
inline constexpr std::size_t kMaxTensorRank = 4;

inline std::size_t dtype_size(DType d) { return d == DType::kF32 ? 4 : 1; }

class TensorFile {
 public:
  TensorFile() = default;

  static TensorFile f32(std::vector<std::size_t> shape,
                        std::vector<float> data) {
    TensorFile t;
    t.shape_ = std::move(shape);
    t.data_ = std::move(data);
    t.check();
    return t;
  }

  static TensorFile u8(std::vector<std::size_t> shape,
                       std::vector<std::uint8_t> data) {
    TensorFile t;
    t.shape_ = std::move(shape);
    t.data_ = std::move(data);
    t.check();
    return t;
  }

  DType dtype() const {
    return std::holds_alternative<std::vector<float>>(data_) ? DType::kF32
                                                             : DType::kU8;
  }
  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }

  std::size_t size() const {
    return std::accumulate(shape_.begin(), shape_.end(), std::size_t{1},
                           std::multiplies<>());
  }

  std::span<const float> as_f32() const {
    if (dtype() != DType::kF32) throw DataError("tensor dtype is u8, expected f32");
    return std::get<std::vector<float>>(data_);
  }
  std::span<const std::uint8_t> as_u8() const {
    if (dtype() != DType::kU8) throw DataError("tensor dtype is f32, expected u8");
    return std::get<std::vector<std::uint8_t>>(data_);
  }

  // Bitwise equality: dtype, shape and payload bytes (NaN payloads included).
  friend bool operator==(const TensorFile& a, const TensorFile& b) {
    if (a.shape_ != b.shape_ || a.dtype() != b.dtype()) return false;
    if (a.dtype() == DType::kU8) return a.as_u8().size() == b.as_u8().size() &&
        std::equal(a.as_u8().begin(), a.as_u8().end(), b.as_u8().begin());
    const auto x = a.as_f32();
    const auto y = b.as_f32();
    return x.size() == y.size() &&
           (x.empty() || std::memcmp(x.data(), y.data(), x.size() * 4) == 0);
  }

 private:
  void check() const {
    if (shape_.empty() || shape_.size() > kMaxTensorRank) {
      throw PreconditionError("tensor rank must be in [1, 4], got " +
                              std::to_string(shape_.size()));
    }
    for (std::size_t d : shape_) {
      if (d == 0) throw PreconditionError("tensor dimensions must be >= 1");
      if (d > std::numeric_limits<std::uint32_t>::max()) {
        throw PreconditionError("tensor dimension " + std::to_string(d) +
                                " overflows u32");
      }
    }
    const std::size_t n = std::visit([](const auto& v) { return v.size(); }, data_);
    if (n != size()) {
      throw PreconditionError("tensor data has " + std::to_string(n) +
                              " scalars but shape implies " +
                              std::to_string(size()));
    }
  }

  std::vector<std::size_t> shape_;
  std::variant<std::vector<float>, std::vector<std::uint8_t>> data_;
};

namespace detail {

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) |
         (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

inline std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file_bytes(const std::string& path,
                             std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open " + path + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed for " + path);
}

}  // namespace detail

inline std::vector<std::uint8_t> encode_tensor(const TensorFile& t) {
  std::vector<std::uint8_t> out;
  out.reserve(7 + 4 * t.rank() + t.size() * dtype_size(t.dtype()));
  out.insert(out.end(), kTensorMagic.begin(), kTensorMagic.end());
  out.push_back(kTensorVersion);
  out.push_back(static_cast<std::uint8_t>(t.dtype()));
  out.push_back(static_cast<std::uint8_t>(t.rank()));
  for (std::size_t d : t.shape()) detail::put_u32(out, static_cast<std::uint32_t>(d));
  if (t.dtype() == DType::kU8) {
    const auto v = t.as_u8();
    out.insert(out.end(), v.begin(), v.end());
  } else {
    for (float f : t.as_f32()) detail::put_u32(out, std::bit_cast<std::uint32_t>(f));
  }
  return out;
}

inline TensorFile decode_tensor(std::span<const std::uint8_t> bytes,
                                const std::string& origin = "<buffer>") {
  if (bytes.size() < 7) {
    throw DataError(origin + ": truncated header (" + std::to_string(bytes.size()) +
                    " bytes)");
  }
  if (!std::equal(kTensorMagic.begin(), kTensorMagic.end(), bytes.begin())) {
    throw DataError(origin + ": bad magic, not a TNSR file");
  }
  if (bytes[4] != kTensorVersion) {
    throw DataError(origin + ": unknown TNSR version " + std::to_string(bytes[4]));
  }
  const std::uint8_t dtype_byte = bytes[5];
  if (dtype_byte != 1 && dtype_byte != 2) {
    throw DataError(origin + ": unknown dtype " + std::to_string(dtype_byte));
  }
  const auto dtype = static_cast<DType>(dtype_byte);
  const std::size_t ndim = bytes[6];
  if (ndim == 0 || ndim > kMaxTensorRank) {
    throw DataError(origin + ": invalid rank " + std::to_string(ndim));
  }
  const std::size_t header = 7 + 4 * ndim;
  if (bytes.size() < header) throw DataError(origin + ": truncated shape header");
  std::vector<std::size_t> shape(ndim);
  std::size_t count = 1;
  for (std::size_t i = 0; i < ndim; ++i) {
    shape[i] = detail::get_u32(bytes.data() + 7 + 4 * i);
    if (shape[i] == 0) throw DataError(origin + ": zero-sized dimension");
    count *= shape[i];
  }
  const std::size_t expected = count * dtype_size(dtype);
  const std::size_t actual = bytes.size() - header;
  if (actual < expected) {
    throw DataError(origin + ": truncated payload, expected " + std::to_string(expected) +
                    " bytes, got " + std::to_string(actual));
  }
  if (actual > expected) {
    throw DataError(origin + ": " + std::to_string(actual - expected) +
                    " trailing bytes after payload of " + std::to_string(expected));
  }
  const std::uint8_t* payload = bytes.data() + header;
  if (dtype == DType::kU8) {
    return TensorFile::u8(std::move(shape), {payload, payload + count});
  }
  std::vector<float> data(count);
  for (std::size_t i = 0; i < count; ++i) {
    data[i] = std::bit_cast<float>(detail::get_u32(payload + 4 * i));
  }
  return TensorFile::f32(std::move(shape), std::move(data));
}

inline void write_tensor(const TensorFile& t, const std::string& path) {
  detail::write_file_bytes(path, encode_tensor(t));
}

inline TensorFile read_tensor(const std::string& path) {
  return decode_tensor(detail::read_file_bytes(path), path);
}

// ---------------------------------------------------------------------------
// Labels

enum class Label : std::uint8_t { kReal, kSd21, kSdxl, kSd3, kDalle, kMidjourney };

inline constexpr std::array<std::string_view, 6> kLabelNames = {
    "real", "sd21", "sdxl", "sd3", "dalle", "midjourney"};

inline std::string_view label_name(Label l) {
  return kLabelNames[static_cast<std::size_t>(l)];
}

inline bool parse_label(std::string_view s, Label& out) {
  for (std::size_t i = 0; i < kLabelNames.size(); ++i) {
    if (kLabelNames[i] == s) {
      out = static_cast<Label>(i);
      return true;
    }
  }
  return false;
}

enum class Task : std::uint8_t { kA, kB };

// Task A: real = 0, fake = 1. Task B: the six labels in vocabulary order.
class LabelSpace {
 public:
  explicit constexpr LabelSpace(Task task) : task_(task) {}

  constexpr Task task() const { return task_; }
  constexpr int num_classes() const { return task_ == Task::kA ? 2 : 6; }

  constexpr int class_id(Label l) const {
    const int raw = static_cast<int>(l);
    return task_ == Task::kA ? (raw == 0 ? 0 : 1) : raw;
  }

  std::string class_name(int id) const {
    if (id < 0 || id >= num_classes()) {
      throw PreconditionError("class id " + std::to_string(id) + " out of range");
    }
    if (task_ == Task::kA) return id == 0 ? "real" : "fake";
    return std::string(kLabelNames[static_cast<std::size_t>(id)]);
  }

  std::string_view task_name() const { return task_ == Task::kA ? "a" : "b"; }

  friend constexpr bool operator==(LabelSpace, LabelSpace) = default;

 private:
  Task task_;
};

inline LabelSpace parse_task(std::string_view s) {
  if (s == "a" || s == "A") return LabelSpace(Task::kA);
  if (s == "b" || s == "B") return LabelSpace(Task::kB);
  throw PreconditionError("task must be 'a' or 'b', got '" + std::string(s) + "'");
}

// ---------------------------------------------------------------------------
// Manifests

enum class Split : std::uint8_t { kTrain, kVal, kTest };

struct ManifestRecord {
  std::string path;
  Label label = Label::kReal;
  Split split = Split::kTrain;
};

struct DatasetManifest {
  std::vector<ManifestRecord> records;

  std::size_t size() const { return records.size(); }
};

inline DatasetManifest parse_manifest(std::istream& in,
                                      const std::string& origin = "<manifest>") {
  DatasetManifest m;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = origin + ":" + std::to_string(line_no) + ": ";
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError(where + "malformed JSON (" + e.what() + ")");
    }
    if (!j.is_object()) throw DataError(where + "record is not a JSON object");
    ManifestRecord r;
    for (const char* key : {"path", "label", "split"}) {
      if (!j.contains(key) || !j[key].is_string()) {
        throw DataError(where + "missing string field '" + key + "'");
      }
    }
    r.path = j["path"].get<std::string>();
    const auto label = j["label"].get<std::string>();
    if (!parse_label(label, r.label)) throw DataError(where + "unknown label '" + label + "'");
    const auto split = j["split"].get<std::string>();
    if (split == "train") {
      r.split = Split::kTrain;
    } else if (split == "val") {
      r.split = Split::kVal;
    } else if (split == "test") {
      r.split = Split::kTest;
    } else {
      throw DataError(where + "unknown split '" + split + "'");
    }
    if (!seen.insert(r.path).second) throw DataError(where + "duplicate path '" + r.path + "'");
    m.records.push_back(std::move(r));
  }
  return m;
}

inline DatasetManifest read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest " + path);
  return parse_manifest(in, path);
}

inline std::vector<int> encode_labels(const DatasetManifest& m, LabelSpace ls) {
  std::vector<int> ids;
  ids.reserve(m.size());
  for (const auto& r : m.records) ids.push_back(ls.class_id(r.label));
  return ids;
}

inline std::vector<int> class_histogram(std::span<const int> ids, int num_classes) {
  std::vector<int> h(static_cast<std::size_t>(num_classes), 0);
  for (int id : ids) {
    if (id < 0 || id >= num_classes) {
      throw DataError("class id " + std::to_string(id) + " out of range");
    }
    ++h[static_cast<std::size_t>(id)];
  }
  return h;
}

// Class ids as a TNSR u8 vector (predictions and label files).
inline TensorFile labels_to_tensor(std::span<const int> ids) {
  std::vector<std::uint8_t> v(ids.begin(), ids.end());
  return TensorFile::u8({ids.size()}, std::move(v));
}

inline std::vector<int> tensor_to_labels(const TensorFile& t) {
  if (t.rank() != 1) throw DataError("label tensor must be rank 1");
  if (t.dtype() == DType::kU8) {
    const auto v = t.as_u8();
    return {v.begin(), v.end()};
  }
  std::vector<int> ids;
  for (float f : t.as_f32()) {
    if (f != static_cast<float>(static_cast<int>(f)) || f < 0) {
      throw DataError("f32 label tensor holds a non-integer value");
    }
    ids.push_back(static_cast<int>(f));
  }
  return ids;
}

// Splits a rank-2 f32 tensor [n, d] into row views.
inline std::vector<std::vector<float>> tensor_rows(const TensorFile& t) {
  if (t.rank() != 2) throw DataError("expected a rank-2 tensor [n, d]");
  const auto data = t.as_f32();
  const std::size_t n = t.dim(0), d = t.dim(1);
  std::vector<std::vector<float>> rows(n);
  for (std::size_t i = 0; i < n; ++i) {
    rows[i].assign(data.begin() + static_cast<std::ptrdiff_t>(i * d),
                   data.begin() + static_cast<std::ptrdiff_t>((i + 1) * d));
  }
  return rows;
}

inline TensorFile rows_to_tensor(const std::vector<std::vector<float>>& rows) {
  if (rows.empty()) throw PreconditionError("cannot store an empty row set");
  const std::size_t d = rows.front().size();
  std::vector<float> flat;
  flat.reserve(rows.size() * d);
  for (const auto& r : rows) {
    if (r.size() != d) throw PreconditionError("ragged rows");
    flat.insert(flat.end(), r.begin(), r.end());
  }
  return TensorFile::f32({rows.size(), d}, std::move(flat));
}

}  // namespace imgprov
