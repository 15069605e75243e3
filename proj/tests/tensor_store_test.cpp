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

#include "imgprov/tensor_store.hpp"

#include <filesystem>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

namespace {

using imgprov::DataError;
using imgprov::DType;
using imgprov::LabelSpace;
using imgprov::Task;
using imgprov::TensorFile;

std::string TempPath(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("imgprov_ts_" + name)).string();
}

TEST(TensorStore, F32VectorIsNineteenBytes) {
  const auto t = TensorFile::f32({2}, {1.0f, 2.0f});
  const auto bytes = imgprov::encode_tensor(t);
  ASSERT_EQ(bytes.size(), 19u);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "TNSR");
  EXPECT_EQ(bytes[4], 1);
  EXPECT_EQ(bytes[5], 1);
  EXPECT_EQ(bytes[6], 1);
  EXPECT_EQ(bytes[7], 2);
  EXPECT_EQ(bytes[8], 0);
  // 1.0f little-endian is 00 00 80 3F.
  EXPECT_EQ(bytes[11], 0x00);
  EXPECT_EQ(bytes[13], 0x80);
  EXPECT_EQ(bytes[14], 0x3F);

  const auto path = TempPath("f32.tnsr");
  imgprov::write_tensor(t, path);
  EXPECT_EQ(std::filesystem::file_size(path), 19u);
  const auto back = imgprov::read_tensor(path);
  EXPECT_EQ(back.shape(), std::vector<std::size_t>{2});
  EXPECT_EQ(back.as_f32()[0], 1.0f);
  EXPECT_EQ(back.as_f32()[1], 2.0f);
}

TEST(TensorStore, U8PayloadOffset) {
  const auto bytes = imgprov::encode_tensor(TensorFile::u8({1, 1, 1}, {255}));
  ASSERT_EQ(bytes.size(), 20u);
  EXPECT_EQ(bytes[5], 2);
  EXPECT_EQ(bytes[6], 3);
  // 7 + 3 * 4 = 19 is where the payload starts for rank 3.
  EXPECT_EQ(bytes[19], 0xFF);
}

TEST(TensorStore, RandomRoundTripIsBitwise) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t rank = 1 + rng() % 4;
    std::vector<std::size_t> shape(rank);
    std::size_t n = 1;
    for (auto& d : shape) {
      d = 1 + rng() % 5;
      n *= d;
    }
    TensorFile t;
    if (rng() % 2) {
      std::vector<float> v(n);
      for (auto& f : v) f = std::bit_cast<float>(static_cast<std::uint32_t>(rng()));
      t = TensorFile::f32(shape, v);
    } else {
      std::vector<std::uint8_t> v(n);
      for (auto& b : v) b = static_cast<std::uint8_t>(rng());
      t = TensorFile::u8(shape, v);
    }
    const auto bytes = imgprov::encode_tensor(t);
    EXPECT_EQ(imgprov::decode_tensor(bytes), t);
    EXPECT_EQ(imgprov::encode_tensor(imgprov::decode_tensor(bytes)), bytes);
  }
}

TEST(TensorStore, RejectsBadMagic) {
  auto bytes = imgprov::encode_tensor(TensorFile::f32({2}, {1.0f, 2.0f}));
  std::fill(bytes.begin(), bytes.begin() + 4, 'X');
  try {
    imgprov::decode_tensor(bytes);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("bad magic"), std::string::npos);
  }
}

TEST(TensorStore, RejectsTruncationNamingExpectedBytes) {
  auto bytes = imgprov::encode_tensor(TensorFile::f32({2}, {1.0f, 2.0f}));
  bytes.pop_back();
  try {
    imgprov::decode_tensor(bytes);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("expected 8"), std::string::npos) << msg;
    EXPECT_NE(msg.find("got 7"), std::string::npos) << msg;
  }
}

TEST(TensorStore, RejectsUnknownDtypeAndVersion) {
  auto bytes = imgprov::encode_tensor(TensorFile::u8({1}, {3}));
  auto bad_dtype = bytes;
  bad_dtype[5] = 9;
  EXPECT_THROW(imgprov::decode_tensor(bad_dtype), DataError);
  auto bad_version = bytes;
  bad_version[4] = 2;
  EXPECT_THROW(imgprov::decode_tensor(bad_version), DataError);
}

TEST(TensorStore, ShapeValidation) {
  EXPECT_THROW(TensorFile::f32({}, {}), imgprov::PreconditionError);
  EXPECT_THROW(TensorFile::f32({0}, {}), imgprov::PreconditionError);
  EXPECT_THROW(TensorFile::f32({2, 2}, {1, 2, 3}), imgprov::PreconditionError);
  EXPECT_THROW(TensorFile::f32({1, 1, 1, 1, 1}, {1}), imgprov::PreconditionError);
}

// Bytes assembled by hand, as an external exporter would write them.
TEST(TensorStore, ReadsExternallyAssembledFile) {
  std::vector<std::uint8_t> bytes = {'T', 'N', 'S', 'R', 1, 1, 2, 3, 0, 0, 0, 1, 0, 0, 0};
  for (float f : {0.5f, -1.0f, 2.0f}) {
    const auto u = std::bit_cast<std::uint32_t>(f);
    for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<std::uint8_t>(u >> (8 * i)));
  }
  const auto t = imgprov::decode_tensor(bytes);
  EXPECT_EQ(t.shape(), (std::vector<std::size_t>{3, 1}));
  const auto rows = imgprov::tensor_rows(t);
  EXPECT_EQ(rows[1][0], -1.0f);
}

TEST(Manifest, ParsesRecord) {
  std::istringstream in(R"({"path":"a.png","label":"real","split":"train"})");
  const auto m = imgprov::parse_manifest(in);
  ASSERT_EQ(m.size(), 1u);
  EXPECT_EQ(imgprov::encode_labels(m, LabelSpace(Task::kB)), std::vector<int>{0});
}

TEST(Manifest, UnknownLabelNamesLine) {
  std::istringstream in(R"({"path":"a.png","label":"sd15","split":"train"})");
  try {
    imgprov::parse_manifest(in, "m.jsonl");
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("m.jsonl:1"), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("sd15"), std::string::npos);
  }
}

TEST(Manifest, MalformedAndDuplicate) {
  std::istringstream bad("{\"path\":\"a.png\",\n");
  EXPECT_THROW(imgprov::parse_manifest(bad), DataError);
  std::istringstream dup(
      "{\"path\":\"a.png\",\"label\":\"real\",\"split\":\"train\"}\n"
      "{\"path\":\"a.png\",\"label\":\"sdxl\",\"split\":\"val\"}\n");
  try {
    imgprov::parse_manifest(dup);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find(":2:"), std::string::npos) << e.what();
  }
}

TEST(Manifest, OnePerLabelHistogram) {
  std::ostringstream text;
  for (auto name : imgprov::kLabelNames) {
    text << R"({"path":")" << name << R"(.png","label":")" << name << R"(","split":"test"})" << "\n";
  }
  std::istringstream in(text.str());
  const auto m = imgprov::parse_manifest(in);
  const auto ids = imgprov::encode_labels(m, LabelSpace(Task::kB));
  EXPECT_EQ(imgprov::class_histogram(ids, 6), std::vector<int>(6, 1));
}

TEST(Labels, TaskEncodings) {
  imgprov::DatasetManifest m;
  m.records = {{"a", imgprov::Label::kReal, imgprov::Split::kTrain},
               {"b", imgprov::Label::kDalle, imgprov::Split::kTrain}};
  EXPECT_EQ(imgprov::encode_labels(m, LabelSpace(Task::kA)), (std::vector<int>{0, 1}));

  m.records = {{"a", imgprov::Label::kReal, imgprov::Split::kTrain},
               {"b", imgprov::Label::kSd21, imgprov::Split::kTrain},
               {"c", imgprov::Label::kMidjourney, imgprov::Split::kTrain}};
  EXPECT_EQ(imgprov::encode_labels(m, LabelSpace(Task::kB)), (std::vector<int>{0, 1, 5}));

  m.records = {{"a", imgprov::Label::kReal, imgprov::Split::kTrain},
               {"b", imgprov::Label::kReal, imgprov::Split::kVal}};
  EXPECT_EQ(imgprov::encode_labels(m, LabelSpace(Task::kA)), (std::vector<int>{0, 0}));
}

TEST(Labels, EveryLabelMapsTotally) {
  for (std::size_t i = 0; i < imgprov::kLabelNames.size(); ++i) {
    const auto l = static_cast<imgprov::Label>(i);
    EXPECT_EQ(LabelSpace(Task::kB).class_id(l), static_cast<int>(i));
    EXPECT_EQ(LabelSpace(Task::kA).class_id(l), i == 0 ? 0 : 1);
  }
}

}  // namespace
