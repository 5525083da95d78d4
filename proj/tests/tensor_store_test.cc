/* Copyright 2026 The stitchseg Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "stitchseg/tensor_store.h"

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <vector>

#include <gtest/gtest.h>
#include "stitchseg/errors.h"

namespace stitchseg {
namespace {

std::filesystem::path TempPath(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "stitchseg_ts";
  std::filesystem::create_directories(dir);
  return dir / name;
}

void WriteBytes(const std::filesystem::path& p,
                const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(p, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), bytes.size());
}

TEST(TensorStoreTest, GoldenBytesF32) {
  const std::vector<float> values = {1, 2, 3, 4};
  const auto bytes = EncodeTensor(Tensor::FromF32({2, 2}, values));
  const std::vector<std::uint8_t> expected = {
      'S', 'T', 'S', 'R', 0x01, 0x00, 0x00, 0x02,               // header
      0x02, 0, 0, 0, 0, 0, 0, 0, 0x02, 0, 0, 0, 0, 0, 0, 0,     // dims
      0x00, 0x00, 0x80, 0x3F, 0x00, 0x00, 0x00, 0x40,           // 1.0, 2.0
      0x00, 0x00, 0x40, 0x40, 0x00, 0x00, 0x80, 0x40};          // 3.0, 4.0
  EXPECT_EQ(bytes, expected);
  // magic + version + dtype + ndim, then two u64 dims, then four f32.
  EXPECT_EQ(kTensorFixedHeaderBytes, 4u + 2u + 1u + 1u);
  EXPECT_EQ(bytes.size(), kTensorFixedHeaderBytes + 16u + 16u);
}

TEST(TensorStoreTest, U8MaskPayload) {
  const std::vector<std::uint8_t> values = {0, 1, 1};
  const auto bytes = EncodeTensor(Tensor::FromU8({3}, values));
  ASSERT_EQ(bytes.size(), kTensorFixedHeaderBytes + 8u + 3u);
  EXPECT_EQ(bytes[6], 1);
  EXPECT_EQ(bytes[bytes.size() - 3], 0x00);
  EXPECT_EQ(bytes[bytes.size() - 2], 0x01);
  EXPECT_EQ(bytes[bytes.size() - 1], 0x01);
}

TEST(TensorStoreTest, I32LittleEndian) {
  const std::vector<std::int32_t> values = {-2, 0x01020304};
  const auto bytes = EncodeTensor(Tensor::FromI32({2}, values));
  const std::size_t p = kTensorFixedHeaderBytes + 8;
  EXPECT_EQ(bytes[p + 0], 0xFE);
  EXPECT_EQ(bytes[p + 3], 0xFF);
  EXPECT_EQ(bytes[p + 4], 0x04);
  EXPECT_EQ(bytes[p + 7], 0x01);
}

TEST(TensorStoreTest, FileRoundTrip) {
  const std::vector<float> values = {0.5f, -1.25f, 3.0e-7f, 1e30f, 7, 8};
  const Tensor t = Tensor::FromF32({1, 2, 3}, values);
  const auto path = TempPath("rt.stsr");
  WriteTensor(t, path);
  const Tensor back = ReadTensor(path);
  EXPECT_EQ(back, t);
  EXPECT_EQ(back.ToF32(), values);
}

TEST(TensorStoreTest, RoundTripIsBitExactForRandomTensors) {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> ndim(1, 4), extent(1, 5), dtype(0, 2);
  std::uniform_int_distribution<int> byte(0, 255);
  for (int trial = 0; trial < 200; ++trial) {
    Tensor t;
    t.dtype = static_cast<DType>(dtype(rng));
    const int n = ndim(rng);
    for (int i = 0; i < n; ++i) t.dims.push_back(extent(rng));
    t.payload.resize(t.NumElements() * DTypeSize(t.dtype));
    for (auto& b : t.payload) b = static_cast<std::uint8_t>(byte(rng));
    const auto bytes = EncodeTensor(t);
    const Tensor back = DecodeTensor(bytes);
    EXPECT_EQ(back, t);
    EXPECT_EQ(EncodeTensor(back), bytes);
  }
}

TEST(TensorStoreTest, BadMagic) {
  auto bytes = EncodeTensor(Tensor::FromU8({1}, std::vector<std::uint8_t>{1}));
  bytes[0] = 'X';
  bytes[1] = 'X';
  bytes[2] = 'X';
  bytes[3] = 'X';
  const auto path = TempPath("magic.stsr");
  WriteBytes(path, bytes);
  try {
    ReadTensor(path);
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("not a tensor file"),
              std::string::npos);
    EXPECT_NE(std::string(e.what()).find("magic.stsr"), std::string::npos);
  }
}

TEST(TensorStoreTest, UnsupportedVersion) {
  auto bytes = EncodeTensor(Tensor::FromU8({1}, std::vector<std::uint8_t>{1}));
  bytes[4] = 2;
  EXPECT_THROW(
      {
        try {
          DecodeTensor(bytes);
        } catch (const ValidationError& e) {
          EXPECT_STREQ(e.what(), "unsupported version");
          throw;
        }
      },
      ValidationError);
}

TEST(TensorStoreTest, TruncatedPayload) {
  // dims [4] but only 8 payload bytes.
  std::vector<std::uint8_t> bytes = {'S', 'T', 'S', 'R', 1, 0, 0, 1,
                                     4,   0,   0,   0,   0, 0, 0, 0};
  for (int i = 0; i < 8; ++i) bytes.push_back(0);
  EXPECT_THROW(
      {
        try {
          DecodeTensor(bytes);
        } catch (const ValidationError& e) {
          EXPECT_STREQ(e.what(), "truncated payload");
          throw;
        }
      },
      ValidationError);
}

TEST(TensorStoreTest, RejectsInvalidDims) {
  Tensor t;
  t.dims = {};
  EXPECT_THROW(EncodeTensor(t), ValidationError);
  t.dims = {1, 1, 1, 1, 1};
  t.payload.resize(4);
  EXPECT_THROW(EncodeTensor(t), ValidationError);
  t.dims = {0};
  t.payload.clear();
  EXPECT_THROW(EncodeTensor(t), ValidationError);
}

TEST(TensorStoreTest, DTypeMismatchOnDecode) {
  const Tensor t = Tensor::FromU8({2}, std::vector<std::uint8_t>{1, 2});
  EXPECT_THROW(t.ToF32(), ValidationError);
}

TEST(TensorStoreTest, MissingFileNamesPath) {
  try {
    ReadTensor(TempPath("does_not_exist.stsr"));
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("does_not_exist.stsr"),
              std::string::npos);
  }
}

}  // namespace
}  // namespace stitchseg
