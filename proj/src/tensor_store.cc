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

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "stitchseg/errors.h"

namespace stitchseg {
namespace {

constexpr std::uint8_t kMagic[4] = {0x53, 0x54, 0x53, 0x52};  // "STSR"

static_assert(std::endian::native == std::endian::little ||
                  std::endian::native == std::endian::big,
              "mixed-endian platforms are not supported");

template <typename T>
void AppendLe(std::vector<std::uint8_t>& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<std::uint8_t>(
        (static_cast<std::uint64_t>(value) >> (8 * i)) & 0xff));
  }
}

template <typename T>
T ReadLe(std::span<const std::uint8_t> bytes, std::size_t pos) {
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    v |= static_cast<std::uint64_t>(bytes[pos + i]) << (8 * i);
  }
  return static_cast<T>(v);
}

// Scalars are stored little-endian; 4-byte scalars are swapped on big-endian
// hosts.
template <typename T>
std::vector<std::uint8_t> ScalarsToLe(std::span<const T> values) {
  std::vector<std::uint8_t> out(values.size() * sizeof(T));
  if (!values.empty()) std::memcpy(out.data(), values.data(), out.size());
  if constexpr (std::endian::native == std::endian::big && sizeof(T) > 1) {
    for (std::size_t i = 0; i < out.size(); i += sizeof(T)) {
      std::reverse(out.begin() + i, out.begin() + i + sizeof(T));
    }
  }
  return out;
}

template <typename T>
std::vector<T> LeToScalars(const std::vector<std::uint8_t>& bytes) {
  std::vector<std::uint8_t> copy = bytes;
  if constexpr (std::endian::native == std::endian::big && sizeof(T) > 1) {
    for (std::size_t i = 0; i < copy.size(); i += sizeof(T)) {
      std::reverse(copy.begin() + i, copy.begin() + i + sizeof(T));
    }
  }
  std::vector<T> out(copy.size() / sizeof(T));
  if (!out.empty()) std::memcpy(out.data(), copy.data(), copy.size());
  return out;
}

const char* DTypeName(DType dtype) {
  switch (dtype) {
    case DType::kF32:
      return "f32";
    case DType::kU8:
      return "u8";
    case DType::kI32:
      return "i32";
  }
  return "?";
}

void ExpectDType(const Tensor& t, DType want) {
  if (t.dtype != want) {
    throw ValidationError(std::string("expected dtype ") + DTypeName(want) +
                          ", got " + DTypeName(t.dtype));
  }
}

}  // namespace

std::size_t DTypeSize(DType dtype) {
  switch (dtype) {
    case DType::kF32:
    case DType::kI32:
      return 4;
    case DType::kU8:
      return 1;
  }
  throw ValidationError("unknown dtype");
}

std::uint64_t Tensor::NumElements() const {
  std::uint64_t n = 1;
  for (std::uint64_t d : dims) n *= d;
  return n;
}

Tensor Tensor::FromF32(std::vector<std::uint64_t> dims,
                       std::span<const float> values) {
  Tensor t{DType::kF32, std::move(dims), ScalarsToLe(values)};
  ValidateTensor(t);
  return t;
}

Tensor Tensor::FromU8(std::vector<std::uint64_t> dims,
                      std::span<const std::uint8_t> values) {
  Tensor t{DType::kU8, std::move(dims), {values.begin(), values.end()}};
  ValidateTensor(t);
  return t;
}

Tensor Tensor::FromI32(std::vector<std::uint64_t> dims,
                       std::span<const std::int32_t> values) {
  Tensor t{DType::kI32, std::move(dims), ScalarsToLe(values)};
  ValidateTensor(t);
  return t;
}

std::vector<float> Tensor::ToF32() const {
  ExpectDType(*this, DType::kF32);
  return LeToScalars<float>(payload);
}

std::vector<std::uint8_t> Tensor::ToU8() const {
  ExpectDType(*this, DType::kU8);
  return payload;
}

std::vector<std::int32_t> Tensor::ToI32() const {
  ExpectDType(*this, DType::kI32);
  return LeToScalars<std::int32_t>(payload);
}

void ValidateTensor(const Tensor& t) {
  if (t.dims.empty() || t.dims.size() > 4) {
    throw ValidationError("tensor must have 1 to 4 dims, got " +
                          std::to_string(t.dims.size()));
  }
  for (std::uint64_t d : t.dims) {
    if (d == 0) throw ValidationError("tensor dims must be >= 1");
  }
  if (t.payload.size() != t.NumElements() * DTypeSize(t.dtype)) {
    throw ValidationError("payload length does not match dims");
  }
}

std::vector<std::uint8_t> EncodeTensor(const Tensor& t) {
  ValidateTensor(t);
  std::vector<std::uint8_t> out;
  out.reserve(kTensorFixedHeaderBytes + 8 * t.dims.size() + t.payload.size());
  for (std::uint8_t b : kMagic) out.push_back(b);
  AppendLe<std::uint16_t>(out, kTensorVersion);
  out.push_back(static_cast<std::uint8_t>(t.dtype));
  out.push_back(static_cast<std::uint8_t>(t.dims.size()));
  for (std::uint64_t d : t.dims) AppendLe<std::uint64_t>(out, d);
  out.insert(out.end(), t.payload.begin(), t.payload.end());
  return out;
}

Tensor DecodeTensor(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || !std::equal(std::begin(kMagic), std::end(kMagic),
                                      bytes.begin())) {
    throw ValidationError("not a tensor file");
  }
  if (bytes.size() < kTensorFixedHeaderBytes) {
    throw ValidationError("truncated header");
  }
  if (ReadLe<std::uint16_t>(bytes, 4) != kTensorVersion) {
    throw ValidationError("unsupported version");
  }
  const std::uint8_t dtype_byte = bytes[6];
  if (dtype_byte > static_cast<std::uint8_t>(DType::kI32)) {
    throw ValidationError("unknown dtype " + std::to_string(dtype_byte));
  }
  Tensor t;
  t.dtype = static_cast<DType>(dtype_byte);
  const std::size_t ndim = bytes[7];
  if (ndim < 1 || ndim > 4) {
    throw ValidationError("tensor must have 1 to 4 dims, got " +
                          std::to_string(ndim));
  }
  const std::size_t payload_pos = kTensorFixedHeaderBytes + 8 * ndim;
  if (bytes.size() < payload_pos) throw ValidationError("truncated header");
  for (std::size_t i = 0; i < ndim; ++i) {
    t.dims.push_back(
        ReadLe<std::uint64_t>(bytes, kTensorFixedHeaderBytes + 8 * i));
    if (t.dims.back() == 0) throw ValidationError("tensor dims must be >= 1");
  }
  const std::uint64_t want = t.NumElements() * DTypeSize(t.dtype);
  if (bytes.size() - payload_pos != want) {
    throw ValidationError("truncated payload");
  }
  t.payload.assign(bytes.begin() + payload_pos, bytes.end());
  return t;
}

void WriteTensor(const Tensor& t, const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = EncodeTensor(t);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot open for writing: " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ValidationError("write failed: " + path.string());
}

Tensor ReadTensor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open tensor file: " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  try {
    return DecodeTensor(bytes);
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

}  // namespace stitchseg
