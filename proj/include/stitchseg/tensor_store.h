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

#ifndef STITCHSEG_TENSOR_STORE_H_
#define STITCHSEG_TENSOR_STORE_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace stitchseg {

enum class DType : std::uint8_t { kF32 = 0, kU8 = 1, kI32 = 2 };

std::size_t DTypeSize(DType dtype);

// A dense row-major tensor with a little-endian byte payload. This is the
// in-memory form of one ".stsr" file.
//
// On-disk layout:
//   bytes 0..3   magic "STSR"
//   bytes 4..5   version (u16 LE, always 1)
//   byte  6      dtype
//   byte  7      ndim (1..4)
//   ndim * u64   dims (LE)
//   payload      product(dims) * DTypeSize(dtype) bytes
struct Tensor {
  DType dtype = DType::kF32;
  std::vector<std::uint64_t> dims;
  std::vector<std::uint8_t> payload;

  std::uint64_t NumElements() const;

  static Tensor FromF32(std::vector<std::uint64_t> dims,
                        std::span<const float> values);
  static Tensor FromU8(std::vector<std::uint64_t> dims,
                       std::span<const std::uint8_t> values);
  static Tensor FromI32(std::vector<std::uint64_t> dims,
                        std::span<const std::int32_t> values);

  // Decode the payload. Throws ValidationError on dtype mismatch.
  std::vector<float> ToF32() const;
  std::vector<std::uint8_t> ToU8() const;
  std::vector<std::int32_t> ToI32() const;

  friend bool operator==(const Tensor&, const Tensor&) = default;
};

inline constexpr std::uint16_t kTensorVersion = 1;
inline constexpr std::size_t kTensorFixedHeaderBytes = 8;

// Throws ValidationError if the dims/payload invariants do not hold.
void ValidateTensor(const Tensor& t);

std::vector<std::uint8_t> EncodeTensor(const Tensor& t);
Tensor DecodeTensor(std::span<const std::uint8_t> bytes);

void WriteTensor(const Tensor& t, const std::filesystem::path& path);
Tensor ReadTensor(const std::filesystem::path& path);

}  // namespace stitchseg

#endif  // STITCHSEG_TENSOR_STORE_H_
