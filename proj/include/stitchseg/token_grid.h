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

#ifndef STITCHSEG_TOKEN_GRID_H_
#define STITCHSEG_TOKEN_GRID_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace stitchseg {

// Row-major dense f32 matrix. Token matrices are N x d with one row per token.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<float> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, float fill = 0.0f)
      : rows(r), cols(c), data(r * c, fill) {}
  Matrix(std::size_t r, std::size_t c, std::vector<float> values);

  float& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  float operator()(std::size_t r, std::size_t c) const {
    return data[r * cols + c];
  }
  std::span<float> Row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const float> Row(std::size_t r) const {
    return {data.data() + r * cols, cols};
  }

  friend bool operator==(const Matrix&, const Matrix&) = default;
};

// Token offset of a crop inside the global token grid.
struct TokenOffset {
  std::size_t row = 0;
  std::size_t col = 0;
  friend bool operator==(const TokenOffset&, const TokenOffset&) = default;
};

// hp x wp x d feature field over patch tokens, stored (row, col, channel).
struct TokenGrid {
  std::size_t hp = 0;
  std::size_t wp = 0;
  std::size_t d = 0;
  std::vector<float> data;

  TokenGrid() = default;
  TokenGrid(std::size_t h, std::size_t w, std::size_t channels,
            float fill = 0.0f)
      : hp(h), wp(w), d(channels), data(h * w * channels, fill) {}

  std::size_t NumTokens() const { return hp * wp; }
  float& at(std::size_t r, std::size_t c, std::size_t ch) {
    return data[(r * wp + c) * d + ch];
  }
  float at(std::size_t r, std::size_t c, std::size_t ch) const {
    return data[(r * wp + c) * d + ch];
  }
  std::span<const float> Token(std::size_t r, std::size_t c) const {
    return {data.data() + (r * wp + c) * d, d};
  }

  // Flattened row-major view as an (hp*wp) x d token matrix.
  Matrix ToMatrix() const { return Matrix(hp * wp, d, data); }
  static TokenGrid FromMatrix(const Matrix& m, std::size_t hp, std::size_t wp);

  // Throws ValidationError on a size mismatch or NumericalError on non-finite
  // entries.
  void Validate() const;

  friend bool operator==(const TokenGrid&, const TokenGrid&) = default;
};

struct PlacedGrid {
  TokenOffset offset;
  TokenGrid grid;
};

// Stitched grid plus per-token coverage counts.
struct GlobalGrid {
  TokenGrid grid;
  std::vector<std::uint32_t> coverage;
};

}  // namespace stitchseg

#endif  // STITCHSEG_TOKEN_GRID_H_
