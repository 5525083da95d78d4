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

#include "stitchseg/stitcher.h"

#include <cmath>
#include <string>
#include <vector>

#include "stitchseg/errors.h"

namespace stitchseg {

Matrix::Matrix(std::size_t r, std::size_t c, std::vector<float> values)
    : rows(r), cols(c), data(std::move(values)) {
  if (data.size() != rows * cols) {
    throw ValidationError("matrix data length " + std::to_string(data.size()) +
                          " != " + std::to_string(rows) + "x" +
                          std::to_string(cols));
  }
}

TokenGrid TokenGrid::FromMatrix(const Matrix& m, std::size_t hp,
                                std::size_t wp) {
  if (m.rows != hp * wp) {
    throw ValidationError("matrix has " + std::to_string(m.rows) +
                          " rows, grid needs " + std::to_string(hp * wp));
  }
  TokenGrid g;
  g.hp = hp;
  g.wp = wp;
  g.d = m.cols;
  g.data = m.data;
  return g;
}

void TokenGrid::Validate() const {
  if (data.size() != hp * wp * d) {
    throw ValidationError("token grid data length does not match hp*wp*d");
  }
  for (float v : data) {
    if (!std::isfinite(v)) throw NumericalError("non-finite token value");
  }
}

namespace {

GlobalGrid Stitch(std::span<const PlacedGrid> crops, std::size_t global_hp,
                  std::size_t global_wp) {
  if (crops.empty()) throw ValidationError("no crops to stitch");
  const std::size_t d = crops.front().grid.d;
  std::vector<double> sum(global_hp * global_wp * d, 0.0);
  std::vector<std::uint32_t> count(global_hp * global_wp, 0);

  for (const PlacedGrid& crop : crops) {
    const TokenGrid& g = crop.grid;
    g.Validate();
    if (g.d != d) throw ValidationError("channel mismatch");
    if (crop.offset.row + g.hp > global_hp ||
        crop.offset.col + g.wp > global_wp) {
      throw ValidationError("crop exceeds global grid");
    }
    for (std::size_t r = 0; r < g.hp; ++r) {
      for (std::size_t c = 0; c < g.wp; ++c) {
        const std::size_t t =
            (crop.offset.row + r) * global_wp + (crop.offset.col + c);
        ++count[t];
        const float* src = &g.data[(r * g.wp + c) * d];
        double* dst = &sum[t * d];
        for (std::size_t ch = 0; ch < d; ++ch) dst[ch] += src[ch];
      }
    }
  }

  GlobalGrid out{TokenGrid(global_hp, global_wp, d), std::move(count)};
  for (std::size_t t = 0; t < global_hp * global_wp; ++t) {
    if (out.coverage[t] == 0) continue;
    const double n = out.coverage[t];
    for (std::size_t ch = 0; ch < d; ++ch) {
      out.grid.data[t * d + ch] = static_cast<float>(sum[t * d + ch] / n);
    }
  }
  return out;
}

}  // namespace

GlobalGrid StitchGrids(std::span<const PlacedGrid> crops,
                       std::size_t global_hp, std::size_t global_wp) {
  return Stitch(crops, global_hp, global_wp);
}

GlobalGrid StitchLogits(std::span<const PlacedGrid> crop_logits,
                        std::size_t global_hp, std::size_t global_wp) {
  return Stitch(crop_logits, global_hp, global_wp);
}

TokenGrid CropSlice(const TokenGrid& global, TokenOffset offset,
                    std::size_t hp, std::size_t wp) {
  if (offset.row + hp > global.hp || offset.col + wp > global.wp) {
    throw ValidationError("slice exceeds global grid");
  }
  TokenGrid out(hp, wp, global.d);
  for (std::size_t r = 0; r < hp; ++r) {
    const float* src =
        &global.data[((offset.row + r) * global.wp + offset.col) * global.d];
    std::copy(src, src + wp * global.d, &out.data[r * wp * global.d]);
  }
  return out;
}

}  // namespace stitchseg
