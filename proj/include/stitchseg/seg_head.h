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

#ifndef STITCHSEG_SEG_HEAD_H_
#define STITCHSEG_SEG_HEAD_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "stitchseg/segments.h"
#include "stitchseg/text_bank.h"
#include "stitchseg/token_grid.h"

namespace stitchseg {

inline constexpr std::uint8_t kIgnoreLabel = 255;
inline constexpr std::size_t kMaxClasses = 255;

// Planar class scores, classes x h x w.
struct LogitMap {
  std::size_t classes = 0;
  std::size_t h = 0;
  std::size_t w = 0;
  std::vector<float> data;

  LogitMap() = default;
  LogitMap(std::size_t c, std::size_t height, std::size_t width)
      : classes(c), h(height), w(width), data(c * height * width, 0.0f) {}

  float& at(std::size_t c, std::size_t y, std::size_t x) {
    return data[(c * h + y) * w + x];
  }
  float at(std::size_t c, std::size_t y, std::size_t x) const {
    return data[(c * h + y) * w + x];
  }

  // Channel-last grid (d == classes) <-> planar map.
  static LogitMap FromTokenGrid(const TokenGrid& grid);
  TokenGrid ToTokenGrid() const;
};

struct LabelMap {
  std::size_t h = 0;
  std::size_t w = 0;
  std::vector<std::uint8_t> labels;

  LabelMap() = default;
  LabelMap(std::size_t height, std::size_t width, std::uint8_t fill = 0)
      : h(height), w(width), labels(height * width, fill) {}

  std::uint8_t& at(std::size_t y, std::size_t x) { return labels[y * w + x]; }
  std::uint8_t at(std::size_t y, std::size_t x) const {
    return labels[y * w + x];
  }
  friend bool operator==(const LabelMap&, const LabelMap&) = default;
};

struct TokenLogits {
  LogitMap logits;
  // Tokens whose projected feature had zero norm; their logits are all 0.
  std::size_t zero_rows = 0;
};

// Cosine similarity between projected token features and class embeddings.
// `proj_out` may be null, in which case features are compared directly.
TokenLogits ComputeLogits(const Matrix& feats, const Matrix* proj_out,
                          const ClassEmbeddingBank& bank, std::size_t hp,
                          std::size_t wp);

// Per-class bilinear resize with half-pixel centers (align_corners = false).
LogitMap UpsampleBilinear(const LogitMap& logits, std::size_t h,
                          std::size_t w);

// Per-pixel argmax; ties go to the lowest class index.
LabelMap PredictArgmax(const LogitMap& logits);

struct MaskVoteResult {
  LabelMap labels;
  std::size_t skipped_empty_masks = 0;
};

// For each mask in bank order, every pixel inside it takes the modal raw label
// of the mask. Modes are computed on `raw`, so later masks overwrite earlier
// ones on overlaps without seeing their rewrites. Ties go to the lowest label.
MaskVoteResult MaskVotePostprocess(const LabelMap& raw,
                                   const SegmentBank& masks);

// Binary PGM (P5), one byte per pixel.
void WritePgm(const LabelMap& labels, const std::filesystem::path& path);
LabelMap ReadPgm(const std::filesystem::path& path);

// Sidecar color legend: {"classes": [{"index", "name", "color": [r,g,b]}]}.
void WriteLegend(std::span<const std::string> class_names,
                 const std::filesystem::path& path);
std::vector<std::string> ReadLegend(const std::filesystem::path& path);

}  // namespace stitchseg

#endif  // STITCHSEG_SEG_HEAD_H_
