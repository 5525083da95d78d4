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

#ifndef STITCHSEG_SEGMENTS_H_
#define STITCHSEG_SEGMENTS_H_

#include <cstddef>
#include <cstdint>
#include <vector>

#include "stitchseg/token_grid.h"

namespace stitchseg {

// Class-agnostic binary segment masks at pixel resolution. Masks may overlap.
// Each mask is h*w bytes, row-major, values in {0, 1}.
struct SegmentBank {
  std::size_t h = 0;
  std::size_t w = 0;
  std::vector<std::vector<std::uint8_t>> masks;

  std::size_t NumMasks() const { return masks.size(); }
  // Throws ValidationError on size mismatch or non-binary values.
  void Validate() const;
};

// The same masks at token resolution (hp x wp each).
struct TokenMaskSet {
  std::size_t hp = 0;
  std::size_t wp = 0;
  std::vector<std::vector<std::uint8_t>> masks;
};

// A token belongs to a mask when at least half of its patch pixels do.
TokenMaskSet ToTokenMasks(const SegmentBank& bank, std::size_t patch);

TokenMaskSet SliceTokenMasks(const TokenMaskSet& masks, TokenOffset offset,
                             std::size_t hp, std::size_t wp);

}  // namespace stitchseg

#endif  // STITCHSEG_SEGMENTS_H_
