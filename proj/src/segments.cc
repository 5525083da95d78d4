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

#include "stitchseg/segments.h"

#include <string>

#include "stitchseg/errors.h"

namespace stitchseg {

void SegmentBank::Validate() const {
  for (std::size_t i = 0; i < masks.size(); ++i) {
    if (masks[i].size() != h * w) {
      throw ValidationError("mask " + std::to_string(i) +
                            " does not match image size");
    }
    for (std::uint8_t v : masks[i]) {
      if (v > 1) {
        throw ValidationError("mask " + std::to_string(i) + " is not binary");
      }
    }
  }
}

TokenMaskSet ToTokenMasks(const SegmentBank& bank, std::size_t patch) {
  if (patch == 0 || bank.h % patch != 0 || bank.w % patch != 0) {
    throw ValidationError("mask size is not a multiple of the patch size");
  }
  TokenMaskSet out{bank.h / patch, bank.w / patch, {}};
  const std::size_t half = (patch * patch + 1) / 2;
  out.masks.reserve(bank.masks.size());
  for (const auto& mask : bank.masks) {
    if (mask.size() != bank.h * bank.w) {
      throw ValidationError("mask does not match image size");
    }
    std::vector<std::uint8_t> tokens(out.hp * out.wp, 0);
    for (std::size_t tr = 0; tr < out.hp; ++tr) {
      for (std::size_t tc = 0; tc < out.wp; ++tc) {
        std::size_t on = 0;
        for (std::size_t y = tr * patch; y < (tr + 1) * patch; ++y) {
          for (std::size_t x = tc * patch; x < (tc + 1) * patch; ++x) {
            on += mask[y * bank.w + x] != 0;
          }
        }
        tokens[tr * out.wp + tc] = on >= half ? 1 : 0;
      }
    }
    out.masks.push_back(std::move(tokens));
  }
  return out;
}

TokenMaskSet SliceTokenMasks(const TokenMaskSet& masks, TokenOffset offset,
                             std::size_t hp, std::size_t wp) {
  if (offset.row + hp > masks.hp || offset.col + wp > masks.wp) {
    throw ValidationError("mask slice exceeds token grid");
  }
  TokenMaskSet out{hp, wp, {}};
  out.masks.reserve(masks.masks.size());
  for (const auto& mask : masks.masks) {
    std::vector<std::uint8_t> sub(hp * wp);
    for (std::size_t r = 0; r < hp; ++r) {
      for (std::size_t c = 0; c < wp; ++c) {
        sub[r * wp + c] = mask[(offset.row + r) * masks.wp + offset.col + c];
      }
    }
    out.masks.push_back(std::move(sub));
  }
  return out;
}

}  // namespace stitchseg
