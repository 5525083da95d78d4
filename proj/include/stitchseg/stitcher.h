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

#ifndef STITCHSEG_STITCHER_H_
#define STITCHSEG_STITCHER_H_

#include <cstddef>
#include <span>

#include "stitchseg/token_grid.h"

namespace stitchseg {

// Scatter per-crop token grids into a global_hp x global_wp grid. Overlapping
// tokens receive the arithmetic mean of all covering crops; accumulation is
// done in double precision so the result does not depend on crop order.
//
// Throws ValidationError("crop exceeds global grid") or
// ValidationError("channel mismatch").
GlobalGrid StitchGrids(std::span<const PlacedGrid> crops,
                       std::size_t global_hp, std::size_t global_wp);

// Same contract as StitchGrids with d == number of classes.
GlobalGrid StitchLogits(std::span<const PlacedGrid> crop_logits,
                        std::size_t global_hp, std::size_t global_wp);

// Exact sub-grid copy.
TokenGrid CropSlice(const TokenGrid& global, TokenOffset offset,
                    std::size_t hp, std::size_t wp);

}  // namespace stitchseg

#endif  // STITCHSEG_STITCHER_H_
