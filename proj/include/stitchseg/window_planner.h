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

#ifndef STITCHSEG_WINDOW_PLANNER_H_
#define STITCHSEG_WINDOW_PLANNER_H_

#include <cstddef>
#include <utility>
#include <vector>

namespace stitchseg {

struct PixelOffset {
  std::size_t y = 0;
  std::size_t x = 0;
  friend auto operator<=>(const PixelOffset&, const PixelOffset&) = default;
};

// Sliding-window crop geometry. Offsets are row-major (y outer, x inner).
struct CropPlan {
  std::size_t image_h = 0;
  std::size_t image_w = 0;
  std::size_t window = 0;
  std::size_t stride = 0;
  std::vector<PixelOffset> offsets;

  std::size_t NumCrops() const { return offsets.size(); }
  friend bool operator==(const CropPlan&, const CropPlan&) = default;
};

// Axis positions 0, stride, 2*stride, ... with the last position clamped to
// extent - window so the final window touches the image edge.
std::vector<std::size_t> AxisPositions(std::size_t extent, std::size_t window,
                                       std::size_t stride);

// Throws ValidationError("window exceeds image") if the window does not fit,
// or if stride or window is zero.
CropPlan PlanWindows(std::size_t image_h, std::size_t image_w,
                     std::size_t window, std::size_t stride);

struct ResizeSpec {
  std::size_t shorter_side_target = 448;
  // When set, the longer side is rounded to the nearest multiple of `patch`.
  bool round_to_patch = true;
  std::size_t patch = 16;
  // 0 disables the shorter_side_target >= window check.
  std::size_t window = 0;
};

// Returns (height, width) with the shorter side scaled to the target.
std::pair<std::size_t, std::size_t> ResizeDims(std::size_t orig_h,
                                               std::size_t orig_w,
                                               const ResizeSpec& spec);

}  // namespace stitchseg

#endif  // STITCHSEG_WINDOW_PLANNER_H_
