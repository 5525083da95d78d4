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

#include "stitchseg/window_planner.h"

#include <algorithm>
#include <cmath>

#include "stitchseg/errors.h"

namespace stitchseg {

std::vector<std::size_t> AxisPositions(std::size_t extent, std::size_t window,
                                       std::size_t stride) {
  if (window == 0 || stride == 0) {
    throw ValidationError("window and stride must be >= 1");
  }
  if (window > extent) throw ValidationError("window exceeds image");
  const std::size_t last = extent - window;
  std::vector<std::size_t> positions;
  for (std::size_t p = 0;; p += stride) {
    if (p >= last) {
      positions.push_back(last);
      break;
    }
    positions.push_back(p);
  }
  return positions;
}

CropPlan PlanWindows(std::size_t image_h, std::size_t image_w,
                     std::size_t window, std::size_t stride) {
  CropPlan plan{image_h, image_w, window, stride, {}};
  const auto ys = AxisPositions(image_h, window, stride);
  const auto xs = AxisPositions(image_w, window, stride);
  plan.offsets.reserve(ys.size() * xs.size());
  for (std::size_t y : ys) {
    for (std::size_t x : xs) plan.offsets.push_back({y, x});
  }
  return plan;
}

std::pair<std::size_t, std::size_t> ResizeDims(std::size_t orig_h,
                                               std::size_t orig_w,
                                               const ResizeSpec& spec) {
  if (orig_h == 0 || orig_w == 0) throw ValidationError("empty image");
  if (spec.window != 0 && spec.shorter_side_target < spec.window) {
    throw ValidationError("shorter_side_target is smaller than the window");
  }
  const bool h_shorter = orig_h <= orig_w;
  const double shorter = static_cast<double>(h_shorter ? orig_h : orig_w);
  const double longer = static_cast<double>(h_shorter ? orig_w : orig_h);
  const double target = static_cast<double>(spec.shorter_side_target);
  const double scaled = longer * target / shorter;

  std::size_t longer_out;
  if (spec.round_to_patch && spec.patch > 0) {
    const double p = static_cast<double>(spec.patch);
    longer_out = static_cast<std::size_t>(std::floor(scaled / p + 0.5)) *
                 spec.patch;
    longer_out = std::max(longer_out, spec.shorter_side_target);
  } else {
    longer_out = static_cast<std::size_t>(std::llround(scaled));
  }
  if (h_shorter) return {spec.shorter_side_target, longer_out};
  return {longer_out, spec.shorter_side_target};
}

}  // namespace stitchseg
