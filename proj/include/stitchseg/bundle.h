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

#ifndef STITCHSEG_BUNDLE_H_
#define STITCHSEG_BUNDLE_H_

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "stitchseg/attention.h"
#include "stitchseg/seg_head.h"
#include "stitchseg/segments.h"
#include "stitchseg/tensor_store.h"
#include "stitchseg/token_grid.h"
#include "stitchseg/window_planner.h"

namespace stitchseg {

// File names of one crop's tensors, relative to the bundle directory.
struct CropFiles {
  std::string q, k, v, value, affinity_src;
};

struct CropEntry {
  PixelOffset offset;
  CropFiles files;
};

// Parsed manifest.json. Keys:
//   image_h, image_w, patch, window, stride, d, class_names[],
//   crops[] {y, x, files {q, k, v, value, affinity_src}},
//   projection_file, text {per_class[], projection (optional)},
//   masks_file, gt_file (optional)
struct BundleManifest {
  std::size_t image_h = 0;
  std::size_t image_w = 0;
  std::size_t patch = 0;
  std::size_t window = 0;
  std::size_t stride = 0;
  std::size_t d = 0;
  std::vector<std::string> class_names;
  std::vector<CropEntry> crops;
  std::string projection_file;
  std::vector<std::string> text_per_class;
  std::optional<std::string> text_projection;
  std::string masks_file;
  std::optional<std::string> gt_file;

  std::size_t CropTokens() const { return window / patch; }

  nlohmann::json ToJson() const;
  static BundleManifest FromJson(const nlohmann::json& j);
  // Checks the scalar invariants (alignment, class names). Throws
  // ValidationError naming the offending field.
  void Validate() const;
};

struct BundleCrop {
  PixelOffset offset;
  // (window/patch) x (window/patch) grids.
  TokenGrid q, k, v;
  TokenGrid value;
  TokenGrid affinity_src;
};

struct Bundle {
  std::filesystem::path dir;
  BundleManifest manifest;
  std::vector<BundleCrop> crops;
  ProjectionSet projection;
  std::optional<Matrix> text_projection;
  // One P x d_text matrix of per-prompt embeddings per class.
  std::vector<Matrix> per_class_prompts;
  SegmentBank masks;
  std::optional<LabelMap> gt;

  std::size_t GlobalHp() const { return manifest.image_h / manifest.patch; }
  std::size_t GlobalWp() const { return manifest.image_w / manifest.patch; }
};

// Projection tensor layout: f32 [3, d_in + 1, d]; slices are Q, K, V and the
// last row of each slice is the bias.
Tensor ProjectionToTensor(const ProjectionSet& proj);
ProjectionSet ProjectionFromTensor(const Tensor& t);

Tensor GridToTensor(const TokenGrid& grid);
TokenGrid GridFromTensor(const Tensor& t);
Tensor MatrixToTensor(const Matrix& m);
Matrix MatrixFromTensor(const Tensor& t);

// Loads and validates every manifest invariant and every referenced tensor.
// Throws ValidationError naming the offending field or file.
Bundle LoadBundle(const std::filesystem::path& dir);

// Writes the manifest and all tensors named in it. Creates `dir`.
void WriteBundle(const Bundle& bundle, const std::filesystem::path& dir);

}  // namespace stitchseg

#endif  // STITCHSEG_BUNDLE_H_
