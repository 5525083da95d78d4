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

#ifndef STITCHSEG_PIPELINE_H_
#define STITCHSEG_PIPELINE_H_

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "stitchseg/attention.h"
#include "stitchseg/bundle.h"
#include "stitchseg/seg_head.h"
#include "stitchseg/segments.h"
#include "stitchseg/text_bank.h"
#include "stitchseg/token_grid.h"

namespace stitchseg {

// Per-crop inputs at token resolution.
struct CropInput {
  TokenOffset offset;
  // Final-block input features (pre-projection).
  TokenGrid features;
  // Image-text encoder value features.
  TokenGrid value;
  // Optional precomputed projections, used when QkvSource::kFiles.
  std::optional<TokenGrid> q, k, v;
};

struct PipelineInputs {
  std::size_t image_h = 0;
  std::size_t image_w = 0;
  std::size_t patch = 0;
  std::vector<CropInput> crops;
  ProjectionSet projection;
  std::optional<Matrix> text_projection;
  ClassEmbeddingBank bank;
  SegmentBank masks;

  std::size_t GlobalHp() const { return image_h / patch; }
  std::size_t GlobalWp() const { return image_w / patch; }
  void Validate() const;
};

PipelineInputs InputsFromBundle(const Bundle& bundle);

enum class QkvSource {
  // Apply the projection set to the crop features.
  kProject,
  // Use the per-crop Q/K/V tensors shipped with the inputs.
  kFiles,
};

struct PipelineConfig {
  StitchAttentionConfig attention;
  bool postprocess = true;
  QkvSource qkv_source = QkvSource::kProject;
};

struct StageTiming {
  std::string stage;
  double ms = 0.0;
};

struct PipelineResult {
  std::size_t crop_count = 0;
  std::size_t token_count = 0;
  // Final-block attention output at global token resolution (N x d).
  Matrix attended;
  // Affinity-attention output (N x d_value).
  Matrix features;
  LogitMap token_logits;
  LabelMap raw;
  LabelMap final;
  AttentionStats attention_stats;
  std::vector<StageTiming> timings;
  std::vector<std::string> warnings;
};

// Stitch Attention path: global attention over stitched Q/K/V.
PipelineResult RunStitchPipeline(const PipelineInputs& inputs,
                                 const PipelineConfig& config);

// Called with (crop index, crop input, attended crop tokens) after the
// per-crop final block. May modify the attended tokens.
using CropBlockHook =
    std::function<void(std::size_t, const CropInput&, Matrix&)>;

// Per-crop independent baseline: attention, affinity, and logits are computed
// inside each crop, and only the logits are stitched.
PipelineResult RunBaselinePipeline(const PipelineInputs& inputs,
                                   const PipelineConfig& config,
                                   const CropBlockHook& hook = {});

}  // namespace stitchseg

#endif  // STITCHSEG_PIPELINE_H_
