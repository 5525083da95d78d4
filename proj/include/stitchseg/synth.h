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

#ifndef STITCHSEG_SYNTH_H_
#define STITCHSEG_SYNTH_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "stitchseg/bundle.h"
#include "stitchseg/evaluator.h"
#include "stitchseg/pipeline.h"
#include "stitchseg/seg_head.h"
#include "stitchseg/token_grid.h"

namespace stitchseg {

// Counter-based generator: the value depends only on (seed, stream, index),
// so any subset of draws can be reproduced without replaying a sequence.
std::uint64_t HashCounter(std::uint64_t seed, std::uint64_t stream,
                          std::uint64_t index);
double UniformAt(std::uint64_t seed, std::uint64_t stream,
                 std::uint64_t index);
double GaussianAt(std::uint64_t seed, std::uint64_t stream,
                  std::uint64_t index);

struct TokenRect {
  std::size_t row = 0, col = 0, rows = 0, cols = 0;
};

struct SceneParams {
  std::uint64_t seed = 0;
  std::size_t h = 448;
  std::size_t w = 448;
  std::size_t patch = 16;
  std::size_t num_classes = 4;
  std::size_t dim = 32;
  double noise_sigma = 0.0;
  // Number of recursive splits; 0 picks 3..7 from the seed.
  std::size_t splits = 0;
};

struct SyntheticScene {
  SceneParams params;
  // Pixel-resolution labels; region borders fall on patch boundaries.
  LabelMap labels;
  std::vector<TokenRect> regions;
  std::vector<std::uint8_t> region_class;
  // num_classes x dim, unit rows, pairwise cosine <= kMaxPrototypeCosine.
  Matrix prototypes;

  std::size_t Hp() const { return params.h / params.patch; }
  std::size_t Wp() const { return params.w / params.patch; }
  std::uint8_t TokenLabel(std::size_t row, std::size_t col) const;
};

inline constexpr double kMaxPrototypeCosine = 0.9;

// Piecewise-rectangular label field from random recursive splits on the
// patch grid. Throws ValidationError for infeasible parameters.
SyntheticScene GenScene(const SceneParams& params);

// Token feature = prototype[label] + sigma * N(0, 1) keyed on (seed, token).
TokenGrid EncodePatchLocal(const SyntheticScene& scene);
// Encodes only the tokens of one crop; equals slicing the full encoding.
TokenGrid EncodeCrop(const SyntheticScene& scene, TokenOffset offset,
                     std::size_t hp, std::size_t wp);

struct SynthConfig {
  std::size_t window = 336;
  std::size_t stride = 112;
  std::size_t prompts_per_class = 8;
  // Std-dev of the per-prompt perturbation of the text embeddings.
  double prompt_jitter = 0.0;
  // Strength of the per-crop context bias added by the leaky final block.
  double leak_strength = 0.25;
  PipelineConfig pipeline;
};

// Deterministic projection weights, text projection and per-prompt text
// embeddings for a scene.
ProjectionSet SyntheticProjection(const SyntheticScene& scene);
Matrix SyntheticTextProjection(const SyntheticScene& scene);
std::vector<Matrix> SyntheticPromptEmbeddings(const SyntheticScene& scene,
                                              const SynthConfig& config);
std::vector<std::string> SyntheticClassNames(std::size_t num_classes);
// The scene's regions as a perfect segment bank.
SegmentBank RegionMasks(const SyntheticScene& scene);

// Pipeline inputs for the sliding-window plan (window/stride from config).
PipelineInputs WindowInputs(const SyntheticScene& scene,
                            const SynthConfig& config);
// Pipeline inputs with a single crop covering the full image.
PipelineInputs FullImageInputs(const SyntheticScene& scene,
                               const SynthConfig& config);

// Reference path: no windowing, direct global attention.
struct OracleOutput {
  PipelineResult result;
  EvalResult eval;
};
OracleOutput OracleFullPipeline(const SyntheticScene& scene,
                                const SynthConfig& config);

// Final-block hook that adds a per-crop bias (strength times the mean of the
// crop's attended tokens), modeling crop-level context leaking into the
// last-layer features of independently encoded crops.
CropBlockHook LeakyFinalBlock(double strength);

// Complete on-disk bundle for the sliding-window plan, including per-crop
// Q/K/V and the ground truth.
Bundle MakeSynthBundle(const SyntheticScene& scene, const SynthConfig& config);

}  // namespace stitchseg

#endif  // STITCHSEG_SYNTH_H_
