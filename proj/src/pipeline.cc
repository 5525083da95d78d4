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

#include "stitchseg/pipeline.h"

#include <chrono>
#include <string>

#include "stitchseg/errors.h"
#include "stitchseg/stitcher.h"

namespace stitchseg {
namespace {

class StageClock {
 public:
  explicit StageClock(std::vector<StageTiming>& out)
      : out_(out), start_(std::chrono::steady_clock::now()) {}

  void Mark(const std::string& stage) {
    const auto now = std::chrono::steady_clock::now();
    out_.push_back(
        {stage, std::chrono::duration<double, std::milli>(now - start_).count()});
    start_ = now;
  }

 private:
  std::vector<StageTiming>& out_;
  std::chrono::steady_clock::time_point start_;
};

Matrix RunAttention(const QKVGlobal& qkv, const StitchAttentionConfig& config,
                    AttentionStats* stats) {
  const double tau = ResolveTau(config, qkv.q.cols);
  return config.streaming ? StreamingAttention(qkv, tau, config.block, stats)
                          : GlobalAttention(qkv, tau, stats);
}

TokenMaskSet TokenMasksFor(const PipelineInputs& inputs) {
  if (inputs.masks.masks.empty()) {
    return TokenMaskSet{inputs.GlobalHp(), inputs.GlobalWp(), {}};
  }
  return ToTokenMasks(inputs.masks, inputs.patch);
}

QKVGlobal CropQKV(const CropInput& crop, const ProjectionSet& proj,
                  QkvSource source) {
  if (source == QkvSource::kFiles) {
    if (!crop.q || !crop.k || !crop.v) {
      throw ValidationError("per-crop Q/K/V requested but not provided");
    }
    return QKVGlobal{crop.q->ToMatrix(), crop.k->ToMatrix(), crop.v->ToMatrix()};
  }
  const Matrix x = crop.features.ToMatrix();
  return QKVGlobal{Project(x, proj.wq, proj.bq), Project(x, proj.wk, proj.bk),
                   Project(x, proj.wv, proj.bv)};
}

// Shared tail: token logits -> pixel logits -> labels -> mask vote.
void FinishFromLogits(const PipelineInputs& inputs,
                      const PipelineConfig& config, PipelineResult& result,
                      StageClock& clock) {
  const LogitMap pixel =
      UpsampleBilinear(result.token_logits, inputs.image_h, inputs.image_w);
  clock.Mark("upsample");
  result.raw = PredictArgmax(pixel);
  clock.Mark("argmax");
  if (config.postprocess) {
    MaskVoteResult vote = MaskVotePostprocess(result.raw, inputs.masks);
    if (vote.skipped_empty_masks > 0) {
      result.warnings.push_back(std::to_string(vote.skipped_empty_masks) +
                                " empty masks skipped in post-processing");
    }
    result.final = std::move(vote.labels);
  } else {
    result.final = result.raw;
  }
  clock.Mark("postprocess");
}

}  // namespace

void PipelineInputs::Validate() const {
  if (patch == 0) throw ValidationError("patch must be >= 1");
  if (image_h == 0 || image_w == 0 || image_h % patch != 0 ||
      image_w % patch != 0) {
    throw ValidationError("image size must be a positive multiple of patch");
  }
  if (crops.empty()) throw ValidationError("no crops");
  projection.Validate();
  for (const CropInput& c : crops) {
    if (c.features.hp != c.value.hp || c.features.wp != c.value.wp) {
      throw ValidationError("crop feature and value grids differ in size");
    }
  }
  if (!masks.masks.empty() && (masks.h != image_h || masks.w != image_w)) {
    throw ValidationError("mask size does not match the image");
  }
  masks.Validate();
}

PipelineInputs InputsFromBundle(const Bundle& bundle) {
  const BundleManifest& m = bundle.manifest;
  PipelineInputs in;
  in.image_h = m.image_h;
  in.image_w = m.image_w;
  in.patch = m.patch;
  for (const BundleCrop& c : bundle.crops) {
    in.crops.push_back(CropInput{{c.offset.y / m.patch, c.offset.x / m.patch},
                                 c.affinity_src,
                                 c.value,
                                 c.q,
                                 c.k,
                                 c.v});
  }
  in.projection = bundle.projection;
  in.text_projection = bundle.text_projection;
  in.bank = BuildBank(m.class_names, bundle.per_class_prompts);
  in.masks = bundle.masks;
  return in;
}

PipelineResult RunStitchPipeline(const PipelineInputs& inputs,
                                 const PipelineConfig& config) {
  inputs.Validate();
  PipelineResult result;
  StageClock clock(result.timings);
  const std::size_t hp = inputs.GlobalHp(), wp = inputs.GlobalWp();
  result.crop_count = inputs.crops.size();
  result.token_count = hp * wp;

  QKVGlobal qkv;
  if (config.qkv_source == QkvSource::kProject) {
    std::vector<PlacedGrid> feats;
    for (const CropInput& c : inputs.crops) feats.push_back({c.offset, c.features});
    qkv = StitchQKV(feats, inputs.projection, hp, wp);
  } else {
    std::vector<PlacedGrid> q, k, v;
    for (const CropInput& c : inputs.crops) {
      if (!c.q || !c.k || !c.v) {
        throw ValidationError("per-crop Q/K/V requested but not provided");
      }
      q.push_back({c.offset, *c.q});
      k.push_back({c.offset, *c.k});
      v.push_back({c.offset, *c.v});
    }
    qkv = StitchProjectedQKV(q, k, v, hp, wp);
  }
  clock.Mark("stitch_qkv");

  result.attended = RunAttention(qkv, config.attention, &result.attention_stats);
  clock.Mark("stitch_attention");

  const AffinityMap affinity = ComputeAffinity(result.attended);
  if (affinity.zero_rows > 0) {
    result.warnings.push_back(std::to_string(affinity.zero_rows) +
                              " zero-norm rows in the affinity features");
  }
  const BiasMask bias = SegmentBias(TokenMasksFor(inputs), hp * wp);
  if (bias.unassigned_tokens > 0) {
    result.warnings.push_back(std::to_string(bias.unassigned_tokens) +
                              " tokens in no segment attend only to themselves");
  }
  std::vector<PlacedGrid> values;
  for (const CropInput& c : inputs.crops) values.push_back({c.offset, c.value});
  const Matrix stitched_values = StitchGrids(values, hp, wp).grid.ToMatrix();
  result.features = AffinityAttention(affinity, bias, stitched_values,
                                      config.attention.lambda);
  clock.Mark("affinity_attention");

  const Matrix* proj_out =
      inputs.text_projection ? &*inputs.text_projection : nullptr;
  TokenLogits logits =
      ComputeLogits(result.features, proj_out, inputs.bank, hp, wp);
  if (logits.zero_rows > 0) {
    result.warnings.push_back(std::to_string(logits.zero_rows) +
                              " tokens with zero projected features");
  }
  result.token_logits = std::move(logits.logits);
  clock.Mark("logits");

  FinishFromLogits(inputs, config, result, clock);
  return result;
}

PipelineResult RunBaselinePipeline(const PipelineInputs& inputs,
                                   const PipelineConfig& config,
                                   const CropBlockHook& hook) {
  inputs.Validate();
  PipelineResult result;
  StageClock clock(result.timings);
  const std::size_t hp = inputs.GlobalHp(), wp = inputs.GlobalWp();
  result.crop_count = inputs.crops.size();
  result.token_count = hp * wp;
  const TokenMaskSet global_masks = TokenMasksFor(inputs);
  const Matrix* proj_out =
      inputs.text_projection ? &*inputs.text_projection : nullptr;

  std::vector<PlacedGrid> attended, features, logits;
  for (std::size_t i = 0; i < inputs.crops.size(); ++i) {
    const CropInput& crop = inputs.crops[i];
    const std::size_t chp = crop.features.hp, cwp = crop.features.wp;
    const QKVGlobal qkv = CropQKV(crop, inputs.projection, config.qkv_source);
    AttentionStats stats;
    Matrix out = RunAttention(qkv, config.attention, &stats);
    result.attention_stats.score_buffer_bytes =
        std::max(result.attention_stats.score_buffer_bytes,
                 stats.score_buffer_bytes);
    if (hook) hook(i, crop, out);

    const AffinityMap affinity = ComputeAffinity(out);
    const BiasMask bias = SegmentBias(
        SliceTokenMasks(global_masks, crop.offset, chp, cwp), chp * cwp);
    const Matrix feats = AffinityAttention(affinity, bias, crop.value.ToMatrix(),
                                           config.attention.lambda);
    TokenLogits crop_logits = ComputeLogits(feats, proj_out, inputs.bank, chp, cwp);

    attended.push_back({crop.offset, TokenGrid::FromMatrix(out, chp, cwp)});
    features.push_back({crop.offset, TokenGrid::FromMatrix(feats, chp, cwp)});
    logits.push_back({crop.offset, crop_logits.logits.ToTokenGrid()});
  }
  clock.Mark("crop_blocks");

  result.attended = StitchGrids(attended, hp, wp).grid.ToMatrix();
  result.features = StitchGrids(features, hp, wp).grid.ToMatrix();
  const GlobalGrid stitched = StitchLogits(logits, hp, wp);
  for (std::uint32_t c : stitched.coverage) {
    if (c == 0) throw ValidationError("crops do not cover the image");
  }
  result.token_logits = LogitMap::FromTokenGrid(stitched.grid);
  clock.Mark("stitch_logits");

  FinishFromLogits(inputs, config, result, clock);
  return result;
}

}  // namespace stitchseg
