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

#ifndef STITCHSEG_ATTENTION_H_
#define STITCHSEG_ATTENTION_H_

#include <cstddef>
#include <span>
#include <vector>

#include "stitchseg/segments.h"
#include "stitchseg/token_grid.h"

namespace stitchseg {

// Final-block linear projections. Each weight is d_in x d; biases are either
// empty or length d.
struct ProjectionSet {
  Matrix wq, wk, wv;
  std::vector<float> bq, bk, bv;

  std::size_t InputDim() const { return wq.rows; }
  std::size_t OutputDim() const { return wq.cols; }
  void Validate() const;

  static ProjectionSet Identity(std::size_t d);
};

// x * w + bias, row by row. Accumulates in double.
Matrix Project(const Matrix& x, const Matrix& w, std::span<const float> bias);

// Stitched global query/key/value token matrices, N x d each.
struct QKVGlobal {
  Matrix q, k, v;
  void Validate() const;
};

// Projects each crop independently, then stitches Q, K and V separately into
// the global token grid (flattened row-major).
QKVGlobal StitchQKV(std::span<const PlacedGrid> crop_feats,
                    const ProjectionSet& proj, std::size_t global_hp,
                    std::size_t global_wp);

// Stitches already-projected per-crop Q/K/V grids.
QKVGlobal StitchProjectedQKV(std::span<const PlacedGrid> q,
                             std::span<const PlacedGrid> k,
                             std::span<const PlacedGrid> v,
                             std::size_t global_hp, std::size_t global_wp);

struct AttentionStats {
  // Bytes held by the score buffer at its peak.
  std::size_t score_buffer_bytes = 0;
};

// softmax(q k^T / tau) row-wise, materialized as an N x N matrix.
Matrix AttentionWeights(const Matrix& q, const Matrix& k, double tau);

// softmax(QK^T / tau) V with the full N x N score matrix in memory.
// Throws ValidationError for tau <= 0 or shape mismatch, NumericalError for
// non-finite inputs.
Matrix GlobalAttention(const QKVGlobal& qkv, double tau,
                       AttentionStats* stats = nullptr);

// Same result as GlobalAttention computed with an online softmax over
// block x block score tiles. Never holds more than block*block scores.
Matrix StreamingAttention(const QKVGlobal& qkv, double tau, std::size_t block,
                          AttentionStats* stats = nullptr);

// Cosine self-similarity of token features. Zero-norm rows get 1 on the
// diagonal and 0 elsewhere; their count is reported in `zero_rows`.
struct AffinityMap {
  Matrix s;
  std::size_t zero_rows = 0;
};
AffinityMap ComputeAffinity(const Matrix& feats);

inline constexpr float kMaskedLogit = -1e4f;

// Additive N x N attention bias: 0 where two tokens share a segment,
// kMaskedLogit otherwise. Tokens in no segment attend only to themselves.
struct BiasMask {
  Matrix m;
  std::size_t unassigned_tokens = 0;
};
BiasMask SegmentBias(const TokenMaskSet& masks, std::size_t n);

// softmax(lambda * S + M) row-wise, then multiplied with `values`.
// `weights`, when non-null, receives the attention matrix.
Matrix AffinityAttention(const AffinityMap& affinity, const BiasMask& bias,
                         const Matrix& values, double lambda,
                         Matrix* weights = nullptr);

struct StitchAttentionConfig {
  // <= 0 selects sqrt(d).
  double tau = 0.0;
  double lambda = 1.0;
  std::size_t block = 128;
  bool streaming = true;
};

double ResolveTau(const StitchAttentionConfig& config, std::size_t d);

struct StitchForward {
  QKVGlobal qkv;
  Matrix attended;
  AffinityMap affinity;
  BiasMask bias;
  Matrix values;
  Matrix features;
  AttentionStats stats;
};

// stitch_qkv -> global attention -> affinity over the attended features ->
// segment bias -> affinity attention applied to the stitched value features.
StitchForward ForwardStitch(std::span<const PlacedGrid> crop_feats,
                            const ProjectionSet& proj,
                            std::span<const PlacedGrid> crop_values,
                            const TokenMaskSet& token_masks,
                            std::size_t global_hp, std::size_t global_wp,
                            const StitchAttentionConfig& config);

}  // namespace stitchseg

#endif  // STITCHSEG_ATTENTION_H_
