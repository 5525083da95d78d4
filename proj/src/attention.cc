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

#include "stitchseg/attention.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "stitchseg/errors.h"
#include "stitchseg/stitcher.h"

namespace stitchseg {
namespace {

double Dot(const float* a, const float* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    acc += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  }
  return acc;
}

void RequireFinite(const Matrix& m, const char* name) {
  for (float v : m.data) {
    if (!std::isfinite(v)) {
      throw NumericalError(std::string("non-finite value in ") + name);
    }
  }
}

void CheckTau(double tau) {
  if (!(tau > 0.0) || !std::isfinite(tau)) {
    throw ValidationError("tau must be a positive finite number");
  }
}

void CheckBias(const std::vector<float>& bias, std::size_t d,
               const char* name) {
  if (!bias.empty() && bias.size() != d) {
    throw ValidationError(std::string(name) + " length does not match d");
  }
}

}  // namespace

void ProjectionSet::Validate() const {
  if (wq.rows == 0 || wq.cols == 0) {
    throw ValidationError("empty projection");
  }
  if (wk.rows != wq.rows || wv.rows != wq.rows || wk.cols != wq.cols ||
      wv.cols != wq.cols) {
    throw ValidationError("Wq, Wk and Wv shapes differ");
  }
  CheckBias(bq, wq.cols, "bq");
  CheckBias(bk, wq.cols, "bk");
  CheckBias(bv, wq.cols, "bv");
}

ProjectionSet ProjectionSet::Identity(std::size_t d) {
  Matrix eye(d, d);
  for (std::size_t i = 0; i < d; ++i) eye(i, i) = 1.0f;
  return ProjectionSet{eye, eye, eye, {}, {}, {}};
}

Matrix Project(const Matrix& x, const Matrix& w, std::span<const float> bias) {
  if (x.cols != w.rows) {
    throw ValidationError("projection input dim " + std::to_string(x.cols) +
                          " != " + std::to_string(w.rows));
  }
  if (!bias.empty() && bias.size() != w.cols) {
    throw ValidationError("projection bias length mismatch");
  }
  Matrix out(x.rows, w.cols);
  std::vector<double> acc(w.cols);
  for (std::size_t r = 0; r < x.rows; ++r) {
    if (bias.empty()) {
      std::fill(acc.begin(), acc.end(), 0.0);
    } else {
      std::copy(bias.begin(), bias.end(), acc.begin());
    }
    for (std::size_t i = 0; i < x.cols; ++i) {
      const double xi = x(r, i);
      const float* wrow = &w.data[i * w.cols];
      for (std::size_t c = 0; c < w.cols; ++c) acc[c] += xi * wrow[c];
    }
    for (std::size_t c = 0; c < w.cols; ++c) {
      out(r, c) = static_cast<float>(acc[c]);
    }
  }
  return out;
}

void QKVGlobal::Validate() const {
  if (q.rows == 0) throw ValidationError("empty token set");
  if (k.rows != q.rows || v.rows != q.rows) {
    throw ValidationError("Q, K and V token counts differ");
  }
  if (k.cols != q.cols) throw ValidationError("Q and K widths differ");
  RequireFinite(q, "Q");
  RequireFinite(k, "K");
  RequireFinite(v, "V");
}

QKVGlobal StitchQKV(std::span<const PlacedGrid> crop_feats,
                    const ProjectionSet& proj, std::size_t global_hp,
                    std::size_t global_wp) {
  proj.Validate();
  std::vector<PlacedGrid> q, k, v;
  q.reserve(crop_feats.size());
  k.reserve(crop_feats.size());
  v.reserve(crop_feats.size());
  for (const PlacedGrid& crop : crop_feats) {
    if (crop.grid.d != proj.InputDim()) {
      throw ValidationError("crop feature width " +
                            std::to_string(crop.grid.d) +
                            " does not match projection input " +
                            std::to_string(proj.InputDim()));
    }
    const Matrix x = crop.grid.ToMatrix();
    const std::size_t hp = crop.grid.hp, wp = crop.grid.wp;
    q.push_back({crop.offset, TokenGrid::FromMatrix(Project(x, proj.wq, proj.bq), hp, wp)});
    k.push_back({crop.offset, TokenGrid::FromMatrix(Project(x, proj.wk, proj.bk), hp, wp)});
    v.push_back({crop.offset, TokenGrid::FromMatrix(Project(x, proj.wv, proj.bv), hp, wp)});
  }
  return StitchProjectedQKV(q, k, v, global_hp, global_wp);
}

QKVGlobal StitchProjectedQKV(std::span<const PlacedGrid> q,
                             std::span<const PlacedGrid> k,
                             std::span<const PlacedGrid> v,
                             std::size_t global_hp, std::size_t global_wp) {
  auto stitch = [&](std::span<const PlacedGrid> crops) {
    GlobalGrid g = StitchGrids(crops, global_hp, global_wp);
    for (std::uint32_t c : g.coverage) {
      if (c == 0) throw ValidationError("crops do not cover the image");
    }
    return g.grid.ToMatrix();
  };
  QKVGlobal out{stitch(q), stitch(k), stitch(v)};
  out.Validate();
  return out;
}

Matrix AttentionWeights(const Matrix& q, const Matrix& k, double tau) {
  CheckTau(tau);
  if (q.cols != k.cols) throw ValidationError("Q and K widths differ");
  Matrix w(q.rows, k.rows);
  std::vector<double> row(k.rows);
  for (std::size_t i = 0; i < q.rows; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < k.rows; ++j) {
      row[j] = Dot(&q.data[i * q.cols], &k.data[j * k.cols], q.cols) / tau;
      mx = std::max(mx, row[j]);
    }
    double sum = 0.0;
    for (double& s : row) {
      s = std::exp(s - mx);
      sum += s;
    }
    for (std::size_t j = 0; j < k.rows; ++j) {
      w(i, j) = static_cast<float>(row[j] / sum);
    }
  }
  return w;
}

Matrix GlobalAttention(const QKVGlobal& qkv, double tau,
                       AttentionStats* stats) {
  CheckTau(tau);
  qkv.Validate();
  const std::size_t n = qkv.q.rows, dk = qkv.q.cols, dv = qkv.v.cols;
  // The naive kernel holds the whole score matrix.
  Matrix scores(n, n);
  if (stats) stats->score_buffer_bytes = n * n * sizeof(float);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      scores(i, j) = static_cast<float>(
          Dot(&qkv.q.data[i * dk], &qkv.k.data[j * dk], dk) / tau);
    }
  }
  Matrix out(n, dv);
  std::vector<double> acc(dv);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = scores.Row(i);
    const double mx = *std::max_element(row.begin(), row.end());
    double sum = 0.0;
    std::fill(acc.begin(), acc.end(), 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      const double e = std::exp(static_cast<double>(row[j]) - mx);
      sum += e;
      const float* vj = &qkv.v.data[j * dv];
      for (std::size_t c = 0; c < dv; ++c) acc[c] += e * vj[c];
    }
    for (std::size_t c = 0; c < dv; ++c) {
      out(i, c) = static_cast<float>(acc[c] / sum);
    }
  }
  return out;
}

Matrix StreamingAttention(const QKVGlobal& qkv, double tau, std::size_t block,
                          AttentionStats* stats) {
  CheckTau(tau);
  if (block == 0) throw ValidationError("block must be >= 1");
  qkv.Validate();
  const std::size_t n = qkv.q.rows, dk = qkv.q.cols, dv = qkv.v.cols;
  const std::size_t tile = std::min(block, n);
  std::vector<float> scores(tile * tile);
  if (stats) stats->score_buffer_bytes = scores.size() * sizeof(float);

  Matrix out(n, dv);
  std::vector<double> running_max(tile), running_sum(tile), acc(tile * dv);
  for (std::size_t q0 = 0; q0 < n; q0 += tile) {
    const std::size_t qn = std::min(tile, n - q0);
    std::fill(running_max.begin(), running_max.end(),
              -std::numeric_limits<double>::infinity());
    std::fill(running_sum.begin(), running_sum.end(), 0.0);
    std::fill(acc.begin(), acc.end(), 0.0);

    for (std::size_t k0 = 0; k0 < n; k0 += tile) {
      const std::size_t kn = std::min(tile, n - k0);
      for (std::size_t i = 0; i < qn; ++i) {
        for (std::size_t j = 0; j < kn; ++j) {
          scores[i * tile + j] = static_cast<float>(
              Dot(&qkv.q.data[(q0 + i) * dk], &qkv.k.data[(k0 + j) * dk], dk) /
              tau);
        }
      }
      for (std::size_t i = 0; i < qn; ++i) {
        const float* s = &scores[i * tile];
        double block_max = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < kn; ++j) {
          block_max = std::max(block_max, static_cast<double>(s[j]));
        }
        const double new_max = std::max(running_max[i], block_max);
        const double rescale = std::exp(running_max[i] - new_max);
        double* a = &acc[i * dv];
        running_sum[i] *= rescale;
        for (std::size_t c = 0; c < dv; ++c) a[c] *= rescale;
        for (std::size_t j = 0; j < kn; ++j) {
          const double e = std::exp(static_cast<double>(s[j]) - new_max);
          running_sum[i] += e;
          const float* vj = &qkv.v.data[(k0 + j) * dv];
          for (std::size_t c = 0; c < dv; ++c) a[c] += e * vj[c];
        }
        running_max[i] = new_max;
      }
    }
    for (std::size_t i = 0; i < qn; ++i) {
      for (std::size_t c = 0; c < dv; ++c) {
        out(q0 + i, c) = static_cast<float>(acc[i * dv + c] / running_sum[i]);
      }
    }
  }
  return out;
}

AffinityMap ComputeAffinity(const Matrix& feats) {
  RequireFinite(feats, "affinity features");
  const std::size_t n = feats.rows, d = feats.cols;
  std::vector<double> unit(n * d, 0.0);
  std::vector<bool> zero(n, false);
  AffinityMap out{Matrix(n, n), 0};
  for (std::size_t i = 0; i < n; ++i) {
    const float* row = &feats.data[i * d];
    const double norm = std::sqrt(Dot(row, row, d));
    if (norm < 1e-12) {
      zero[i] = true;
      ++out.zero_rows;
      continue;
    }
    for (std::size_t c = 0; c < d; ++c) unit[i * d + c] = row[c] / norm;
  }
  for (std::size_t i = 0; i < n; ++i) {
    out.s(i, i) = 1.0f;
    if (zero[i]) continue;
    for (std::size_t j = i + 1; j < n; ++j) {
      if (zero[j]) continue;
      double s = 0.0;
      for (std::size_t c = 0; c < d; ++c) s += unit[i * d + c] * unit[j * d + c];
      const float sf = static_cast<float>(std::clamp(s, -1.0, 1.0));
      out.s(i, j) = sf;
      out.s(j, i) = sf;
    }
  }
  return out;
}

BiasMask SegmentBias(const TokenMaskSet& masks, std::size_t n) {
  if (masks.hp * masks.wp != n) {
    throw ValidationError("mask shape does not match token grid");
  }
  const std::size_t words = (masks.masks.size() + 63) / 64;
  std::vector<std::uint64_t> bits(n * std::max<std::size_t>(words, 1), 0);
  for (std::size_t m = 0; m < masks.masks.size(); ++m) {
    if (masks.masks[m].size() != n) {
      throw ValidationError("mask shape does not match token grid");
    }
    for (std::size_t t = 0; t < n; ++t) {
      if (masks.masks[m][t]) bits[t * words + m / 64] |= 1ull << (m % 64);
    }
  }
  BiasMask out{Matrix(n, n, kMaskedLogit), 0};
  for (std::size_t i = 0; i < n; ++i) {
    bool assigned = false;
    for (std::size_t w = 0; w < words; ++w) assigned |= bits[i * words + w] != 0;
    if (!assigned) ++out.unassigned_tokens;
    out.m(i, i) = 0.0f;
    for (std::size_t j = i + 1; j < n; ++j) {
      bool shared = false;
      for (std::size_t w = 0; w < words && !shared; ++w) {
        shared = (bits[i * words + w] & bits[j * words + w]) != 0;
      }
      if (shared) {
        out.m(i, j) = 0.0f;
        out.m(j, i) = 0.0f;
      }
    }
  }
  return out;
}

Matrix AffinityAttention(const AffinityMap& affinity, const BiasMask& bias,
                         const Matrix& values, double lambda,
                         Matrix* weights) {
  const std::size_t n = affinity.s.rows;
  if (affinity.s.cols != n || bias.m.rows != n || bias.m.cols != n ||
      values.rows != n) {
    throw ValidationError("affinity, bias and value shapes disagree");
  }
  RequireFinite(values, "values");
  const std::size_t dv = values.cols;
  Matrix out(n, dv);
  if (weights) *weights = Matrix(n, n);
  std::vector<double> logit(n), acc(dv);
  for (std::size_t i = 0; i < n; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
      logit[j] = lambda * affinity.s(i, j) + bias.m(i, j);
      mx = std::max(mx, logit[j]);
    }
    double sum = 0.0;
    std::fill(acc.begin(), acc.end(), 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      const double e = std::exp(logit[j] - mx);
      logit[j] = e;
      sum += e;
      if (e == 0.0) continue;
      const float* vj = &values.data[j * dv];
      for (std::size_t c = 0; c < dv; ++c) acc[c] += e * vj[c];
    }
    for (std::size_t c = 0; c < dv; ++c) {
      out(i, c) = static_cast<float>(acc[c] / sum);
    }
    if (weights) {
      for (std::size_t j = 0; j < n; ++j) {
        (*weights)(i, j) = static_cast<float>(logit[j] / sum);
      }
    }
  }
  return out;
}

double ResolveTau(const StitchAttentionConfig& config, std::size_t d) {
  if (config.tau > 0.0) return config.tau;
  return std::sqrt(static_cast<double>(d));
}

StitchForward ForwardStitch(std::span<const PlacedGrid> crop_feats,
                            const ProjectionSet& proj,
                            std::span<const PlacedGrid> crop_values,
                            const TokenMaskSet& token_masks,
                            std::size_t global_hp, std::size_t global_wp,
                            const StitchAttentionConfig& config) {
  StitchForward f;
  f.qkv = StitchQKV(crop_feats, proj, global_hp, global_wp);
  const double tau = ResolveTau(config, f.qkv.q.cols);
  f.attended = config.streaming
                   ? StreamingAttention(f.qkv, tau, config.block, &f.stats)
                   : GlobalAttention(f.qkv, tau, &f.stats);
  f.affinity = ComputeAffinity(f.attended);
  f.bias = SegmentBias(token_masks, global_hp * global_wp);
  f.values = StitchGrids(crop_values, global_hp, global_wp).grid.ToMatrix();
  f.features = AffinityAttention(f.affinity, f.bias, f.values, config.lambda);
  return f;
}

}  // namespace stitchseg
