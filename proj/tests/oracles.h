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

#ifndef STITCHSEG_TESTS_ORACLES_H_
#define STITCHSEG_TESTS_ORACLES_H_

// Brute-force reference implementations used as test oracles. They share
// container types with the library but none of its algorithms.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

#include "stitchseg/seg_head.h"
#include "stitchseg/segments.h"
#include "stitchseg/token_grid.h"

namespace stitchseg::testing {

// Per-token mean over covering crops, found by testing every crop for
// containment of every global token. Long double accumulation.
struct ScatterOracleOut {
  std::vector<long double> values;  // hp * wp * d
  std::vector<std::uint32_t> count;
};

inline ScatterOracleOut ScatterMeanOracle(const std::vector<PlacedGrid>& crops,
                                          std::size_t hp, std::size_t wp) {
  const std::size_t d = crops.front().grid.d;
  ScatterOracleOut out{std::vector<long double>(hp * wp * d, 0.0L),
                       std::vector<std::uint32_t>(hp * wp, 0)};
  for (std::size_t r = 0; r < hp; ++r) {
    for (std::size_t c = 0; c < wp; ++c) {
      const std::size_t t = r * wp + c;
      for (const PlacedGrid& crop : crops) {
        const bool inside = r >= crop.offset.row &&
                            r < crop.offset.row + crop.grid.hp &&
                            c >= crop.offset.col &&
                            c < crop.offset.col + crop.grid.wp;
        if (!inside) continue;
        ++out.count[t];
        for (std::size_t ch = 0; ch < d; ++ch) {
          out.values[t * d + ch] +=
              crop.grid.at(r - crop.offset.row, c - crop.offset.col, ch);
        }
      }
      if (out.count[t] == 0) continue;
      for (std::size_t ch = 0; ch < d; ++ch) {
        out.values[t * d + ch] /= out.count[t];
      }
    }
  }
  return out;
}

// softmax(scores) computed directly from exp(s - max) in long double.
inline std::vector<long double> SoftmaxRow(const std::vector<long double>& s) {
  const long double m = *std::max_element(s.begin(), s.end());
  std::vector<long double> e(s.size());
  long double z = 0.0L;
  for (std::size_t i = 0; i < s.size(); ++i) {
    e[i] = std::exp(s[i] - m);
    z += e[i];
  }
  for (long double& v : e) v /= z;
  return e;
}

// softmax(scale * scores + bias) * values, all in long double. `bias` may be
// empty.
inline std::vector<long double> SoftmaxAttentionOracle(
    const std::vector<std::vector<long double>>& scores,
    const std::vector<std::vector<long double>>& bias, long double scale,
    const Matrix& values) {
  const std::size_t n = scores.size();
  std::vector<long double> out(n * values.cols, 0.0L);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<long double> row(n);
    for (std::size_t j = 0; j < n; ++j) {
      row[j] = scale * scores[i][j] + (bias.empty() ? 0.0L : bias[i][j]);
    }
    const std::vector<long double> p = SoftmaxRow(row);
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t c = 0; c < values.cols; ++c) {
        out[i * values.cols + c] += p[j] * values(j, c);
      }
    }
  }
  return out;
}

inline std::vector<std::vector<long double>> DotScores(const Matrix& q,
                                                       const Matrix& k) {
  std::vector<std::vector<long double>> s(q.rows,
                                          std::vector<long double>(k.rows));
  for (std::size_t i = 0; i < q.rows; ++i) {
    for (std::size_t j = 0; j < k.rows; ++j) {
      long double acc = 0.0L;
      for (std::size_t c = 0; c < q.cols; ++c) acc += (long double)q(i, c) * k(j, c);
      s[i][j] = acc;
    }
  }
  return s;
}

inline long double CosineOracle(std::span<const float> a,
                                std::span<const float> b) {
  long double ab = 0.0L, aa = 0.0L, bb = 0.0L;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += (long double)a[i] * b[i];
    aa += (long double)a[i] * a[i];
    bb += (long double)b[i] * b[i];
  }
  return ab / std::sqrt(aa * bb);
}

// Mask vote by exhaustive counting of all 256 byte values per mask, followed
// by a sequential rewrite in bank order.
inline LabelMap ModalVoteOracle(const LabelMap& raw, const SegmentBank& bank) {
  LabelMap out = raw;
  for (const auto& mask : bank.masks) {
    std::array<std::size_t, 256> hist{};
    bool any = false;
    for (std::size_t i = 0; i < mask.size(); ++i) {
      if (mask[i]) {
        ++hist[raw.labels[i]];
        any = true;
      }
    }
    if (!any) continue;
    int best = 0;
    for (int v = 1; v < 256; ++v) {
      if (hist[v] > hist[best]) best = v;
    }
    for (std::size_t i = 0; i < mask.size(); ++i) {
      if (mask[i]) out.labels[i] = static_cast<std::uint8_t>(best);
    }
  }
  return out;
}

// Per-class IoU from pixel sets, with no confusion matrix. Ignore-label
// pixels in `gt` are dropped. Returns -1 for classes with an empty union.
inline std::vector<double> IouOracle(const std::vector<LabelMap>& preds,
                                     const std::vector<LabelMap>& gts,
                                     std::size_t classes) {
  std::vector<double> iou(classes);
  for (std::size_t c = 0; c < classes; ++c) {
    std::uint64_t inter = 0, uni = 0;
    for (std::size_t k = 0; k < preds.size(); ++k) {
      for (std::size_t i = 0; i < gts[k].labels.size(); ++i) {
        if (gts[k].labels[i] == kIgnoreLabel) continue;
        const bool in_p = preds[k].labels[i] == c;
        const bool in_g = gts[k].labels[i] == c;
        inter += in_p && in_g;
        uni += in_p || in_g;
      }
    }
    iou[c] = uni == 0 ? -1.0 : static_cast<double>(inter) / uni;
  }
  return iou;
}

// Bilinear sample of one plane at output pixel (y, x), half-pixel centers.
inline long double BilinearOracle(const std::vector<float>& plane,
                                  std::size_t in_h, std::size_t in_w,
                                  std::size_t out_h, std::size_t out_w,
                                  std::size_t y, std::size_t x) {
  auto src = [](std::size_t o, std::size_t in, std::size_t out) {
    long double s = ((long double)o + 0.5L) * in / out - 0.5L;
    return std::clamp(s, 0.0L, (long double)in - 1);
  };
  const long double sy = src(y, in_h, out_h), sx = src(x, in_w, out_w);
  const std::size_t y0 = (std::size_t)std::floor(sy);
  const std::size_t x0 = (std::size_t)std::floor(sx);
  const std::size_t y1 = std::min(y0 + 1, in_h - 1);
  const std::size_t x1 = std::min(x0 + 1, in_w - 1);
  const long double fy = sy - y0, fx = sx - x0;
  auto at = [&](std::size_t r, std::size_t c) {
    return (long double)plane[r * in_w + c];
  };
  return (1 - fy) * ((1 - fx) * at(y0, x0) + fx * at(y0, x1)) +
         fy * ((1 - fx) * at(y1, x0) + fx * at(y1, x1));
}

inline Matrix RandomMatrix(std::mt19937_64& rng, std::size_t rows,
                           std::size_t cols, float scale = 1.0f) {
  std::normal_distribution<float> g(0.0f, scale);
  Matrix m(rows, cols);
  for (float& v : m.data) v = g(rng);
  return m;
}

inline TokenGrid RandomGrid(std::mt19937_64& rng, std::size_t hp,
                            std::size_t wp, std::size_t d) {
  std::normal_distribution<float> g(0.0f, 1.0f);
  TokenGrid t(hp, wp, d);
  for (float& v : t.data) v = g(rng);
  return t;
}

inline double MaxAbsDiff(std::span<const float> a, std::span<const float> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    m = std::max(m, std::abs((double)a[i] - (double)b[i]));
  }
  return m;
}

}  // namespace stitchseg::testing

#endif  // STITCHSEG_TESTS_ORACLES_H_
