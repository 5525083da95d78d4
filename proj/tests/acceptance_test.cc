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

// Acceptance runner. Prints one PASS/FAIL line per primary criterion and
// exits nonzero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "oracles.h"
#include "stitchseg/attention.h"
#include "stitchseg/errors.h"
#include "stitchseg/evaluator.h"
#include "stitchseg/pipeline.h"
#include "stitchseg/seg_head.h"
#include "stitchseg/stitcher.h"
#include "stitchseg/synth.h"
#include "stitchseg/text_bank.h"
#include "stitchseg/window_planner.h"

namespace stitchseg {
namespace {

using testing::MaxAbsDiff;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = true;
  std::string detail;
};

double MsSince(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

std::string Format(const char* fmt, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), fmt, args...);
  return buf;
}

SyntheticScene Scene(std::uint64_t seed, std::size_t size, double sigma) {
  SceneParams p;
  p.seed = seed;
  p.h = size;
  p.w = size;
  p.noise_sigma = sigma;
  return GenScene(p);
}

std::size_t SceneSize(std::uint64_t seed) { return 448 + 16 * (seed % 15); }

Outcome CropCounts() {
  const auto start = Clock::now();
  const std::vector<std::size_t> sizes = {336, 448, 560, 672};
  std::vector<std::size_t> counts;
  for (std::size_t s : sizes) counts.push_back(PlanWindows(s, s, 336, 112).NumCrops());
  const double ms = MsSince(start);
  const bool ok = counts == std::vector<std::size_t>{1, 4, 9, 16} && ms < 1.0;
  return {ok, Format("counts %zu/%zu/%zu/%zu, %.4f ms", counts[0], counts[1],
                     counts[2], counts[3], ms)};
}

Outcome CropInvariance() {
  const auto start = Clock::now();
  SynthConfig config;
  double worst = 0.0;
  int label_mismatches = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const SyntheticScene s = Scene(seed, SceneSize(seed), 0.5);
    const PipelineResult win =
        RunStitchPipeline(WindowInputs(s, config), config.pipeline);
    const PipelineResult full =
        RunStitchPipeline(FullImageInputs(s, config), config.pipeline);
    worst = std::max({worst, MaxAbsDiff(win.attended.data, full.attended.data),
                      MaxAbsDiff(win.features.data, full.features.data),
                      MaxAbsDiff(win.token_logits.data, full.token_logits.data)});
    if (win.final != full.final || win.raw != full.raw) ++label_mismatches;
  }
  const double sec = MsSince(start) / 1000.0;
  return {label_mismatches == 0 && worst <= 1e-5 && sec < 60.0,
          Format("20 scenes 448..672, label mismatches %d, max diff %.3g, %.2f s",
                 label_mismatches, worst, sec)};
}

Outcome Fragmentation() {
  SynthConfig config;
  std::size_t min_differing = SIZE_MAX;
  double stitch_worst = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const SyntheticScene s = Scene(seed, SceneSize(seed), 0.5);
    const PipelineInputs in = WindowInputs(s, config);
    const PipelineResult full =
        RunStitchPipeline(FullImageInputs(s, config), config.pipeline);
    const PipelineResult leaky = RunBaselinePipeline(
        in, config.pipeline, LeakyFinalBlock(config.leak_strength));
    const PipelineResult stitched = RunStitchPipeline(in, config.pipeline);
    std::size_t differing = 0;
    for (std::size_t t = 0; t < full.attended.rows; ++t) {
      if (MaxAbsDiff(leaky.attended.Row(t), full.attended.Row(t)) > 1e-5) {
        ++differing;
      }
    }
    min_differing = std::min(min_differing, differing);
    stitch_worst =
        std::max(stitch_worst, MaxAbsDiff(stitched.attended.data, full.attended.data));
  }
  return {min_differing >= 1 && stitch_worst <= 1e-5,
          Format("baseline min differing tokens/scene %zu, stitch max diff %.3g",
                 min_differing, stitch_worst)};
}

Outcome StreamingEqualsNaive() {
  std::mt19937_64 rng(2024);
  const std::size_t block = 128;
  double worst = 0.0;
  bool bytes_ok = true;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = std::uniform_int_distribution<std::size_t>(1, 2048)(rng);
    const std::size_t d = std::uniform_int_distribution<std::size_t>(1, 128)(rng);
    const QKVGlobal qkv{testing::RandomMatrix(rng, n, d),
                        testing::RandomMatrix(rng, n, d),
                        testing::RandomMatrix(rng, n, d)};
    const double tau = std::sqrt(static_cast<double>(d));
    AttentionStats naive_stats, stream_stats;
    const Matrix a = GlobalAttention(qkv, tau, &naive_stats);
    const Matrix b = StreamingAttention(qkv, tau, block, &stream_stats);
    worst = std::max(worst, MaxAbsDiff(a.data, b.data));
    bytes_ok = bytes_ok && stream_stats.score_buffer_bytes <= block * n * 4 &&
               naive_stats.score_buffer_bytes == n * n * 4;
  }
  // Memory ratio on the token counts of the 1/4/9/16-crop inputs.
  std::vector<double> ratios;
  for (std::size_t n : {441u, 784u, 1225u, 1764u}) {
    const QKVGlobal qkv{testing::RandomMatrix(rng, n, 8),
                        testing::RandomMatrix(rng, n, 8),
                        testing::RandomMatrix(rng, n, 8)};
    AttentionStats naive_stats, stream_stats;
    GlobalAttention(qkv, 1.0, &naive_stats);
    StreamingAttention(qkv, 1.0, block, &stream_stats);
    ratios.push_back(static_cast<double>(stream_stats.score_buffer_bytes) /
                     naive_stats.score_buffer_bytes);
  }
  bool monotone = true;
  for (std::size_t i = 1; i < ratios.size(); ++i) {
    monotone = monotone && ratios[i] < ratios[i - 1];
  }
  return {worst <= 1e-5 && bytes_ok && monotone,
          Format("max diff %.3g, buffer bounds %s, memory reduction "
                 "%.1f%%/%.1f%%/%.1f%%/%.1f%%",
                 worst, bytes_ok ? "ok" : "violated", 100 * (1 - ratios[0]),
                 100 * (1 - ratios[1]), 100 * (1 - ratios[2]),
                 100 * (1 - ratios[3]))};
}

Outcome StitchOracle() {
  std::mt19937_64 rng(77);
  auto pick = [&rng](std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
  };
  std::size_t inexact = 0;
  double worst_rel = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t hp = pick(1, 12), wp = pick(1, 12), d = pick(1, 8);
    std::vector<PlacedGrid> crops;
    const std::size_t n = pick(1, 8);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t ch = pick(1, hp), cw = pick(1, wp);
      crops.push_back({{pick(0, hp - ch), pick(0, wp - cw)},
                       testing::RandomGrid(rng, ch, cw, d)});
    }
    const GlobalGrid g = StitchGrids(crops, hp, wp);

    // Scatter-add and count in f64.
    std::vector<double> sum(hp * wp * d, 0.0);
    std::vector<std::uint32_t> count(hp * wp, 0);
    for (const PlacedGrid& c : crops) {
      for (std::size_t r = 0; r < c.grid.hp; ++r) {
        for (std::size_t col = 0; col < c.grid.wp; ++col) {
          const std::size_t t = (c.offset.row + r) * wp + c.offset.col + col;
          ++count[t];
          for (std::size_t ch = 0; ch < d; ++ch) sum[t * d + ch] += c.grid.at(r, col, ch);
        }
      }
    }
    const testing::ScatterOracleOut precise = testing::ScatterMeanOracle(crops, hp, wp);
    if (g.coverage != count) ++inexact;
    for (std::size_t t = 0; t < hp * wp; ++t) {
      for (std::size_t ch = 0; ch < d; ++ch) {
        const std::size_t i = t * d + ch;
        const float got = g.grid.data[i];
        const double mean = count[t] == 0 ? 0.0 : sum[i] / count[t];
        if (got != static_cast<float>(mean)) ++inexact;
        const long double ref = precise.values[i];
        if (ref != 0.0L) {
          worst_rel = std::max(worst_rel,
                               static_cast<double>(std::fabs((got - ref) / ref)));
        }
      }
    }
  }
  return {inexact == 0 && worst_rel <= 1e-6,
          Format("200 configs, f64 mismatches %zu, max f32 relative error %.3g",
                 inexact, worst_rel)};
}

SegmentBank RandomMasks(std::mt19937_64& rng, std::size_t h, std::size_t w,
                        std::size_t count) {
  auto pick = [&rng](std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
  };
  SegmentBank bank{h, w, {}};
  for (std::size_t m = 0; m < count; ++m) {
    std::vector<std::uint8_t> mask(h * w, 0);
    const std::size_t y0 = pick(0, h - 1), x0 = pick(0, w - 1);
    const std::size_t y1 = pick(y0, h - 1), x1 = pick(x0, w - 1);
    for (std::size_t y = y0; y <= y1; ++y) {
      for (std::size_t x = x0; x <= x1; ++x) mask[y * w + x] = 1;
    }
    if (pick(0, 9) == 0) std::fill(mask.begin(), mask.end(), 0);
    bank.masks.push_back(std::move(mask));
  }
  return bank;
}

// Disjoint column bands, every pixel in exactly one mask.
SegmentBank BandMasks(std::mt19937_64& rng, std::size_t h, std::size_t w) {
  std::vector<std::size_t> cuts = {0, w};
  for (int i = 0; i < 3; ++i) {
    cuts.push_back(std::uniform_int_distribution<std::size_t>(1, w - 1)(rng));
  }
  std::sort(cuts.begin(), cuts.end());
  SegmentBank bank{h, w, {}};
  for (std::size_t b = 0; b + 1 < cuts.size(); ++b) {
    std::vector<std::uint8_t> mask(h * w, 0);
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = cuts[b]; x < cuts[b + 1]; ++x) mask[y * w + x] = 1;
    }
    bank.masks.push_back(std::move(mask));
  }
  return bank;
}

Outcome PostprocessOracle() {
  std::mt19937_64 rng(99);
  int oracle_mismatch = 0, idempotence_fail = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t h = std::uniform_int_distribution<std::size_t>(1, 24)(rng);
    const std::size_t w = std::uniform_int_distribution<std::size_t>(2, 24)(rng);
    const std::size_t classes = std::uniform_int_distribution<std::size_t>(1, 6)(rng);
    LabelMap raw(h, w);
    for (auto& v : raw.labels) {
      v = static_cast<std::uint8_t>(
          std::uniform_int_distribution<std::size_t>(0, classes - 1)(rng));
    }
    const SegmentBank overlapping = RandomMasks(rng, h, w, 6);
    if (MaskVotePostprocess(raw, overlapping).labels !=
        testing::ModalVoteOracle(raw, overlapping)) {
      ++oracle_mismatch;
    }
    const SegmentBank bands = BandMasks(rng, h, w);
    const LabelMap once = MaskVotePostprocess(raw, bands).labels;
    if (MaskVotePostprocess(once, bands).labels != once) ++idempotence_fail;
  }
  return {oracle_mismatch == 0 && idempotence_fail == 0,
          Format("100 cases, oracle mismatches %d, idempotence failures %d",
                 oracle_mismatch, idempotence_fail)};
}

LabelMap Row(std::vector<std::uint8_t> labels) {
  LabelMap m(1, labels.size());
  m.labels = std::move(labels);
  return m;
}

Outcome MiouOracle() {
  ConfusionMatrix perfect(2), disjoint(2), half(2);
  perfect.Accumulate(Row({0, 1, 1, 0}), Row({0, 1, 1, 0}));
  disjoint.Accumulate(Row({1, 1, 0, 0}), Row({0, 0, 1, 1}));
  half.Accumulate(Row({0, 0, 0, 0}), Row({0, 0, 1, 1}));
  const double a = ComputeMIoU(perfect).miou, b = ComputeMIoU(disjoint).miou,
               c = ComputeMIoU(half).miou;
  bool fixtures = a == 1.0 && b == 0.0 && c == 0.25;

  std::mt19937_64 rng(5);
  int merge_fail = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t classes = std::uniform_int_distribution<std::size_t>(1, 5)(rng);
    std::vector<LabelMap> preds, gts;
    for (int k = 0; k < 6; ++k) {
      LabelMap p(3, 7), g(3, 7);
      for (auto& v : p.labels) {
        v = static_cast<std::uint8_t>(
            std::uniform_int_distribution<std::size_t>(0, classes - 1)(rng));
      }
      for (auto& v : g.labels) {
        const std::size_t r = std::uniform_int_distribution<std::size_t>(0, classes)(rng);
        v = r == classes ? kIgnoreLabel : static_cast<std::uint8_t>(r);
      }
      preds.push_back(p);
      gts.push_back(g);
    }
    ConfusionMatrix whole(classes);
    for (int k = 0; k < 6; ++k) whole.Accumulate(preds[k], gts[k]);
    const std::size_t split = std::uniform_int_distribution<std::size_t>(0, 6)(rng);
    ConfusionMatrix left(classes), right(classes);
    for (std::size_t k = 0; k < 6; ++k) {
      (k < split ? left : right).Accumulate(preds[k], gts[k]);
    }
    ConfusionMatrix lr = left, rl = right;
    lr.Merge(right);
    rl.Merge(left);
    if (!(lr == whole && rl == whole)) ++merge_fail;
    if (whole.Total() > 0 &&
        ComputeMIoU(lr).per_class_iou != ComputeMIoU(whole).per_class_iou) {
      ++merge_fail;
    }
  }
  return {fixtures && merge_fail == 0,
          Format("fixtures %.2f/%.2f/%.2f, merge failures %d", a, b, c, merge_fail)};
}

Outcome TextAggregation() {
  std::mt19937_64 rng(31);
  std::uniform_int_distribution<int> exponent(-20, 20);
  std::uniform_real_distribution<float> scale(0.01f, 100.0f);
  double worst_norm = 0.0, worst_rounded = 0.0;
  int order_fail = 0, scale_fail = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t p = std::uniform_int_distribution<std::size_t>(1, 20)(rng);
    const std::size_t d = std::uniform_int_distribution<std::size_t>(2, 64)(rng);
    const Matrix m = testing::RandomMatrix(rng, p, d);
    const std::vector<float> base = AggregateClassEmbedding(m);
    double norm = 0.0;
    for (float v : base) norm += static_cast<double>(v) * v;
    worst_norm = std::max(worst_norm, std::fabs(std::sqrt(norm) - 1.0));

    std::vector<std::size_t> order(p);
    for (std::size_t i = 0; i < p; ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);
    Matrix shuffled(p, d), scaled = m, rounded = m;
    for (std::size_t i = 0; i < p; ++i) {
      std::copy(m.Row(order[i]).begin(), m.Row(order[i]).end(),
                shuffled.Row(i).begin());
      // Power-of-two factors keep every scaled entry exactly s * v.
      const float s = std::ldexp(1.0f, exponent(rng));
      for (float& v : scaled.Row(i)) v *= s;
      const float r = scale(rng);
      for (float& v : rounded.Row(i)) v *= r;
    }
    if (AggregateClassEmbedding(shuffled) != base) ++order_fail;
    if (AggregateClassEmbedding(scaled) != base) ++scale_fail;
    worst_rounded =
        std::max(worst_rounded, MaxAbsDiff(AggregateClassEmbedding(rounded), base));
  }
  Matrix antipodal(2, 4, 0.0f);
  antipodal(0, 1) = 3.0f;
  antipodal(1, 1) = -0.5f;
  bool degenerate = false;
  try {
    AggregateClassEmbedding(antipodal);
  } catch (const NumericalError& e) {
    degenerate = std::string(e.what()) == "degenerate prompt set";
  }
  return {worst_norm <= 1e-5 && order_fail == 0 && scale_fail == 0 &&
              worst_rounded <= 1e-6 && degenerate,
          Format("max norm deviation %.3g, order changes %d, exact-scale changes "
                 "%d, rounded-scale max diff %.3g, degenerate error %s",
                 worst_norm, order_fail, scale_fail, worst_rounded,
                 degenerate ? "raised" : "missing")};
}

Outcome EndToEnd() {
  SynthConfig config;
  double clean_min = 1.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const SyntheticScene s = Scene(seed, SceneSize(seed), 0.0);
    const PipelineResult r = RunStitchPipeline(WindowInputs(s, config), config.pipeline);
    ConfusionMatrix cm(s.params.num_classes);
    cm.Accumulate(r.final, s.labels);
    clean_min = std::min(clean_min, ComputeMIoU(cm).miou);
  }

  SynthConfig raw_config = config;
  raw_config.pipeline.postprocess = false;
  ConfusionMatrix with(4), without(4);
  for (std::uint64_t seed = 100; seed < 120; ++seed) {
    const SyntheticScene s = Scene(seed, SceneSize(seed), 0.5);
    const PipelineInputs in = WindowInputs(s, config);
    with.Accumulate(RunStitchPipeline(in, config.pipeline).final, s.labels);
    without.Accumulate(RunStitchPipeline(in, raw_config.pipeline).final, s.labels);
  }
  const double miou_with = ComputeMIoU(with).miou;
  const double miou_without = ComputeMIoU(without).miou;
  return {clean_min == 1.0 && miou_with > miou_without,
          Format("sigma 0 min mIoU %.6f, sigma 0.5 mIoU with vote %.6f vs "
                 "without %.6f",
                 clean_min, miou_with, miou_without)};
}

int Run() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"crop-count", CropCounts},
      {"crop-invariance", CropInvariance},
      {"fragmentation", Fragmentation},
      {"streaming-equals-naive", StreamingEqualsNaive},
      {"stitch-oracle", StitchOracle},
      {"postprocess-oracle", PostprocessOracle},
      {"miou-oracle", MiouOracle},
      {"text-aggregation", TextAggregation},
      {"end-to-end-quality", EndToEnd},
  };
  int failures = 0;
  for (const auto& [name, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}

}  // namespace
}  // namespace stitchseg

int main() { return stitchseg::Run(); }
