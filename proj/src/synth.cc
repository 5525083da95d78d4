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

#include "stitchseg/synth.h"

#include <cmath>
#include <numbers>
#include <string>

#include "stitchseg/errors.h"
#include "stitchseg/window_planner.h"

namespace stitchseg {
namespace {

enum Stream : std::uint64_t {
  kSplitStream = 1,
  kClassStream = 2,
  kPrototypeStream = 3,
  kNoiseStream = 4,
  kProjectionStream = 5,
  kTextProjectionStream = 6,
  kPromptStream = 7,
};

std::uint64_t SplitMix(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Sequential draws over one (seed, stream) pair.
class Draws {
 public:
  Draws(std::uint64_t seed, std::uint64_t stream) : seed_(seed), stream_(stream) {}
  double Uniform() { return UniformAt(seed_, stream_, next_++); }
  std::size_t Below(std::size_t n) {
    return std::min(n - 1, static_cast<std::size_t>(Uniform() * static_cast<double>(n)));
  }

 private:
  std::uint64_t seed_, stream_, next_ = 0;
};

Matrix RandomMatrix(std::uint64_t seed, std::uint64_t stream,
                    std::size_t rows, std::size_t cols, double scale,
                    bool add_identity) {
  Matrix m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      double v = scale * GaussianAt(seed, stream, r * cols + c);
      if (add_identity && r == c) v += 1.0;
      m(r, c) = static_cast<float>(v);
    }
  }
  return m;
}

std::vector<float> RandomVector(std::uint64_t seed, std::uint64_t stream,
                                std::size_t n, double scale) {
  std::vector<float> v(n);
  for (std::size_t i = 0; i < n; ++i) {
    v[i] = static_cast<float>(scale * GaussianAt(seed, stream, i));
  }
  return v;
}

}  // namespace

std::uint64_t HashCounter(std::uint64_t seed, std::uint64_t stream,
                          std::uint64_t index) {
  return SplitMix(SplitMix(SplitMix(seed) ^ stream) ^ index);
}

double UniformAt(std::uint64_t seed, std::uint64_t stream,
                 std::uint64_t index) {
  return static_cast<double>(HashCounter(seed, stream, index) >> 11) * 0x1.0p-53;
}

double GaussianAt(std::uint64_t seed, std::uint64_t stream,
                  std::uint64_t index) {
  const double u1 = 1.0 - UniformAt(seed, stream, 2 * index);
  const double u2 = UniformAt(seed, stream, 2 * index + 1);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint8_t SyntheticScene::TokenLabel(std::size_t row, std::size_t col) const {
  return labels.at(row * params.patch, col * params.patch);
}

SyntheticScene GenScene(const SceneParams& params) {
  if (params.patch == 0 || params.h == 0 || params.w == 0 ||
      params.h % params.patch != 0 || params.w % params.patch != 0) {
    throw ValidationError("scene size must be a positive multiple of patch");
  }
  if (params.num_classes < 2 || params.num_classes > kMaxClasses) {
    throw ValidationError("num_classes must be in [2, 255]");
  }
  if (params.dim < 2) throw ValidationError("feature dim must be >= 2");
  if (!(params.noise_sigma >= 0.0)) throw ValidationError("noise_sigma must be >= 0");

  SyntheticScene scene;
  scene.params = params;
  const std::size_t hp = scene.Hp(), wp = scene.Wp();

  Draws split(params.seed, kSplitStream);
  const std::size_t splits = params.splits ? params.splits : 3 + split.Below(5);
  scene.regions.push_back({0, 0, hp, wp});
  for (std::size_t s = 0; s < splits; ++s) {
    std::vector<std::size_t> candidates;
    for (std::size_t r = 0; r < scene.regions.size(); ++r) {
      if (scene.regions[r].rows >= 2 || scene.regions[r].cols >= 2) {
        candidates.push_back(r);
      }
    }
    if (candidates.empty()) break;
    const std::size_t idx = candidates[split.Below(candidates.size())];
    const TokenRect rect = scene.regions[idx];
    bool cut_rows;
    if (rect.rows >= 2 && rect.cols >= 2) {
      cut_rows = split.Uniform() < 0.5;
    } else {
      cut_rows = rect.rows >= 2;
    }
    const std::size_t extent = cut_rows ? rect.rows : rect.cols;
    const std::size_t at = 1 + split.Below(extent - 1);
    TokenRect a = rect, b = rect;
    if (cut_rows) {
      a.rows = at;
      b.row += at;
      b.rows -= at;
    } else {
      a.cols = at;
      b.col += at;
      b.cols -= at;
    }
    scene.regions[idx] = a;
    scene.regions.push_back(b);
  }
  if (scene.regions.size() < 2) {
    throw ValidationError("scene too small for two regions");
  }

  // The first regions get distinct classes so at least two classes appear.
  Draws cls(params.seed, kClassStream);
  std::vector<std::uint8_t> perm(params.num_classes);
  for (std::size_t c = 0; c < perm.size(); ++c) perm[c] = static_cast<std::uint8_t>(c);
  for (std::size_t i = perm.size() - 1; i > 0; --i) {
    std::swap(perm[i], perm[cls.Below(i + 1)]);
  }
  for (std::size_t r = 0; r < scene.regions.size(); ++r) {
    scene.region_class.push_back(
        r < perm.size() ? perm[r]
                        : static_cast<std::uint8_t>(cls.Below(params.num_classes)));
  }

  scene.labels = LabelMap(params.h, params.w);
  for (std::size_t r = 0; r < scene.regions.size(); ++r) {
    const TokenRect& rect = scene.regions[r];
    for (std::size_t y = rect.row * params.patch;
         y < (rect.row + rect.rows) * params.patch; ++y) {
      for (std::size_t x = rect.col * params.patch;
           x < (rect.col + rect.cols) * params.patch; ++x) {
        scene.labels.at(y, x) = scene.region_class[r];
      }
    }
  }

  scene.prototypes = Matrix(params.num_classes, params.dim);
  constexpr std::size_t kMaxAttempts = 10000;
  for (std::size_t c = 0; c < params.num_classes; ++c) {
    bool accepted = false;
    for (std::size_t attempt = 0; attempt < kMaxAttempts && !accepted; ++attempt) {
      std::vector<double> v(params.dim);
      double norm = 0.0;
      for (std::size_t ch = 0; ch < params.dim; ++ch) {
        v[ch] = GaussianAt(params.seed, kPrototypeStream,
                           ((c * kMaxAttempts) + attempt) * params.dim + ch);
        norm += v[ch] * v[ch];
      }
      norm = std::sqrt(norm);
      if (norm == 0.0) continue;
      for (double& x : v) x /= norm;
      accepted = true;
      for (std::size_t prev = 0; prev < c && accepted; ++prev) {
        double cos = 0.0;
        for (std::size_t ch = 0; ch < params.dim; ++ch) {
          cos += v[ch] * scene.prototypes(prev, ch);
        }
        accepted = cos <= kMaxPrototypeCosine;
      }
      if (accepted) {
        for (std::size_t ch = 0; ch < params.dim; ++ch) {
          scene.prototypes(c, ch) = static_cast<float>(v[ch]);
        }
      }
    }
    if (!accepted) throw ValidationError("could not sample separable prototypes");
  }
  return scene;
}

TokenGrid EncodeCrop(const SyntheticScene& scene, TokenOffset offset,
                     std::size_t hp, std::size_t wp) {
  if (offset.row + hp > scene.Hp() || offset.col + wp > scene.Wp()) {
    throw ValidationError("crop exceeds scene");
  }
  const std::size_t dim = scene.params.dim;
  const double sigma = scene.params.noise_sigma;
  TokenGrid out(hp, wp, dim);
  for (std::size_t r = 0; r < hp; ++r) {
    for (std::size_t c = 0; c < wp; ++c) {
      const std::size_t gr = offset.row + r, gc = offset.col + c;
      const std::uint64_t token = gr * scene.Wp() + gc;
      const auto proto = scene.prototypes.Row(scene.TokenLabel(gr, gc));
      for (std::size_t ch = 0; ch < dim; ++ch) {
        const double noise =
            sigma == 0.0
                ? 0.0
                : sigma * GaussianAt(scene.params.seed, kNoiseStream, token * dim + ch);
        out.at(r, c, ch) = static_cast<float>(proto[ch] + noise);
      }
    }
  }
  return out;
}

TokenGrid EncodePatchLocal(const SyntheticScene& scene) {
  return EncodeCrop(scene, {0, 0}, scene.Hp(), scene.Wp());
}

ProjectionSet SyntheticProjection(const SyntheticScene& scene) {
  const std::size_t d = scene.params.dim;
  const std::uint64_t seed = scene.params.seed;
  ProjectionSet p;
  p.wq = RandomMatrix(seed, kProjectionStream * 16 + 0, d, d, 0.1, true);
  p.wk = RandomMatrix(seed, kProjectionStream * 16 + 1, d, d, 0.1, true);
  p.wv = RandomMatrix(seed, kProjectionStream * 16 + 2, d, d, 0.1, true);
  p.bq = RandomVector(seed, kProjectionStream * 16 + 3, d, 0.01);
  p.bk = RandomVector(seed, kProjectionStream * 16 + 4, d, 0.01);
  p.bv = RandomVector(seed, kProjectionStream * 16 + 5, d, 0.01);
  return p;
}

Matrix SyntheticTextProjection(const SyntheticScene& scene) {
  // Random orthogonal matrix (Gram-Schmidt on Gaussian columns).
  const std::size_t d = scene.params.dim;
  std::vector<std::vector<double>> cols(d, std::vector<double>(d));
  for (std::size_t j = 0; j < d; ++j) {
    for (std::size_t i = 0; i < d; ++i) {
      cols[j][i] = GaussianAt(scene.params.seed, kTextProjectionStream, j * d + i);
    }
    for (std::size_t k = 0; k < j; ++k) {
      double dot = 0.0;
      for (std::size_t i = 0; i < d; ++i) dot += cols[j][i] * cols[k][i];
      for (std::size_t i = 0; i < d; ++i) cols[j][i] -= dot * cols[k][i];
    }
    double norm = 0.0;
    for (double v : cols[j]) norm += v * v;
    norm = std::sqrt(norm);
    for (double& v : cols[j]) v /= norm;
  }
  Matrix m(d, d);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) m(i, j) = static_cast<float>(cols[j][i]);
  }
  return m;
}

std::vector<Matrix> SyntheticPromptEmbeddings(const SyntheticScene& scene,
                                              const SynthConfig& config) {
  if (config.prompts_per_class == 0) {
    throw ValidationError("prompts_per_class must be >= 1");
  }
  const Matrix text_proj = SyntheticTextProjection(scene);
  const std::size_t d = scene.params.dim;
  const std::size_t prompts = config.prompts_per_class;
  std::vector<Matrix> out;
  for (std::size_t c = 0; c < scene.params.num_classes; ++c) {
    std::vector<double> base(d, 0.0);
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = 0; j < d; ++j) {
        base[j] += static_cast<double>(scene.prototypes(c, i)) * text_proj(i, j);
      }
    }
    Matrix m(prompts, d);
    for (std::size_t p = 0; p < prompts; ++p) {
      const std::uint64_t key = (c * prompts + p) * (d + 1);
      const double scale = 0.5 + 1.5 * UniformAt(scene.params.seed, kPromptStream, key);
      for (std::size_t j = 0; j < d; ++j) {
        const double jitter =
            config.prompt_jitter *
            GaussianAt(scene.params.seed, kPromptStream, key + 1 + j);
        m(p, j) = static_cast<float>(scale * (base[j] + jitter));
      }
    }
    out.push_back(std::move(m));
  }
  return out;
}

std::vector<std::string> SyntheticClassNames(std::size_t num_classes) {
  static const char* kNames[] = {"road",  "sky",   "building", "tree",
                                 "grass", "water", "person",   "car",
                                 "wall",  "floor", "sand",     "snow"};
  std::vector<std::string> out;
  for (std::size_t c = 0; c < num_classes; ++c) {
    out.push_back(c < std::size(kNames) ? kNames[c] : "class_" + std::to_string(c));
  }
  return out;
}

SegmentBank RegionMasks(const SyntheticScene& scene) {
  SegmentBank bank{scene.params.h, scene.params.w, {}};
  const std::size_t patch = scene.params.patch;
  for (const TokenRect& rect : scene.regions) {
    std::vector<std::uint8_t> mask(bank.h * bank.w, 0);
    for (std::size_t y = rect.row * patch; y < (rect.row + rect.rows) * patch; ++y) {
      for (std::size_t x = rect.col * patch; x < (rect.col + rect.cols) * patch; ++x) {
        mask[y * bank.w + x] = 1;
      }
    }
    bank.masks.push_back(std::move(mask));
  }
  return bank;
}

namespace {

PipelineInputs BaseInputs(const SyntheticScene& scene, const SynthConfig& config) {
  PipelineInputs in;
  in.image_h = scene.params.h;
  in.image_w = scene.params.w;
  in.patch = scene.params.patch;
  in.projection = SyntheticProjection(scene);
  in.text_projection = SyntheticTextProjection(scene);
  const std::vector<std::string> names = SyntheticClassNames(scene.params.num_classes);
  in.bank = BuildBank(names, SyntheticPromptEmbeddings(scene, config));
  in.masks = RegionMasks(scene);
  return in;
}

CropInput MakeCrop(const SyntheticScene& scene, const ProjectionSet& proj,
                   TokenOffset offset, std::size_t hp, std::size_t wp) {
  CropInput crop;
  crop.offset = offset;
  crop.features = EncodeCrop(scene, offset, hp, wp);
  crop.value = crop.features;
  const Matrix x = crop.features.ToMatrix();
  crop.q = TokenGrid::FromMatrix(Project(x, proj.wq, proj.bq), hp, wp);
  crop.k = TokenGrid::FromMatrix(Project(x, proj.wk, proj.bk), hp, wp);
  crop.v = TokenGrid::FromMatrix(Project(x, proj.wv, proj.bv), hp, wp);
  return crop;
}

}  // namespace

PipelineInputs WindowInputs(const SyntheticScene& scene,
                            const SynthConfig& config) {
  const std::size_t patch = scene.params.patch;
  if (config.window % patch != 0 || config.stride % patch != 0) {
    throw ValidationError("window and stride must be multiples of patch");
  }
  const CropPlan plan =
      PlanWindows(scene.params.h, scene.params.w, config.window, config.stride);
  PipelineInputs in = BaseInputs(scene, config);
  const std::size_t cp = config.window / patch;
  for (const PixelOffset& o : plan.offsets) {
    in.crops.push_back(
        MakeCrop(scene, in.projection, {o.y / patch, o.x / patch}, cp, cp));
  }
  return in;
}

PipelineInputs FullImageInputs(const SyntheticScene& scene,
                               const SynthConfig& config) {
  PipelineInputs in = BaseInputs(scene, config);
  in.crops.push_back(MakeCrop(scene, in.projection, {0, 0}, scene.Hp(), scene.Wp()));
  return in;
}

OracleOutput OracleFullPipeline(const SyntheticScene& scene,
                                const SynthConfig& config) {
  OracleOutput out;
  out.result = RunStitchPipeline(FullImageInputs(scene, config), config.pipeline);
  ConfusionMatrix cm(scene.params.num_classes);
  cm.Accumulate(out.result.final, scene.labels);
  out.eval = ComputeMIoU(cm);
  return out;
}

CropBlockHook LeakyFinalBlock(double strength) {
  return [strength](std::size_t, const CropInput&, Matrix& attended) {
    std::vector<double> mean(attended.cols, 0.0);
    for (std::size_t r = 0; r < attended.rows; ++r) {
      for (std::size_t c = 0; c < attended.cols; ++c) mean[c] += attended(r, c);
    }
    for (double& m : mean) m = strength * m / static_cast<double>(attended.rows);
    for (std::size_t r = 0; r < attended.rows; ++r) {
      for (std::size_t c = 0; c < attended.cols; ++c) {
        attended(r, c) = static_cast<float>(attended(r, c) + mean[c]);
      }
    }
  };
}

Bundle MakeSynthBundle(const SyntheticScene& scene, const SynthConfig& config) {
  const PipelineInputs in = WindowInputs(scene, config);
  Bundle b;
  BundleManifest& m = b.manifest;
  m.image_h = scene.params.h;
  m.image_w = scene.params.w;
  m.patch = scene.params.patch;
  m.window = config.window;
  m.stride = config.stride;
  m.d = in.projection.OutputDim();
  m.class_names = in.bank.class_names;
  for (std::size_t i = 0; i < in.crops.size(); ++i) {
    const CropInput& c = in.crops[i];
    const std::string n = std::to_string(i);
    m.crops.push_back(
        {{c.offset.row * m.patch, c.offset.col * m.patch},
         {"q_" + n + ".stsr", "k_" + n + ".stsr", "v_" + n + ".stsr",
          "value_" + n + ".stsr", "affinity_src_" + n + ".stsr"}});
    b.crops.push_back({{c.offset.row * m.patch, c.offset.col * m.patch},
                       *c.q, *c.k, *c.v, c.value, c.features});
  }
  m.projection_file = "projection.stsr";
  for (std::size_t c = 0; c < m.class_names.size(); ++c) {
    m.text_per_class.push_back("text_" + std::to_string(c) + ".stsr");
  }
  m.text_projection = "text_projection.stsr";
  m.masks_file = "masks.stsr";
  m.gt_file = "gt.stsr";

  b.projection = in.projection;
  b.text_projection = in.text_projection;
  b.per_class_prompts = SyntheticPromptEmbeddings(scene, config);
  b.masks = in.masks;
  b.gt = scene.labels;
  return b;
}

}  // namespace stitchseg
