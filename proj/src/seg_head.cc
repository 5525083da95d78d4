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

#include "stitchseg/seg_head.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "stitchseg/errors.h"

namespace stitchseg {

LogitMap LogitMap::FromTokenGrid(const TokenGrid& grid) {
  LogitMap out(grid.d, grid.hp, grid.wp);
  for (std::size_t y = 0; y < grid.hp; ++y) {
    for (std::size_t x = 0; x < grid.wp; ++x) {
      for (std::size_t c = 0; c < grid.d; ++c) out.at(c, y, x) = grid.at(y, x, c);
    }
  }
  return out;
}

TokenGrid LogitMap::ToTokenGrid() const {
  TokenGrid out(h, w, classes);
  for (std::size_t c = 0; c < classes; ++c) {
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) out.at(y, x, c) = at(c, y, x);
    }
  }
  return out;
}

TokenLogits ComputeLogits(const Matrix& feats, const Matrix* proj_out,
                          const ClassEmbeddingBank& bank, std::size_t hp,
                          std::size_t wp) {
  if (feats.rows != hp * wp) {
    throw ValidationError("feature rows do not match the token grid");
  }
  const std::size_t classes = bank.NumClasses();
  if (classes == 0) throw ValidationError("empty class bank");
  if (classes > kMaxClasses) throw ValidationError("too many classes");
  const std::size_t text_dim = proj_out ? proj_out->cols : feats.cols;
  if (proj_out && proj_out->rows != feats.cols) {
    throw ValidationError("text projection expects width " +
                          std::to_string(proj_out->rows) + ", features have " +
                          std::to_string(feats.cols));
  }
  if (text_dim != bank.Dim()) {
    throw ValidationError("projected width " + std::to_string(text_dim) +
                          " != text embedding width " +
                          std::to_string(bank.Dim()));
  }

  TokenLogits out{LogitMap(classes, hp, wp), 0};
  std::vector<double> proj(text_dim);
  for (std::size_t t = 0; t < feats.rows; ++t) {
    const auto row = feats.Row(t);
    if (proj_out) {
      std::fill(proj.begin(), proj.end(), 0.0);
      for (std::size_t i = 0; i < feats.cols; ++i) {
        const double xi = row[i];
        const auto wrow = proj_out->Row(i);
        for (std::size_t c = 0; c < text_dim; ++c) proj[c] += xi * wrow[c];
      }
    } else {
      std::copy(row.begin(), row.end(), proj.begin());
    }
    double norm = 0.0;
    for (double v : proj) norm += v * v;
    norm = std::sqrt(norm);
    if (norm < 1e-12) {
      ++out.zero_rows;
      continue;
    }
    const std::size_t y = t / wp, x = t % wp;
    for (std::size_t k = 0; k < classes; ++k) {
      const auto e = bank.embeddings.Row(k);
      double s = 0.0;
      for (std::size_t c = 0; c < text_dim; ++c) s += proj[c] * e[c];
      out.logits.at(k, y, x) = static_cast<float>(std::clamp(s / norm, -1.0, 1.0));
    }
  }
  return out;
}

LogitMap UpsampleBilinear(const LogitMap& logits, std::size_t h,
                          std::size_t w) {
  if (logits.h == 0 || logits.w == 0) throw ValidationError("empty logit map");
  struct Tap {
    std::size_t i0, i1;
    double frac;
  };
  auto taps = [](std::size_t in, std::size_t out) {
    std::vector<Tap> t(out);
    const double scale = static_cast<double>(in) / static_cast<double>(out);
    for (std::size_t o = 0; o < out; ++o) {
      double src = (static_cast<double>(o) + 0.5) * scale - 0.5;
      src = std::clamp(src, 0.0, static_cast<double>(in - 1));
      const auto i0 = static_cast<std::size_t>(std::floor(src));
      t[o] = {i0, std::min(i0 + 1, in - 1), src - static_cast<double>(i0)};
    }
    return t;
  };
  const auto ty = taps(logits.h, h);
  const auto tx = taps(logits.w, w);
  LogitMap out(logits.classes, h, w);
  for (std::size_t c = 0; c < logits.classes; ++c) {
    for (std::size_t y = 0; y < h; ++y) {
      const Tap& a = ty[y];
      for (std::size_t x = 0; x < w; ++x) {
        const Tap& b = tx[x];
        const double top = (1.0 - b.frac) * logits.at(c, a.i0, b.i0) +
                           b.frac * logits.at(c, a.i0, b.i1);
        const double bottom = (1.0 - b.frac) * logits.at(c, a.i1, b.i0) +
                              b.frac * logits.at(c, a.i1, b.i1);
        out.at(c, y, x) = static_cast<float>((1.0 - a.frac) * top + a.frac * bottom);
      }
    }
  }
  return out;
}

LabelMap PredictArgmax(const LogitMap& logits) {
  if (logits.classes == 0) throw ValidationError("no classes");
  if (logits.classes > kMaxClasses) throw ValidationError("too many classes");
  LabelMap out(logits.h, logits.w);
  for (std::size_t y = 0; y < logits.h; ++y) {
    for (std::size_t x = 0; x < logits.w; ++x) {
      std::size_t best = 0;
      float best_v = logits.at(0, y, x);
      for (std::size_t c = 1; c < logits.classes; ++c) {
        if (logits.at(c, y, x) > best_v) {
          best_v = logits.at(c, y, x);
          best = c;
        }
      }
      out.at(y, x) = static_cast<std::uint8_t>(best);
    }
  }
  return out;
}

MaskVoteResult MaskVotePostprocess(const LabelMap& raw,
                                   const SegmentBank& masks) {
  if (!masks.masks.empty() && (masks.h != raw.h || masks.w != raw.w)) {
    throw ValidationError("mask size does not match label map");
  }
  MaskVoteResult result{raw, 0};
  std::array<std::size_t, 256> hist{};
  for (const auto& mask : masks.masks) {
    if (mask.size() != raw.labels.size()) {
      throw ValidationError("mask size does not match label map");
    }
    hist.fill(0);
    std::size_t on = 0;
    for (std::size_t p = 0; p < mask.size(); ++p) {
      if (mask[p]) {
        ++hist[raw.labels[p]];
        ++on;
      }
    }
    if (on == 0) {
      ++result.skipped_empty_masks;
      continue;
    }
    const auto mode = static_cast<std::uint8_t>(
        std::max_element(hist.begin(), hist.end()) - hist.begin());
    for (std::size_t p = 0; p < mask.size(); ++p) {
      if (mask[p]) result.labels.labels[p] = mode;
    }
  }
  return result;
}

void WritePgm(const LabelMap& labels, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot open for writing: " + path.string());
  out << "P5\n" << labels.w << " " << labels.h << "\n255\n";
  out.write(reinterpret_cast<const char*>(labels.labels.data()),
            static_cast<std::streamsize>(labels.labels.size()));
  if (!out) throw ValidationError("write failed: " + path.string());
}

LabelMap ReadPgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open PGM: " + path.string());
  auto next_token = [&]() {
    std::string tok;
    while (in) {
      const int ch = in.peek();
      if (ch == '#') {
        std::string comment;
        std::getline(in, comment);
      } else if (std::isspace(ch)) {
        in.get();
      } else {
        break;
      }
    }
    in >> tok;
    return tok;
  };
  if (next_token() != "P5") throw ValidationError(path.string() + ": not a P5 PGM");
  std::size_t w = 0, h = 0, maxval = 0;
  try {
    w = std::stoul(next_token());
    h = std::stoul(next_token());
    maxval = std::stoul(next_token());
  } catch (const std::exception&) {
    throw ValidationError(path.string() + ": bad PGM header");
  }
  if (maxval != 255) throw ValidationError(path.string() + ": PGM maxval must be 255");
  in.get();
  LabelMap out(h, w);
  in.read(reinterpret_cast<char*>(out.labels.data()),
          static_cast<std::streamsize>(out.labels.size()));
  if (in.gcount() != static_cast<std::streamsize>(out.labels.size())) {
    throw ValidationError(path.string() + ": truncated PGM");
  }
  return out;
}

namespace {

// PASCAL VOC palette.
std::array<int, 3> PaletteColor(std::size_t index) {
  std::array<int, 3> rgb{0, 0, 0};
  std::size_t c = index;
  for (int shift = 7; shift >= 0 && c; --shift, c >>= 3) {
    for (int ch = 0; ch < 3; ++ch) rgb[ch] |= static_cast<int>((c >> ch) & 1) << shift;
  }
  return rgb;
}

}  // namespace

void WriteLegend(std::span<const std::string> class_names,
                 const std::filesystem::path& path) {
  nlohmann::json j;
  j["classes"] = nlohmann::json::array();
  for (std::size_t i = 0; i < class_names.size(); ++i) {
    j["classes"].push_back(
        {{"index", i}, {"name", class_names[i]}, {"color", PaletteColor(i)}});
  }
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot open for writing: " + path.string());
  out << j.dump(2) << "\n";
}

std::vector<std::string> ReadLegend(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open legend: " + path.string());
  try {
    const nlohmann::json j = nlohmann::json::parse(in);
    std::vector<std::string> names;
    for (const auto& entry : j.at("classes")) {
      names.push_back(entry.at("name").get<std::string>());
    }
    return names;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

}  // namespace stitchseg
