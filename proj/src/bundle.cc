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

#include "stitchseg/bundle.h"

#include <fstream>
#include <set>

#include "stitchseg/errors.h"
#include "stitchseg/stitcher.h"

namespace stitchseg {
namespace {

using nlohmann::json;

std::size_t GetSize(const json& j, const std::string& key) {
  if (!j.contains(key)) throw ValidationError(key + ": missing key");
  const json& v = j.at(key);
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
    throw ValidationError(key + ": expected a non-negative integer");
  }
  return v.get<std::size_t>();
}

std::string GetString(const json& j, const std::string& key,
                      const std::string& field) {
  if (!j.contains(key) || !j.at(key).is_string()) {
    throw ValidationError(field + ": expected a file name");
  }
  return j.at(key).get<std::string>();
}

void RequireDims(const Tensor& t, const std::vector<std::uint64_t>& want,
                 const std::string& field) {
  if (t.dims != want) {
    std::string got, exp;
    for (auto d : t.dims) got += std::to_string(d) + " ";
    for (auto d : want) exp += std::to_string(d) + " ";
    throw ValidationError(field + ": shape mismatch, expected [" + exp +
                          "] got [" + got + "]");
  }
}

Tensor LoadField(const std::filesystem::path& dir, const std::string& name,
                 const std::string& field) {
  const std::filesystem::path path = dir / name;
  if (!std::filesystem::exists(path)) {
    throw ValidationError(field + ": missing file " + name);
  }
  try {
    return ReadTensor(path);
  } catch (const ValidationError& e) {
    throw ValidationError(field + ": " + e.what());
  }
}

void RequireF32(const Tensor& t, const std::string& field) {
  if (t.dtype != DType::kF32) throw ValidationError(field + ": expected f32");
}

}  // namespace

json BundleManifest::ToJson() const {
  json j;
  j["image_h"] = image_h;
  j["image_w"] = image_w;
  j["patch"] = patch;
  j["window"] = window;
  j["stride"] = stride;
  j["d"] = d;
  j["class_names"] = class_names;
  j["crops"] = json::array();
  for (const CropEntry& c : crops) {
    j["crops"].push_back({{"y", c.offset.y},
                          {"x", c.offset.x},
                          {"files",
                           {{"q", c.files.q},
                            {"k", c.files.k},
                            {"v", c.files.v},
                            {"value", c.files.value},
                            {"affinity_src", c.files.affinity_src}}}});
  }
  j["projection_file"] = projection_file;
  j["text"] = {{"per_class", text_per_class}};
  if (text_projection) j["text"]["projection"] = *text_projection;
  j["masks_file"] = masks_file.empty() ? json(nullptr) : json(masks_file);
  if (gt_file) j["gt_file"] = *gt_file;
  return j;
}

BundleManifest BundleManifest::FromJson(const json& j) {
  if (!j.is_object()) throw ValidationError("manifest: expected an object");
  BundleManifest m;
  m.image_h = GetSize(j, "image_h");
  m.image_w = GetSize(j, "image_w");
  m.patch = GetSize(j, "patch");
  m.window = GetSize(j, "window");
  m.stride = GetSize(j, "stride");
  m.d = GetSize(j, "d");
  if (!j.contains("class_names") || !j["class_names"].is_array()) {
    throw ValidationError("class_names: expected an array");
  }
  for (const json& name : j["class_names"]) {
    if (!name.is_string()) throw ValidationError("class_names: expected strings");
    m.class_names.push_back(name.get<std::string>());
  }
  if (!j.contains("crops") || !j["crops"].is_array()) {
    throw ValidationError("crops: expected an array");
  }
  for (std::size_t i = 0; i < j["crops"].size(); ++i) {
    const json& c = j["crops"][i];
    const std::string field = "crops[" + std::to_string(i) + "]";
    CropEntry e;
    try {
      e.offset = {GetSize(c, "y"), GetSize(c, "x")};
    } catch (const ValidationError& err) {
      throw ValidationError(field + "." + err.what());
    }
    if (!c.contains("files") || !c["files"].is_object()) {
      throw ValidationError(field + ".files: expected an object");
    }
    const json& f = c["files"];
    e.files.q = GetString(f, "q", field + ".files.q");
    e.files.k = GetString(f, "k", field + ".files.k");
    e.files.v = GetString(f, "v", field + ".files.v");
    e.files.value = GetString(f, "value", field + ".files.value");
    e.files.affinity_src =
        GetString(f, "affinity_src", field + ".files.affinity_src");
    m.crops.push_back(std::move(e));
  }
  m.projection_file = GetString(j, "projection_file", "projection_file");
  if (!j.contains("text") || !j["text"].is_object()) {
    throw ValidationError("text: expected an object");
  }
  const json& text = j["text"];
  if (!text.contains("per_class") || !text["per_class"].is_array()) {
    throw ValidationError("text.per_class: expected an array");
  }
  for (const json& f : text["per_class"]) {
    if (!f.is_string()) throw ValidationError("text.per_class: expected file names");
    m.text_per_class.push_back(f.get<std::string>());
  }
  if (text.contains("projection") && !text["projection"].is_null()) {
    m.text_projection = GetString(text, "projection", "text.projection");
  }
  if (!j.contains("masks_file")) throw ValidationError("masks_file: missing key");
  if (!j["masks_file"].is_null()) {
    m.masks_file = GetString(j, "masks_file", "masks_file");
  }
  if (j.contains("gt_file") && !j["gt_file"].is_null()) {
    m.gt_file = GetString(j, "gt_file", "gt_file");
  }
  return m;
}

void BundleManifest::Validate() const {
  const std::pair<const char*, std::size_t> positive[] = {
      {"image_h", image_h}, {"image_w", image_w}, {"patch", patch},
      {"window", window},   {"stride", stride},   {"d", d}};
  for (const auto& [name, value] : positive) {
    if (value == 0) throw ValidationError(std::string(name) + ": must be >= 1");
  }
  if (window % patch != 0) {
    throw ValidationError("window: " + std::to_string(window) +
                          " is misaligned with patch " + std::to_string(patch));
  }
  if (stride % patch != 0) {
    throw ValidationError("stride: " + std::to_string(stride) +
                          " is misaligned with patch " + std::to_string(patch));
  }
  if (image_h % patch != 0) {
    throw ValidationError("image_h: not a multiple of patch");
  }
  if (image_w % patch != 0) {
    throw ValidationError("image_w: not a multiple of patch");
  }
  if (window > image_h || window > image_w) {
    throw ValidationError("window: window exceeds image");
  }
  if (class_names.empty()) throw ValidationError("class_names: empty");
  if (class_names.size() > kMaxClasses) {
    throw ValidationError("class_names: more than 255 classes");
  }
  std::set<std::string> seen;
  for (const std::string& name : class_names) {
    if (!seen.insert(name).second) {
      throw ValidationError("class_names: duplicate name '" + name + "'");
    }
  }
  if (crops.empty()) throw ValidationError("crops: empty");
  for (std::size_t i = 0; i < crops.size(); ++i) {
    const PixelOffset& o = crops[i].offset;
    const std::string field = "crops[" + std::to_string(i) + "]";
    if (o.y % patch != 0 || o.x % patch != 0) {
      throw ValidationError(field + ": offset misaligned with patch");
    }
    if (o.y + window > image_h || o.x + window > image_w) {
      throw ValidationError(field + ": crop exceeds image");
    }
  }
  if (text_per_class.size() != class_names.size()) {
    throw ValidationError("text.per_class: " +
                          std::to_string(text_per_class.size()) +
                          " files for " + std::to_string(class_names.size()) +
                          " classes");
  }
}

Tensor ProjectionToTensor(const ProjectionSet& proj) {
  proj.Validate();
  const std::size_t din = proj.InputDim(), d = proj.OutputDim();
  std::vector<float> data;
  data.reserve(3 * (din + 1) * d);
  auto append = [&](const Matrix& w, const std::vector<float>& b) {
    data.insert(data.end(), w.data.begin(), w.data.end());
    if (b.empty()) {
      data.insert(data.end(), d, 0.0f);
    } else {
      data.insert(data.end(), b.begin(), b.end());
    }
  };
  append(proj.wq, proj.bq);
  append(proj.wk, proj.bk);
  append(proj.wv, proj.bv);
  return Tensor::FromF32({3, din + 1, d}, data);
}

ProjectionSet ProjectionFromTensor(const Tensor& t) {
  if (t.dims.size() != 3 || t.dims[0] != 3 || t.dims[1] < 2) {
    throw ValidationError("projection tensor must be [3, d_in + 1, d]");
  }
  const std::vector<float> data = t.ToF32();
  const std::size_t din = t.dims[1] - 1, d = t.dims[2];
  const std::size_t slice = (din + 1) * d;
  auto read = [&](std::size_t s, Matrix& w, std::vector<float>& b) {
    const float* base = &data[s * slice];
    w = Matrix(din, d, std::vector<float>(base, base + din * d));
    b.assign(base + din * d, base + slice);
  };
  ProjectionSet p;
  read(0, p.wq, p.bq);
  read(1, p.wk, p.bk);
  read(2, p.wv, p.bv);
  return p;
}

Tensor GridToTensor(const TokenGrid& grid) {
  return Tensor::FromF32({grid.hp, grid.wp, grid.d}, grid.data);
}

TokenGrid GridFromTensor(const Tensor& t) {
  if (t.dims.size() != 3) throw ValidationError("token grid must be 3-D");
  TokenGrid g(t.dims[0], t.dims[1], t.dims[2]);
  g.data = t.ToF32();
  return g;
}

Tensor MatrixToTensor(const Matrix& m) {
  return Tensor::FromF32({m.rows, m.cols}, m.data);
}

Matrix MatrixFromTensor(const Tensor& t) {
  if (t.dims.size() != 2) throw ValidationError("matrix must be 2-D");
  return Matrix(t.dims[0], t.dims[1], t.ToF32());
}

Bundle LoadBundle(const std::filesystem::path& dir) {
  const std::filesystem::path manifest_path = dir / "manifest.json";
  std::ifstream in(manifest_path);
  if (!in) throw ValidationError("manifest.json: missing in " + dir.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("manifest.json: ") + e.what());
  }

  Bundle b;
  b.dir = dir;
  b.manifest = BundleManifest::FromJson(j);
  const BundleManifest& m = b.manifest;
  m.Validate();
  const std::uint64_t cp = m.CropTokens();

  // Projection first so crop feature widths can be checked against it.
  const Tensor proj_t = LoadField(dir, m.projection_file, "projection_file");
  RequireF32(proj_t, "projection_file");
  try {
    b.projection = ProjectionFromTensor(proj_t);
    b.projection.Validate();
  } catch (const ValidationError& e) {
    throw ValidationError(std::string("projection_file: ") + e.what());
  }
  if (b.projection.OutputDim() != m.d) {
    throw ValidationError("projection_file: output width " +
                          std::to_string(b.projection.OutputDim()) +
                          " != d " + std::to_string(m.d));
  }
  const std::uint64_t din = b.projection.InputDim();

  std::optional<std::uint64_t> value_dim;
  for (std::size_t i = 0; i < m.crops.size(); ++i) {
    const CropEntry& e = m.crops[i];
    const std::string field = "crops[" + std::to_string(i) + "].files.";
    BundleCrop crop;
    crop.offset = e.offset;
    auto load_grid = [&](const std::string& name, const std::string& key,
                         std::optional<std::uint64_t> channels) {
      const Tensor t = LoadField(dir, name, field + key);
      RequireF32(t, field + key);
      if (channels) {
        RequireDims(t, {cp, cp, *channels}, field + key);
      } else if (t.dims.size() != 3 || t.dims[0] != cp || t.dims[1] != cp) {
        throw ValidationError(field + key + ": shape mismatch, expected [" +
                              std::to_string(cp) + " " + std::to_string(cp) +
                              " c]");
      }
      return GridFromTensor(t);
    };
    crop.q = load_grid(e.files.q, "q", m.d);
    crop.k = load_grid(e.files.k, "k", m.d);
    crop.v = load_grid(e.files.v, "v", m.d);
    crop.affinity_src = load_grid(e.files.affinity_src, "affinity_src", din);
    crop.value = load_grid(e.files.value, "value", value_dim);
    value_dim = crop.value.d;
    b.crops.push_back(std::move(crop));
  }

  {
    std::vector<PlacedGrid> coverage;
    for (const BundleCrop& c : b.crops) {
      coverage.push_back({{c.offset.y / m.patch, c.offset.x / m.patch},
                          TokenGrid(cp, cp, 1)});
    }
    const GlobalGrid g = StitchGrids(coverage, b.GlobalHp(), b.GlobalWp());
    for (std::uint32_t count : g.coverage) {
      if (count == 0) throw ValidationError("crops: do not cover the image");
    }
  }

  std::optional<std::uint64_t> text_dim;
  for (std::size_t c = 0; c < m.text_per_class.size(); ++c) {
    const std::string field = "text.per_class[" + std::to_string(c) + "]";
    const Tensor t = LoadField(dir, m.text_per_class[c], field);
    RequireF32(t, field);
    if (t.dims.size() != 2) throw ValidationError(field + ": expected [P, d_text]");
    if (text_dim && t.dims[1] != *text_dim) {
      throw ValidationError(field + ": embedding width differs from class 0");
    }
    text_dim = t.dims[1];
    b.per_class_prompts.push_back(MatrixFromTensor(t));
  }
  if (m.text_projection) {
    const Tensor t = LoadField(dir, *m.text_projection, "text.projection");
    RequireF32(t, "text.projection");
    RequireDims(t, {*value_dim, *text_dim}, "text.projection");
    b.text_projection = MatrixFromTensor(t);
  } else if (*value_dim != *text_dim) {
    throw ValidationError(
        "text.projection: required when value width differs from text width");
  }

  b.masks.h = m.image_h;
  b.masks.w = m.image_w;
  if (!m.masks_file.empty()) {
    const Tensor t = LoadField(dir, m.masks_file, "masks_file");
    if (t.dtype != DType::kU8) throw ValidationError("masks_file: expected u8");
    if (t.dims.size() != 3 || t.dims[1] != m.image_h || t.dims[2] != m.image_w) {
      throw ValidationError("masks_file: shape mismatch, expected [R " +
                            std::to_string(m.image_h) + " " +
                            std::to_string(m.image_w) + "]");
    }
    const std::vector<std::uint8_t> data = t.ToU8();
    const std::size_t plane = m.image_h * m.image_w;
    for (std::size_t r = 0; r < t.dims[0]; ++r) {
      b.masks.masks.emplace_back(data.begin() + r * plane,
                                 data.begin() + (r + 1) * plane);
    }
    try {
      b.masks.Validate();
    } catch (const ValidationError& e) {
      throw ValidationError(std::string("masks_file: ") + e.what());
    }
  }

  if (m.gt_file) {
    const Tensor t = LoadField(dir, *m.gt_file, "gt_file");
    if (t.dtype != DType::kU8) throw ValidationError("gt_file: expected u8");
    RequireDims(t, {m.image_h, m.image_w}, "gt_file");
    LabelMap gt(m.image_h, m.image_w);
    gt.labels = t.ToU8();
    for (std::uint8_t v : gt.labels) {
      if (v != kIgnoreLabel && v >= m.class_names.size()) {
        throw ValidationError("gt_file: label " + std::to_string(v) +
                              " out of range");
      }
    }
    b.gt = std::move(gt);
  }
  return b;
}

void WriteBundle(const Bundle& bundle, const std::filesystem::path& dir) {
  const BundleManifest& m = bundle.manifest;
  m.Validate();
  if (bundle.crops.size() != m.crops.size()) {
    throw ValidationError("crops: tensor count does not match manifest");
  }
  std::filesystem::create_directories(dir);
  for (std::size_t i = 0; i < m.crops.size(); ++i) {
    const CropFiles& f = m.crops[i].files;
    const BundleCrop& c = bundle.crops[i];
    WriteTensor(GridToTensor(c.q), dir / f.q);
    WriteTensor(GridToTensor(c.k), dir / f.k);
    WriteTensor(GridToTensor(c.v), dir / f.v);
    WriteTensor(GridToTensor(c.value), dir / f.value);
    WriteTensor(GridToTensor(c.affinity_src), dir / f.affinity_src);
  }
  WriteTensor(ProjectionToTensor(bundle.projection), dir / m.projection_file);
  if (bundle.per_class_prompts.size() != m.text_per_class.size()) {
    throw ValidationError("text.per_class: tensor count does not match manifest");
  }
  for (std::size_t c = 0; c < m.text_per_class.size(); ++c) {
    WriteTensor(MatrixToTensor(bundle.per_class_prompts[c]),
                dir / m.text_per_class[c]);
  }
  if (m.text_projection && bundle.text_projection) {
    WriteTensor(MatrixToTensor(*bundle.text_projection),
                dir / *m.text_projection);
  }
  if (!m.masks_file.empty()) {
    std::vector<std::uint8_t> data;
    for (const auto& mask : bundle.masks.masks) {
      data.insert(data.end(), mask.begin(), mask.end());
    }
    WriteTensor(Tensor::FromU8({bundle.masks.masks.size(), m.image_h, m.image_w},
                               data),
                dir / m.masks_file);
  }
  if (m.gt_file && bundle.gt) {
    WriteTensor(Tensor::FromU8({m.image_h, m.image_w}, bundle.gt->labels),
                dir / *m.gt_file);
  }
  std::ofstream out(dir / "manifest.json");
  if (!out) throw ValidationError("cannot write manifest.json in " + dir.string());
  out << m.ToJson().dump(2) << "\n";
}

}  // namespace stitchseg
