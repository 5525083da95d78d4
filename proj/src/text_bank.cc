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

#include "stitchseg/text_bank.h"

#include <cmath>
#include <fstream>

#include "stitchseg/errors.h"

namespace stitchseg {

std::vector<float> AggregateClassEmbedding(const Matrix& per_prompt) {
  if (per_prompt.rows == 0 || per_prompt.cols == 0) {
    throw ValidationError("empty prompt set");
  }
  const std::size_t d = per_prompt.cols;
  std::vector<double> mean(d, 0.0);
  for (std::size_t p = 0; p < per_prompt.rows; ++p) {
    const auto row = per_prompt.Row(p);
    double norm = 0.0;
    for (float v : row) {
      if (!std::isfinite(v)) throw NumericalError("non-finite text embedding");
      norm += static_cast<double>(v) * v;
    }
    norm = std::sqrt(norm);
    if (norm == 0.0) {
      throw ValidationError("zero prompt embedding at row " +
                            std::to_string(p));
    }
    for (std::size_t c = 0; c < d; ++c) mean[c] += row[c] / norm;
  }
  double norm = 0.0;
  for (double& v : mean) {
    v /= static_cast<double>(per_prompt.rows);
    norm += v * v;
  }
  norm = std::sqrt(norm);
  if (norm < kDegenerateMeanNorm) throw NumericalError("degenerate prompt set");
  std::vector<float> out(d);
  for (std::size_t c = 0; c < d; ++c) {
    out[c] = static_cast<float>(mean[c] / norm);
  }
  return out;
}

ClassEmbeddingBank BuildBank(std::span<const std::string> class_names,
                             std::span<const Matrix> per_class) {
  if (class_names.size() != per_class.size()) {
    throw ValidationError("text embeddings for " +
                          std::to_string(per_class.size()) + " classes, " +
                          std::to_string(class_names.size()) +
                          " class names");
  }
  if (per_class.empty()) throw ValidationError("no classes");
  const std::size_t d = per_class.front().cols;
  ClassEmbeddingBank bank{{class_names.begin(), class_names.end()},
                          Matrix(per_class.size(), d)};
  for (std::size_t c = 0; c < per_class.size(); ++c) {
    if (per_class[c].cols != d) {
      throw ValidationError("text embedding width differs for class " +
                            class_names[c]);
    }
    const std::vector<float> e = AggregateClassEmbedding(per_class[c]);
    std::copy(e.begin(), e.end(), bank.embeddings.Row(c).begin());
  }
  return bank;
}

std::vector<std::string> LoadTemplates(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open templates: " + path.string());
  std::vector<std::string> out;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.find("{}") == std::string::npos) {
      throw ValidationError("template without {} placeholder: " + line);
    }
    out.push_back(line);
  }
  return out;
}

std::filesystem::path DefaultTemplatesPath() {
  return std::filesystem::path(STITCHSEG_DATA_DIR) / "imagenet_templates.txt";
}

std::vector<std::string> InstantiateTemplates(
    std::span<const std::string> templates, const std::string& class_name) {
  std::vector<std::string> out;
  out.reserve(templates.size());
  for (const std::string& t : templates) {
    std::string s = t;
    const auto pos = s.find("{}");
    if (pos != std::string::npos) s.replace(pos, 2, class_name);
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<std::string> LoadBiasedPhrases(const std::filesystem::path& dir,
                                           const std::string& class_name) {
  std::ifstream in(dir / (class_name + ".txt"));
  std::vector<std::string> out;
  if (!in) return out;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

PromptSet BuildPromptSet(const std::string& class_name,
                         std::span<const std::string> templates,
                         std::span<const std::string> biased_phrases) {
  PromptSet set{class_name, InstantiateTemplates(templates, class_name)};
  set.prompts.insert(set.prompts.end(), biased_phrases.begin(),
                     biased_phrases.end());
  if (set.prompts.empty()) {
    throw ValidationError("no prompts for class " + class_name);
  }
  return set;
}

}  // namespace stitchseg
