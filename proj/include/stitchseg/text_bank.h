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

#ifndef STITCHSEG_TEXT_BANK_H_
#define STITCHSEG_TEXT_BANK_H_

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "stitchseg/token_grid.h"

namespace stitchseg {

// Prompts for one class: instantiated templates followed by class-biased
// phrases.
struct PromptSet {
  std::string class_name;
  std::vector<std::string> prompts;
};

// One unit-norm text embedding per class, rows in class_names order.
struct ClassEmbeddingBank {
  std::vector<std::string> class_names;
  Matrix embeddings;

  std::size_t NumClasses() const { return embeddings.rows; }
  std::size_t Dim() const { return embeddings.cols; }
};

inline constexpr double kDegenerateMeanNorm = 1e-8;

// normalize(mean_p(normalize(row_p))). Throws ValidationError for an empty
// set or a zero row, NumericalError("degenerate prompt set") when the mean
// has norm below kDegenerateMeanNorm.
std::vector<float> AggregateClassEmbedding(const Matrix& per_prompt);

// Aggregates each class matrix in order. Throws ValidationError when the
// class counts disagree.
ClassEmbeddingBank BuildBank(std::span<const std::string> class_names,
                             std::span<const Matrix> per_class);

// Template strings use "{}" as the class-name placeholder.
std::vector<std::string> LoadTemplates(const std::filesystem::path& path);
std::filesystem::path DefaultTemplatesPath();
std::vector<std::string> InstantiateTemplates(
    std::span<const std::string> templates, const std::string& class_name);

// Reads <dir>/<class_name>.txt, one phrase per line; blank lines skipped.
// A missing file yields no phrases.
std::vector<std::string> LoadBiasedPhrases(const std::filesystem::path& dir,
                                           const std::string& class_name);

PromptSet BuildPromptSet(const std::string& class_name,
                         std::span<const std::string> templates,
                         std::span<const std::string> biased_phrases);

}  // namespace stitchseg

#endif  // STITCHSEG_TEXT_BANK_H_
