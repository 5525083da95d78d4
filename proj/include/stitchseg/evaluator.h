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

#ifndef STITCHSEG_EVALUATOR_H_
#define STITCHSEG_EVALUATOR_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "stitchseg/seg_head.h"

namespace stitchseg {

// Rows are ground truth, columns are predictions.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t num_classes);

  std::size_t num_classes() const { return num_classes_; }
  std::uint64_t at(std::size_t gt, std::size_t pred) const {
    return counts_[gt * num_classes_ + pred];
  }
  std::uint64_t Total() const;

  // Pixels whose ground truth is kIgnoreLabel are skipped. Throws
  // ValidationError on a shape mismatch, an ignore label in `pred`, or any
  // label outside [0, num_classes).
  void Accumulate(const LabelMap& pred, const LabelMap& gt);
  void Merge(const ConfusionMatrix& other);

  friend bool operator==(const ConfusionMatrix&,
                         const ConfusionMatrix&) = default;

 private:
  std::size_t num_classes_;
  std::vector<std::uint64_t> counts_;
};

// Pure form of ConfusionMatrix::Accumulate.
ConfusionMatrix Accumulate(ConfusionMatrix cm, const LabelMap& pred,
                           const LabelMap& gt);

struct EvalResult {
  // nullopt for classes absent from both ground truth and prediction.
  std::vector<std::optional<double>> per_class_iou;
  double miou = 0.0;
  std::uint64_t pixels_scored = 0;
};

// Throws ValidationError("no scorable classes") when every class has a zero
// denominator.
EvalResult ComputeMIoU(const ConfusionMatrix& cm);

// {"per_class": [{"name", "iou"}], "miou", "pixels_scored"}; iou is null for
// classes that were not scored.
nlohmann::json EvalReportJson(const EvalResult& result,
                              std::span<const std::string> class_names);
std::string EvalReportCsv(const EvalResult& result,
                          std::span<const std::string> class_names);

}  // namespace stitchseg

#endif  // STITCHSEG_EVALUATOR_H_
