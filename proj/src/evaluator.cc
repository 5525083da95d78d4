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

#include "stitchseg/evaluator.h"

#include <iomanip>
#include <numeric>
#include <sstream>

#include "stitchseg/errors.h"

namespace stitchseg {

ConfusionMatrix::ConfusionMatrix(std::size_t num_classes)
    : num_classes_(num_classes), counts_(num_classes * num_classes, 0) {
  if (num_classes == 0 || num_classes > kMaxClasses) {
    throw ValidationError("num_classes must be in [1, 255]");
  }
}

std::uint64_t ConfusionMatrix::Total() const {
  return std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0});
}

void ConfusionMatrix::Accumulate(const LabelMap& pred, const LabelMap& gt) {
  if (pred.h != gt.h || pred.w != gt.w) {
    throw ValidationError("prediction and ground truth sizes differ");
  }
  // Validate first so a bad map leaves the matrix untouched.
  for (std::size_t i = 0; i < pred.labels.size(); ++i) {
    const std::uint8_t p = pred.labels[i], g = gt.labels[i];
    if (p == kIgnoreLabel) {
      throw ValidationError("prediction contains the ignore label");
    }
    if (p >= num_classes_) throw ValidationError("prediction label out of range");
    if (g != kIgnoreLabel && g >= num_classes_) {
      throw ValidationError("ground-truth label out of range");
    }
  }
  for (std::size_t i = 0; i < pred.labels.size(); ++i) {
    const std::uint8_t g = gt.labels[i];
    if (g == kIgnoreLabel) continue;
    ++counts_[g * num_classes_ + pred.labels[i]];
  }
}

void ConfusionMatrix::Merge(const ConfusionMatrix& other) {
  if (other.num_classes_ != num_classes_) {
    throw ValidationError("cannot merge confusion matrices of different sizes");
  }
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
}

ConfusionMatrix Accumulate(ConfusionMatrix cm, const LabelMap& pred,
                           const LabelMap& gt) {
  cm.Accumulate(pred, gt);
  return cm;
}

EvalResult ComputeMIoU(const ConfusionMatrix& cm) {
  const std::size_t n = cm.num_classes();
  EvalResult result;
  result.per_class_iou.resize(n);
  result.pixels_scored = cm.Total();
  double sum = 0.0;
  std::size_t scored = 0;
  for (std::size_t c = 0; c < n; ++c) {
    std::uint64_t row = 0, col = 0;
    for (std::size_t k = 0; k < n; ++k) {
      row += cm.at(c, k);
      col += cm.at(k, c);
    }
    const std::uint64_t tp = cm.at(c, c);
    const std::uint64_t denom = row + col - tp;
    if (denom == 0) continue;
    const double iou = static_cast<double>(tp) / static_cast<double>(denom);
    result.per_class_iou[c] = iou;
    sum += iou;
    ++scored;
  }
  if (scored == 0) throw ValidationError("no scorable classes");
  result.miou = sum / static_cast<double>(scored);
  return result;
}

namespace {

std::string ClassName(std::span<const std::string> names, std::size_t c) {
  return c < names.size() ? names[c] : "class_" + std::to_string(c);
}

}  // namespace

nlohmann::json EvalReportJson(const EvalResult& result,
                              std::span<const std::string> class_names) {
  nlohmann::json j;
  j["per_class"] = nlohmann::json::array();
  for (std::size_t c = 0; c < result.per_class_iou.size(); ++c) {
    nlohmann::json entry{{"name", ClassName(class_names, c)}};
    if (result.per_class_iou[c]) {
      entry["iou"] = *result.per_class_iou[c];
    } else {
      entry["iou"] = nullptr;
    }
    j["per_class"].push_back(entry);
  }
  j["miou"] = result.miou;
  j["pixels_scored"] = result.pixels_scored;
  return j;
}

std::string EvalReportCsv(const EvalResult& result,
                          std::span<const std::string> class_names) {
  std::ostringstream out;
  out << std::setprecision(10);
  out << "name,iou\n";
  for (std::size_t c = 0; c < result.per_class_iou.size(); ++c) {
    out << ClassName(class_names, c) << ",";
    if (result.per_class_iou[c]) out << *result.per_class_iou[c];
    out << "\n";
  }
  out << "miou," << result.miou << "\n";
  out << "pixels_scored," << result.pixels_scored << "\n";
  return out.str();
}

}  // namespace stitchseg
