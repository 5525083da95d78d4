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

#include "commands.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "stitchseg/attention.h"
#include "stitchseg/bundle.h"
#include "stitchseg/errors.h"
#include "stitchseg/evaluator.h"
#include "stitchseg/pipeline.h"
#include "stitchseg/seg_head.h"
#include "stitchseg/synth.h"
#include "stitchseg/tensor_store.h"
#include "stitchseg/window_planner.h"

namespace stitchseg::cli {
namespace {

using nlohmann::json;

void WriteJson(const json& j, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

void WriteText(const std::string& text, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << text;
}

// Overrides cannot re-extract features, so they must agree with the geometry
// the bundle was extracted at.
void CheckOverrides(const RunOptions& o, const BundleManifest& m) {
  const std::size_t window = o.window.value_or(m.window);
  const std::size_t stride = o.stride.value_or(m.stride);
  if (window % m.patch != 0) {
    throw ValidationError("--window: " + std::to_string(window) +
                          " is not a multiple of patch " +
                          std::to_string(m.patch));
  }
  if (stride == 0 || stride % m.patch != 0) {
    throw ValidationError("--stride: " + std::to_string(stride) +
                          " is misaligned with patch " +
                          std::to_string(m.patch));
  }
  if (window != m.window) {
    throw ValidationError("--window: bundle was extracted with window " +
                          std::to_string(m.window));
  }
  const CropPlan plan = PlanWindows(m.image_h, m.image_w, window, stride);
  std::set<PixelOffset> planned(plan.offsets.begin(), plan.offsets.end());
  std::set<PixelOffset> actual;
  for (const CropEntry& c : m.crops) actual.insert(c.offset);
  if (planned != actual) {
    throw ValidationError("--stride: plan with stride " +
                          std::to_string(stride) +
                          " does not match the bundle crops");
  }
  if (o.shorter_side) {
    ResizeSpec spec;
    spec.shorter_side_target = *o.shorter_side;
    spec.patch = m.patch;
    spec.window = window;
    const auto dims = ResizeDims(m.image_h, m.image_w, spec);
    if (dims.first != m.image_h || dims.second != m.image_w) {
      throw ValidationError(
          "--shorter-side: bundle image is " + std::to_string(m.image_h) +
          "x" + std::to_string(m.image_w) + ", not shorter side " +
          std::to_string(*o.shorter_side));
    }
  }
}

json TimingsJson(const std::vector<StageTiming>& timings) {
  json arr = json::array();
  for (const StageTiming& t : timings) {
    arr.push_back({{"stage", t.stage}, {"ms", t.ms}});
  }
  return arr;
}

LabelMap ReadLabelFile(const std::filesystem::path& path) {
  if (path.extension() == ".pgm") return ReadPgm(path);
  const Tensor t = ReadTensor(path);
  if (t.dtype != DType::kU8 || t.dims.size() != 2) {
    throw ValidationError(path.string() + ": expected u8 [H, W]");
  }
  LabelMap m(t.dims[0], t.dims[1]);
  m.labels = t.ToU8();
  return m;
}

double Median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

Matrix RandomMatrix(std::size_t rows, std::size_t cols, std::uint64_t seed,
                    std::uint64_t stream) {
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < m.data.size(); ++i) {
    m.data[i] = static_cast<float>(GaussianAt(seed, stream, i));
  }
  return m;
}

template <typename F>
double TimeMs(F&& f) {
  const auto start = std::chrono::steady_clock::now();
  f();
  return std::chrono::duration<double, std::milli>(
             std::chrono::steady_clock::now() - start)
      .count();
}

}  // namespace

int CmdRun(const RunOptions& o, std::ostream& out) {
  if (o.mode != "stitch" && o.mode != "baseline") {
    throw ValidationError("--mode: expected stitch or baseline");
  }
  if (o.qkv_source != "project" && o.qkv_source != "files") {
    throw ValidationError("--qkv-source: expected project or files");
  }
  if (o.report_format != "json" && o.report_format != "json+csv") {
    throw ValidationError("--report-format: expected json or json+csv");
  }
  if (o.block == 0) throw ValidationError("--block: must be >= 1");

  const Bundle bundle = LoadBundle(o.bundle);
  CheckOverrides(o, bundle.manifest);
  const PipelineInputs inputs = InputsFromBundle(bundle);

  PipelineConfig config;
  config.attention.tau = o.tau;
  config.attention.lambda = o.lambda;
  config.attention.block = o.block;
  config.attention.streaming = o.streaming;
  config.postprocess = o.postprocess;
  config.qkv_source =
      o.qkv_source == "files" ? QkvSource::kFiles : QkvSource::kProject;

  const PipelineResult result = o.mode == "stitch"
                                    ? RunStitchPipeline(inputs, config)
                                    : RunBaselinePipeline(inputs, config);

  std::filesystem::create_directories(o.out);
  WritePgm(result.final, o.out / "pred.pgm");
  WritePgm(result.raw, o.out / "pred_raw.pgm");
  WriteLegend(bundle.manifest.class_names, o.out / "legend.json");
  if (o.save_logits) {
    const LogitMap& l = result.token_logits;
    WriteTensor(Tensor::FromF32({l.classes, l.h, l.w}, l.data),
                o.out / "logits.stsr");
  }

  json report;
  report["schema_version"] = kRunReportSchemaVersion;
  report["mode"] = o.mode;
  report["crop_count"] = result.crop_count;
  report["token_count"] = result.token_count;
  report["image"] = {{"h", inputs.image_h}, {"w", inputs.image_w}};
  report["attention"] = {
      {"tau", ResolveTau(config.attention, bundle.manifest.d)},
      {"lambda", o.lambda},
      {"block", o.block},
      {"streaming", o.streaming},
      {"score_buffer_bytes", result.attention_stats.score_buffer_bytes}};
  report["postprocess"] = o.postprocess;
  report["qkv_source"] = o.qkv_source;
  report["timings_ms"] = TimingsJson(result.timings);
  report["warnings"] = result.warnings;
  if (bundle.gt) {
    const std::size_t c = bundle.manifest.class_names.size();
    ConfusionMatrix cm_final(c), cm_raw(c);
    cm_final.Accumulate(result.final, *bundle.gt);
    cm_raw.Accumulate(result.raw, *bundle.gt);
    const EvalResult final_eval = ComputeMIoU(cm_final);
    report["eval"] =
        EvalReportJson(final_eval, bundle.manifest.class_names);
    report["eval_raw"] =
        EvalReportJson(ComputeMIoU(cm_raw), bundle.manifest.class_names);
    if (o.report_format == "json+csv") {
      WriteText(EvalReportCsv(final_eval, bundle.manifest.class_names),
                o.out / "eval.csv");
    }
  } else {
    report["eval"] = nullptr;
  }
  WriteJson(report, o.out / "run_report.json");
  out << report.dump(2) << "\n";
  return kExitOk;
}

int CmdEval(const EvalOptions& o, std::ostream& out) {
  std::filesystem::path pred_path = o.pred;
  std::vector<std::string> names;
  if (std::filesystem::is_directory(o.pred)) {
    pred_path = o.pred / "pred.pgm";
    if (std::filesystem::exists(o.pred / "legend.json")) {
      names = ReadLegend(o.pred / "legend.json");
    }
  }
  const LabelMap pred = ReadLabelFile(pred_path);
  const LabelMap gt = ReadLabelFile(o.gt);
  if (pred.h != gt.h || pred.w != gt.w) {
    throw ValidationError("shape mismatch: prediction " +
                          std::to_string(pred.h) + "x" +
                          std::to_string(pred.w) + ", ground truth " +
                          std::to_string(gt.h) + "x" + std::to_string(gt.w));
  }
  std::size_t classes = o.num_classes;
  if (classes == 0) classes = names.size();
  if (classes == 0) {
    std::uint8_t max_label = 0;
    for (std::uint8_t v : pred.labels) max_label = std::max(max_label, v);
    for (std::uint8_t v : gt.labels) {
      if (v != kIgnoreLabel) max_label = std::max(max_label, v);
    }
    classes = static_cast<std::size_t>(max_label) + 1;
  }
  if (classes > kMaxClasses) throw ValidationError("too many classes");
  if (names.size() != classes) {
    names.clear();
    for (std::size_t c = 0; c < classes; ++c) {
      names.push_back("class_" + std::to_string(c));
    }
  }
  ConfusionMatrix cm(classes);
  cm.Accumulate(pred, gt);
  const EvalResult result = ComputeMIoU(cm);
  const json report = EvalReportJson(result, names);
  if (o.out) WriteJson(report, *o.out);
  if (o.csv) WriteText(EvalReportCsv(result, names), *o.csv);
  out << report.dump(2) << "\n";
  return kExitOk;
}

int CmdSynth(const SynthOptions& o, std::ostream& out) {
  SceneParams params;
  params.seed = o.seed;
  params.h = o.size;
  params.w = o.width == 0 ? o.size : o.width;
  params.patch = o.patch;
  params.num_classes = o.classes;
  params.dim = o.dim;
  params.noise_sigma = o.sigma;
  params.splits = o.splits;
  SynthConfig config;
  config.window = o.window;
  config.stride = o.stride;
  config.prompts_per_class = o.prompts;
  config.prompt_jitter = o.prompt_jitter;

  const SyntheticScene scene = GenScene(params);
  const Bundle bundle = MakeSynthBundle(scene, config);
  WriteBundle(bundle, o.out);
  // Round-trip through the loader so a written bundle is always valid.
  const Bundle loaded = LoadBundle(o.out);

  const json report = {{"out", o.out.string()},
                       {"image_h", params.h},
                       {"image_w", params.w},
                       {"crops", loaded.crops.size()},
                       {"regions", scene.regions.size()},
                       {"classes", loaded.manifest.class_names}};
  out << report.dump(2) << "\n";
  return kExitOk;
}

int CmdBench(const BenchOptions& o, std::ostream& out) {
  if (o.sizes.empty()) throw ValidationError("--sizes: empty");
  if (o.patch == 0 || o.dim == 0 || o.block == 0 || o.repeats == 0) {
    throw ValidationError("--patch, --dim, --block and --repeats must be >= 1");
  }
  json rows = json::array();
  bool ok = true;
  for (std::size_t size : o.sizes) {
    if (size == 0 || size % o.patch != 0) {
      throw ValidationError("--sizes: " + std::to_string(size) +
                            " is not a positive multiple of patch");
    }
    const std::size_t side = size / o.patch;
    const std::size_t n = side * side;
    const QKVGlobal qkv{RandomMatrix(n, o.dim, o.seed + size, 0),
                        RandomMatrix(n, o.dim, o.seed + size, 1),
                        RandomMatrix(n, o.dim, o.seed + size, 2)};
    const double tau = std::sqrt(static_cast<double>(o.dim));

    std::vector<double> naive_ms, stream_ms;
    Matrix naive, streamed;
    AttentionStats naive_stats, stream_stats;
    for (std::size_t r = 0; r < o.repeats; ++r) {
      naive_ms.push_back(
          TimeMs([&] { naive = GlobalAttention(qkv, tau, &naive_stats); }));
      stream_ms.push_back(TimeMs([&] {
        streamed = StreamingAttention(qkv, tau, o.block, &stream_stats);
      }));
    }
    double max_diff = 0.0;
    for (std::size_t i = 0; i < naive.data.size(); ++i) {
      max_diff = std::max(
          max_diff, static_cast<double>(std::abs(naive.data[i] - streamed.data[i])));
    }
    const double ratio = static_cast<double>(stream_stats.score_buffer_bytes) /
                         static_cast<double>(naive_stats.score_buffer_bytes);
    const bool equal = max_diff <= 1e-5;
    const bool smaller =
        n <= o.block ||
        stream_stats.score_buffer_bytes < naive_stats.score_buffer_bytes;
    ok = ok && equal && smaller;
    rows.push_back({{"size", size},
                    {"tokens", n},
                    {"naive_ms", Median(naive_ms)},
                    {"streaming_ms", Median(stream_ms)},
                    {"naive_score_bytes", naive_stats.score_buffer_bytes},
                    {"streaming_score_bytes", stream_stats.score_buffer_bytes},
                    {"memory_ratio", ratio},
                    {"memory_reduction", 1.0 - ratio},
                    {"max_abs_diff", max_diff},
                    {"outputs_equal", equal},
                    {"streaming_smaller", smaller}});
  }
  const json report = {{"block", o.block},
                       {"dim", o.dim},
                       {"repeats", o.repeats},
                       {"results", rows},
                       {"checks_passed", ok}};
  if (o.out) WriteJson(report, *o.out);
  out << report.dump(2) << "\n";
  if (!ok) {
    std::cerr << "bench: streaming attention check failed\n";
    return kExitNumerical;
  }
  return kExitOk;
}

int CmdInspect(const InspectOptions& o, std::ostream& out) {
  const Bundle bundle = LoadBundle(o.bundle);
  const BundleManifest& m = bundle.manifest;

  const CropPlan plan = PlanWindows(m.image_h, m.image_w, m.window, m.stride);
  std::set<PixelOffset> planned(plan.offsets.begin(), plan.offsets.end());
  std::set<PixelOffset> actual;
  for (const CropEntry& c : m.crops) actual.insert(c.offset);
  const bool plan_matches = planned == actual;

  double qkv_diff = 0.0;
  for (const BundleCrop& c : bundle.crops) {
    const Matrix x = c.affinity_src.ToMatrix();
    const ProjectionSet& p = bundle.projection;
    const Matrix projected[3] = {Project(x, p.wq, p.bq), Project(x, p.wk, p.bk),
                                 Project(x, p.wv, p.bv)};
    const TokenGrid* stored[3] = {&c.q, &c.k, &c.v};
    for (int i = 0; i < 3; ++i) {
      for (std::size_t j = 0; j < projected[i].data.size(); ++j) {
        qkv_diff = std::max(qkv_diff, static_cast<double>(std::abs(
                                          projected[i].data[j] -
                                          stored[i]->data[j])));
      }
    }
  }

  json report = m.ToJson();
  report["summary"] = {
      {"crop_count", bundle.crops.size()},
      {"planned_crop_count", plan.offsets.size()},
      {"plan_matches", plan_matches},
      {"token_grid", {bundle.GlobalHp(), bundle.GlobalWp()}},
      {"value_dim", bundle.crops.front().value.d},
      {"text_dim", bundle.per_class_prompts.front().cols},
      {"mask_count", bundle.masks.masks.size()},
      {"has_gt", bundle.gt.has_value()},
      {"qkv_projection_max_abs_diff", qkv_diff}};
  out << report.dump(2) << "\n";
  if (!plan_matches) {
    std::cerr << "inspect: crop offsets do not match the window plan\n";
    return kExitValidation;
  }
  return kExitOk;
}

int Main(int argc, char** argv) {
  CLI::App app{"Sliding-window open-vocabulary segmentation engine"};
  app.require_subcommand(1);

  RunOptions run;
  auto* run_cmd = app.add_subcommand("run", "Segment a feature bundle");
  run_cmd->add_option("--bundle", run.bundle, "Bundle directory")->required();
  run_cmd->add_option("--out", run.out, "Output directory")->required();
  run_cmd->add_option("--tau", run.tau, "Attention temperature (<= 0: sqrt(d))");
  run_cmd->add_option("--lambda", run.lambda, "Affinity sharpening");
  run_cmd->add_option("--block", run.block, "Streaming attention tile size");
  run_cmd->add_flag("!--no-streaming", run.streaming,
                    "Materialize the full score matrix");
  run_cmd->add_flag("!--no-postprocess", run.postprocess,
                    "Skip the mask vote");
  run_cmd->add_option("--qkv-source", run.qkv_source, "project or files");
  run_cmd->add_option("--mode", run.mode, "stitch or baseline");
  run_cmd->add_flag("--save-logits", run.save_logits,
                    "Write token logits to logits.stsr");
  run_cmd->add_option("--report-format", run.report_format,
                      "json or json+csv");
  run_cmd->add_option("--shorter-side", run.shorter_side,
                      "Expected resize target of the shorter side");
  run_cmd->add_option("--window", run.window, "Expected crop size");
  run_cmd->add_option("--stride", run.stride, "Expected crop stride");

  EvalOptions eval;
  std::string eval_out, eval_csv;
  auto* eval_cmd = app.add_subcommand("eval", "Score a prediction");
  eval_cmd->add_option("--pred", eval.pred, "Run directory or .pgm")
      ->required();
  eval_cmd->add_option("--gt", eval.gt, "Ground truth .pgm or .stsr")
      ->required();
  eval_cmd->add_option("--out", eval_out, "Write the JSON report here");
  eval_cmd->add_option("--csv", eval_csv, "Write a CSV report here");
  eval_cmd->add_option("--num-classes", eval.num_classes, "Class count");

  SynthOptions synth;
  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic bundle");
  synth_cmd->add_option("--seed", synth.seed);
  synth_cmd->add_option("--size", synth.size, "Image height (and width)");
  synth_cmd->add_option("--width", synth.width, "Image width override");
  synth_cmd->add_option("--classes", synth.classes);
  synth_cmd->add_option("--sigma", synth.sigma, "Feature noise std-dev");
  synth_cmd->add_option("--out", synth.out, "Bundle directory")->required();
  synth_cmd->add_option("--window", synth.window);
  synth_cmd->add_option("--stride", synth.stride);
  synth_cmd->add_option("--patch", synth.patch);
  synth_cmd->add_option("--dim", synth.dim);
  synth_cmd->add_option("--prompts", synth.prompts, "Prompts per class");
  synth_cmd->add_option("--splits", synth.splits, "0 picks 3..7");
  synth_cmd->add_option("--prompt-jitter", synth.prompt_jitter);

  BenchOptions bench;
  std::string bench_out;
  auto* bench_cmd =
      app.add_subcommand("bench", "Naive vs streaming attention");
  bench_cmd->add_option("--sizes", bench.sizes, "Square image sizes")
      ->delimiter(',');
  bench_cmd->add_option("--patch", bench.patch);
  bench_cmd->add_option("--dim", bench.dim);
  bench_cmd->add_option("--block", bench.block);
  bench_cmd->add_option("--repeats", bench.repeats);
  bench_cmd->add_option("--seed", bench.seed);
  bench_cmd->add_option("--out", bench_out, "Write the JSON report here");

  InspectOptions inspect;
  auto* inspect_cmd = app.add_subcommand("inspect", "Validate a bundle");
  inspect_cmd->add_option("--bundle", inspect.bundle)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (*run_cmd) return CmdRun(run, std::cout);
    if (*eval_cmd) {
      if (!eval_out.empty()) eval.out = eval_out;
      if (!eval_csv.empty()) eval.csv = eval_csv;
      return CmdEval(eval, std::cout);
    }
    if (*synth_cmd) return CmdSynth(synth, std::cout);
    if (*bench_cmd) {
      if (!bench_out.empty()) bench.out = bench_out;
      return CmdBench(bench, std::cout);
    }
    if (*inspect_cmd) return CmdInspect(inspect, std::cout);
  } catch (const NumericalError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  return kExitValidation;
}

}  // namespace stitchseg::cli
