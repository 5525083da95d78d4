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

#ifndef STITCHSEG_TOOLS_COMMANDS_H_
#define STITCHSEG_TOOLS_COMMANDS_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace stitchseg::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitNumerical = 3;

inline constexpr int kRunReportSchemaVersion = 1;

struct RunOptions {
  std::filesystem::path bundle;
  std::filesystem::path out;
  double tau = 0.0;
  double lambda = 1.0;
  std::size_t block = 128;
  bool streaming = true;
  bool postprocess = true;
  // "project" or "files".
  std::string qkv_source = "project";
  // "stitch" or "baseline".
  std::string mode = "stitch";
  bool save_logits = false;
  // "json", or "json+csv" to also write eval.csv when ground truth exists.
  std::string report_format = "json";
  // Overrides are checked against the bundle geometry.
  std::optional<std::size_t> shorter_side;
  std::optional<std::size_t> window;
  std::optional<std::size_t> stride;
};

struct EvalOptions {
  // A run output directory (uses pred.pgm and legend.json) or a .pgm file.
  std::filesystem::path pred;
  // Ground-truth label map, .pgm or u8 [H, W] .stsr.
  std::filesystem::path gt;
  std::optional<std::filesystem::path> out;
  std::optional<std::filesystem::path> csv;
  // 0 infers the count from the legend or the labels.
  std::size_t num_classes = 0;
};

struct SynthOptions {
  std::uint64_t seed = 0;
  std::size_t size = 448;
  // 0 makes the image square.
  std::size_t width = 0;
  std::size_t classes = 4;
  double sigma = 0.0;
  std::filesystem::path out;
  std::size_t window = 336;
  std::size_t stride = 112;
  std::size_t patch = 16;
  std::size_t dim = 32;
  std::size_t prompts = 8;
  std::size_t splits = 0;
  double prompt_jitter = 0.0;
};

struct BenchOptions {
  std::vector<std::size_t> sizes = {336, 448, 560, 672};
  std::size_t patch = 16;
  std::size_t dim = 64;
  std::size_t block = 128;
  std::size_t repeats = 3;
  std::uint64_t seed = 0;
  std::optional<std::filesystem::path> out;
};

struct InspectOptions {
  std::filesystem::path bundle;
};

// Each command prints its JSON report to `out` and returns an exit code.
// Library errors propagate as exceptions; Main maps them to exit codes.
int CmdRun(const RunOptions& options, std::ostream& out);
int CmdEval(const EvalOptions& options, std::ostream& out);
int CmdSynth(const SynthOptions& options, std::ostream& out);
int CmdBench(const BenchOptions& options, std::ostream& out);
int CmdInspect(const InspectOptions& options, std::ostream& out);

int Main(int argc, char** argv);

}  // namespace stitchseg::cli

#endif  // STITCHSEG_TOOLS_COMMANDS_H_
