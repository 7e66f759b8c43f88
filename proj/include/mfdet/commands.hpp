#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "mfdet/checkpoint.hpp"
#include "mfdet/introspect.hpp"
#include "mfdet/metrics.hpp"
#include "mfdet/surgery.hpp"
#include "mfdet/training.hpp"

namespace mfdet {

struct GenerateOptions {
  std::string preset = "mixed";
  std::uint64_t seed = 0;
  std::size_t sequences = 10;
  std::size_t frames = 24;
  std::size_t size = 64;
  double fps = 20.0;
  std::filesystem::path output;
};

void cmd_generate(const GenerateOptions& options, std::ostream& out);

/// Writes <output_dir>/best.ckpt (whenever validation mAP@0.5 improves),
/// <output_dir>/last.ckpt and <output_dir>/train_log.csv.
TrainResult cmd_train(const RunConfig& config, std::ostream& out);

struct SurgeryOptions {
  std::filesystem::path input;
  std::filesystem::path output;
  FusionKind mode = FusionKind::EarlyFusion;
  std::size_t frames = 3;
  std::size_t trials = 20;
  float tolerance = 1e-4f;
  std::uint64_t seed = 0;
  bool force = false;
};

/// Returns the verification report; throws ConfigError when verification
/// fails and `force` is not set (nothing is written in that case).
EquivalenceReport cmd_surgery(const SurgeryOptions& options, std::ostream& out);

struct EvalCommandOptions {
  std::filesystem::path checkpoint;  // may contain "{n}" when sweeping
  std::filesystem::path dataset_root;
  std::optional<SamplingSpec> sampling;  // default: the checkpoint's training sampling, else adjacent(n)
  std::string split = "test";            // train | val | test | all
  double val_fraction = 0.2;
  double test_fraction = 0.2;
  EvalOptions eval;
  std::vector<std::size_t> sweep;  // frame counts substituted for {n}
  std::size_t bench_runs = 0;      // latency runs per row (0 = skip)
  std::filesystem::path csv;       // optional report file
  /// Test hook: replaces model inference for every row when set.
  Predictor oracle;
};

std::vector<std::pair<std::string, EvalReport>> cmd_eval(const EvalCommandOptions& options, std::ostream& out);

struct FrameSelection {
  std::filesystem::path checkpoint;
  std::filesystem::path dataset_root;
  std::size_t sequence = 0;  // index into the dataset's sequences
  std::size_t frame = 0;     // target frame t
  std::optional<SamplingSpec> sampling;
  std::filesystem::path output;
};

/// Draws the post-NMS detections on the target frame and writes a PPM.
std::vector<Detection> cmd_predict(const FrameSelection& selection, const EvalOptions& options, std::ostream& out);

/// Writes the Grad-CAM++ overlay of the target frame.
Heatmap cmd_cam(const FrameSelection& selection, float conf_threshold, std::ostream& out);

struct FlopsOptions {
  std::filesystem::path checkpoint;  // when empty the rows come from `modes`
  std::vector<FusionMode> modes = {FusionMode::single()};
  std::size_t input_size = 640;
  std::size_t base_width = 32;
  std::size_t num_classes = 1;
};

struct FlopsRow {
  std::string name;
  std::uint64_t params = 0;
  std::uint64_t flops = 0;
  std::int64_t params_delta = 0;  // relative to the single-frame model of the same width
  std::int64_t flops_delta = 0;
};

std::vector<FlopsRow> cmd_flops(const FlopsOptions& options, std::ostream& out);

struct BenchOptions {
  std::vector<FusionMode> modes = {FusionMode::single()};
  std::size_t input_size = 640;
  std::size_t base_width = 32;
  std::size_t warmup = 5;
  std::size_t runs = 30;
  std::uint64_t seed = 0;
};

std::vector<std::pair<std::string, LatencyStats>> cmd_bench(const BenchOptions& options, std::ostream& out);

/// Comma-separated list of fusion modes ("single,early:3,grouped:3").
std::vector<FusionMode> parse_mode_list(const std::string& text);
std::vector<std::size_t> parse_size_list(const std::string& text);

}  // namespace mfdet
