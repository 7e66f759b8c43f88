#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "mfdet/box.hpp"
#include "mfdet/detector.hpp"
#include "mfdet/sampling.hpp"

namespace mfdet {

/// 0.50, 0.55, ..., 0.95
const std::vector<double>& coco_iou_thresholds();

/// Greedy matching of one image's predictions against its ground truth.
struct MatchResult {
  std::vector<std::size_t> order;              // prediction indices by descending confidence
  std::vector<std::vector<bool>> tp;           // [threshold][prediction index]
  std::vector<std::size_t> unmatched_gt;       // per threshold
};

/// Predictions are visited by descending confidence (ties: lower index). A
/// prediction is a true positive at threshold t when its best-IoU unmatched
/// ground truth of the same class has IoU >= t; that ground truth is then
/// consumed.
MatchResult match_detections(const std::vector<Detection>& preds, const std::vector<BoxLabel>& gts,
                             const std::vector<double>& thresholds);

/// One scored prediction in a dataset-wide ranking.
struct RankedMatch {
  float confidence = 0;
  bool tp = false;
};

/// COCO 101-point interpolated AP. `ranked` must already be in ranking order.
/// num_gt == 0 yields 0 when there are predictions and 1 otherwise.
double average_precision(const std::vector<RankedMatch>& ranked, std::size_t num_gt);

struct LatencyStats {
  double mean_ms = 0, median_ms = 0, p95_ms = 0;
  std::size_t runs = 0;
  std::size_t warmup_runs = 0;
  std::vector<double> samples_ms;
};

struct EvalReport {
  double precision = 0;
  double recall = 0;
  double map50 = 0;
  double map5095 = 0;
  std::map<int, std::array<double, 10>> per_class_ap;
  std::size_t images = 0;
  std::size_t ground_truth = 0;
  std::uint64_t params = 0;
  std::uint64_t flops = 0;
  LatencyStats latency;
};

struct EvalOptions {
  float conf_threshold = 0.25f;  // operating point for P and R
  float nms_iou = 0.5f;
  float min_confidence = 0.001f; // decode floor for the AP ranking
};

/// Scores per-image predictions against ground truth. P and R use
/// predictions with confidence >= conf_threshold at IoU 0.5. mAP averages
/// over classes that have ground truth or predictions (1.0 when neither
/// exists anywhere).
EvalReport evaluate_detections(const std::vector<std::vector<Detection>>& preds,
                               const std::vector<std::vector<BoxLabel>>& gts, float conf_threshold);

using Predictor = std::function<std::vector<Detection>(const FrameStack&)>;

/// decode + NMS of the model's head for one stack.
std::vector<Detection> predict(const LayerStack& model, const FrameStack& stack, const EvalOptions& options);

/// Runs `predictor` over every stack and scores the result.
EvalReport evaluate(const Predictor& predictor, const std::vector<FrameStack>& stacks, const EvalOptions& options);

/// Model evaluation; throws ShapeError when the stacks' channel count does
/// not match the model's fusion mode. Batches forward passes internally.
EvalReport evaluate(const LayerStack& model, const std::vector<FrameStack>& stacks, const EvalOptions& options);

/// Sum over layers of Cout (Cin/groups) kh kw + Cout.
std::uint64_t count_params(const LayerStack& model);
std::uint64_t count_params(const std::vector<ConvSpec>& specs);

/// Sum over conv layers of 2 Hout Wout Cout (Cin/groups) kh kw + Hout Wout Cout
/// (bias) for a square input of `input_size`.
std::uint64_t count_flops(const LayerStack& model, std::size_t input_size);
std::uint64_t count_flops(const std::vector<ConvSpec>& specs, std::size_t input_size);

/// Wall-clock forward latency on a deterministic input after `warmup`
/// untimed runs.
LatencyStats time_inference(const LayerStack& model, const Shape& input_shape, std::size_t warmup, std::size_t runs);

std::string csv_header();
std::string csv_row(const std::string& name, const EvalReport& report);
std::string format_table(const std::vector<std::pair<std::string, EvalReport>>& rows);

}  // namespace mfdet
