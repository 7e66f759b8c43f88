#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mfdet/checkpoint.hpp"
#include "mfdet/dataset.hpp"
#include "mfdet/detector.hpp"
#include "mfdet/metrics.hpp"
#include "mfdet/sampling.hpp"

namespace mfdet {

struct RunConfig {
  std::filesystem::path dataset_root;
  std::filesystem::path output_dir = "run";
  SamplingSpec sampling = SamplingSpec::adjacent(1);
  FusionMode fusion = FusionMode::single();
  std::size_t epochs = 100;
  std::size_t batch_size = 8;
  float learning_rate = 0.01f;
  float lr_decay = 0.1f;
  float lr_decay_at = 0.8f;  // fraction of epochs after which lr *= lr_decay
  float momentum = 0.9f;
  float weight_decay = 5e-4f;
  std::uint64_t seed = 0;
  double val_fraction = 0.2;
  double test_fraction = 0.2;
  float conf_threshold = 0.25f;
  float nms_iou = 0.5f;
  bool augment = true;
  std::size_t base_width = 32;
  std::size_t num_anchors = 3;
  LossWeights loss_weights;
  /// Optional starting weights (e.g. a surgery output); must match fusion.
  std::filesystem::path init_checkpoint;
};

void validate(const RunConfig& config);

/// Learning rate in effect during `epoch` (1-based).
float learning_rate_at(const RunConfig& config, std::size_t epoch);

struct EpochLog {
  std::size_t epoch = 0;
  float learning_rate = 0;
  LossTerms loss;  // mean over batches
  EvalReport val;
};

std::string log_csv_header();
std::string log_csv_row(const EpochLog& row);

struct TrainResult {
  LayerStack best;
  std::size_t best_epoch = 0;
  double best_val_map50 = -1.0;
  LayerStack last;
  std::vector<EpochLog> log;
  SequenceSplit split;
};

/// Called after every epoch; `improved` is true when the epoch became the
/// new best (validation mAP@0.5 strictly higher than before).
using EpochCallback = std::function<void(const EpochLog&, const LayerStack&, bool improved)>;

/// Trains on the training split of `dataset`. Fails with DivergenceError
/// naming the epoch on a non-finite loss; earlier best results are already
/// reported through the callback by then.
TrainResult train(const RunConfig& config, const Dataset& dataset, const EpochCallback& on_epoch = {});

/// One optimisation step on a fixed batch; returns the loss before the update.
LossTerms train_step(LayerStack& model, SgdOptimizer& optimizer, const std::vector<const FrameStack*>& batch,
                     const LossWeights& weights = {});

/// Checkpoint metadata for a finished or in-progress run.
std::map<std::string, std::string> run_metadata(const RunConfig& config, std::size_t epoch, double best_val_map50);

}  // namespace mfdet
