#include "mfdet/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>

#include "mfdet/error.hpp"

namespace mfdet {

void validate(const RunConfig& c) {
  if (c.epochs < 1) throw ConfigError("epochs must be at least 1");
  if (c.batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (!(c.learning_rate > 0)) throw ConfigError("learning_rate must be positive");
  if (!(c.val_fraction > 0 && c.val_fraction < 1)) throw ConfigError("val_fraction must lie in (0, 1)");
  if (!(c.test_fraction >= 0 && c.test_fraction < 1)) throw ConfigError("test_fraction must lie in [0, 1)");
  if (c.val_fraction + c.test_fraction >= 1) throw ConfigError("val_fraction + test_fraction must be below 1");
  if (!(c.lr_decay_at > 0 && c.lr_decay_at <= 1)) throw ConfigError("lr_decay_at must lie in (0, 1]");
  const std::size_t n = resolve_offsets(c.sampling).size();
  if (n != c.fusion.frames)
    throw ConfigError("sampling " + to_string(c.sampling) + " yields " + std::to_string(n) +
                      " frames but fusion mode " + to_string(c.fusion) + " expects " + std::to_string(c.fusion.frames));
  if (c.num_anchors < 1) throw ConfigError("num_anchors must be at least 1");
}

float learning_rate_at(const RunConfig& c, std::size_t epoch) {
  const auto boundary = static_cast<std::size_t>(std::floor(c.lr_decay_at * static_cast<double>(c.epochs)));
  return epoch > boundary ? c.learning_rate * c.lr_decay : c.learning_rate;
}

std::string log_csv_header() {
  return "epoch,lr,loss,loss_obj,loss_cls,loss_box,val_precision,val_recall,val_map50,val_map5095";
}

std::string log_csv_row(const EpochLog& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%zu,%.6g,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f", r.epoch,
                static_cast<double>(r.learning_rate), r.loss.total, r.loss.objectness, r.loss.classification,
                r.loss.box, r.val.precision, r.val.recall, r.val.map50, r.val.map5095);
  return buf;
}

std::map<std::string, std::string> run_metadata(const RunConfig& c, std::size_t epoch, double best) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", best);
  return {{"train.epoch", std::to_string(epoch)},
          {"train.best_val_map50", buf},
          {"train.sampling", to_string(c.sampling)},
          {"train.seed", std::to_string(c.seed)}};
}

LossTerms train_step(LayerStack& model, SgdOptimizer& optimizer, const std::vector<const FrameStack*>& batch,
                     const LossWeights& weights) {
  const Tensor input = stacks_to_tensor(batch);
  std::vector<std::vector<BoxLabel>> labels;
  labels.reserve(batch.size());
  for (const auto* s : batch) labels.push_back(s->labels);
  const ForwardTrace trace = forward_trace(model, input);
  const Targets targets = assign_targets(labels, model.config);
  Tensor grad_head;
  const LossTerms loss = detection_loss(trace.head(), targets, model.config, weights, &grad_head);
  backward(model, trace, grad_head, false);
  const auto params = model.parameters();
  optimizer.step(params);
  return loss;
}

namespace {

std::vector<std::pair<float, float>> label_sizes(const std::vector<FrameStack>& stacks) {
  std::vector<std::pair<float, float>> sizes;
  for (const auto& s : stacks)
    for (const auto& l : s.labels) sizes.emplace_back(l.box.w, l.box.h);
  return sizes;
}

std::size_t max_class(const Dataset& dataset) {
  int top = 0;
  for (const auto& seq : dataset.sequences)
    for (const auto& frame : seq.labels)
      if (frame)
        for (const auto& l : *frame) top = std::max(top, l.class_id);
  return static_cast<std::size_t>(top) + 1;
}

}  // namespace

TrainResult train(const RunConfig& config, const Dataset& dataset, const EpochCallback& on_epoch) {
  validate(config);
  if (dataset.sequences.empty()) throw ConfigError("dataset has no sequences");
  if (dataset.meta.width != dataset.meta.height)
    throw ConfigError("training needs square frames, got " + std::to_string(dataset.meta.width) + "x" +
                      std::to_string(dataset.meta.height));

  TrainResult result;
  result.split = split_sequences(dataset.sequences.size(), config.val_fraction, config.test_fraction);
  const auto train_stacks = make_stacks(dataset, result.split.train, config.sampling);
  auto val_stacks = make_stacks(dataset, result.split.val, config.sampling);
  if (train_stacks.empty()) throw ConfigError("training split has no labelled frames");
  if (val_stacks.empty()) throw ConfigError("validation split has no labelled frames");

  LayerStack model;
  if (!config.init_checkpoint.empty()) {
    model = load_checkpoint(config.init_checkpoint).model;
    if (model.config.fusion != config.fusion)
      throw ConfigError("initial checkpoint has fusion " + to_string(model.config.fusion) + " but the run asks for " +
                        to_string(config.fusion));
    if (model.config.input_size != dataset.meta.width)
      throw ConfigError("initial checkpoint expects " + std::to_string(model.config.input_size) +
                        " px input, dataset frames are " + std::to_string(dataset.meta.width) + " px");
  } else {
    ModelConfig mc;
    mc.input_size = dataset.meta.width;
    mc.fusion = config.fusion;
    mc.base_width = config.base_width;
    mc.num_classes = max_class(dataset);
    mc.anchors = fit_anchors(label_sizes(train_stacks), config.num_anchors);
    model = build_model(mc, config.seed);
  }
  model.enable_grad();

  SgdOptimizer optimizer({config.learning_rate, config.momentum, config.weight_decay});
  const EvalOptions eval_options{config.conf_threshold, config.nms_iou, 0.001f};
  std::mt19937_64 rng(config.seed ^ 0x7a3d'5f01'9b2c'4e87ULL);
  std::vector<std::size_t> order(train_stacks.size());
  std::vector<FrameStack> augmented;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    EpochLog row;
    row.epoch = epoch;
    row.learning_rate = learning_rate_at(config, epoch);
    optimizer.set_learning_rate(row.learning_rate);

    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      augmented.clear();
      std::vector<const FrameStack*> batch;
      for (std::size_t i = start; i < end; ++i) {
        const FrameStack& s = train_stacks[order[i]];
        if (config.augment) {
          augmented.push_back(augment_stack(s, draw_augment(rng)));
        } else {
          batch.push_back(&s);
        }
      }
      for (const auto& s : augmented) batch.push_back(&s);
      LossTerms loss;
      try {
        loss = train_step(model, optimizer, batch, config.loss_weights);
      } catch (const DivergenceError& e) {
        throw DivergenceError("training diverged in epoch " + std::to_string(epoch) + ": " + e.what());
      }
      row.loss.total += loss.total;
      row.loss.objectness += loss.objectness;
      row.loss.classification += loss.classification;
      row.loss.box += loss.box;
      ++batches;
    }
    const double inv = 1.0 / static_cast<double>(batches);
    row.loss.total *= inv;
    row.loss.objectness *= inv;
    row.loss.classification *= inv;
    row.loss.box *= inv;
    if (!std::isfinite(row.loss.total))
      throw DivergenceError("training diverged in epoch " + std::to_string(epoch) + ": non-finite loss");

    row.val = evaluate(model, val_stacks, eval_options);
    const bool improved = row.val.map50 > result.best_val_map50;
    if (improved) {
      result.best = model;
      result.best_epoch = epoch;
      result.best_val_map50 = row.val.map50;
    }
    result.log.push_back(row);
    if (on_epoch) on_epoch(row, model, improved);
  }
  result.last = model;
  return result;
}

}  // namespace mfdet
