#include <algorithm>
#include <cmath>
#include <map>
#include <tuple>

#include "mfdet/detector.hpp"
#include "mfdet/error.hpp"
#include "mfdet/ops.hpp"

namespace mfdet {
namespace {

void check_label(const BoxLabel& label, std::size_t index, const ModelConfig& config) {
  const Box& b = label.box;
  const bool ok = b.cx >= 0.0f && b.cx <= 1.0f && b.cy >= 0.0f && b.cy <= 1.0f && b.w > 0.0f && b.w <= 1.0f &&
                  b.h > 0.0f && b.h <= 1.0f;
  if (!ok) throw ConfigError("label " + std::to_string(index) + " lies outside the unit square");
  if (label.class_id < 0 || static_cast<std::size_t>(label.class_id) >= config.num_classes)
    throw ConfigError("label " + std::to_string(index) + " has class " + std::to_string(label.class_id) +
                      " outside [0, " + std::to_string(config.num_classes) + ")");
}

}  // namespace

Targets assign_targets(const std::vector<BoxLabel>& labels, const ModelConfig& config) {
  return assign_targets(std::vector<std::vector<BoxLabel>>{labels}, config);
}

Targets assign_targets(const std::vector<std::vector<BoxLabel>>& batch_labels, const ModelConfig& config) {
  validate(config);
  Targets t;
  t.batch = batch_labels.size();
  t.anchors = config.anchors.size();
  t.grid = config.grid();
  t.classes = config.num_classes;
  if (t.batch == 0) throw ConfigError("assign_targets needs at least one batch element");
  t.mask = Tensor(Shape{t.batch, t.anchors, t.grid, t.grid});

  std::map<std::tuple<std::size_t, std::size_t, std::size_t, std::size_t>, std::size_t> slot;
  const float g = static_cast<float>(t.grid);
  for (std::size_t b = 0; b < batch_labels.size(); ++b) {
    const auto& labels = batch_labels[b];
    for (std::size_t li = 0; li < labels.size(); ++li) {
      const BoxLabel& label = labels[li];
      check_label(label, li, config);
      Assignment as;
      as.batch = b;
      as.gx = std::min(static_cast<std::size_t>(std::floor(label.box.cx * g)), t.grid - 1);
      as.gy = std::min(static_cast<std::size_t>(std::floor(label.box.cy * g)), t.grid - 1);
      as.tx = label.box.cx * g - static_cast<float>(as.gx);
      as.ty = label.box.cy * g - static_cast<float>(as.gy);
      as.anchor = best_anchor(label.box.w, label.box.h, config.anchors);
      as.tw = std::log(label.box.w / config.anchors[as.anchor].w);
      as.th = std::log(label.box.h / config.anchors[as.anchor].h);
      as.class_id = label.class_id;
      as.box = label.box;
      as.label_index = li;

      const auto key = std::make_tuple(b, as.anchor, as.gy, as.gx);
      if (auto it = slot.find(key); it != slot.end()) {
        t.positives[it->second] = as;
      } else {
        slot.emplace(key, t.positives.size());
        t.positives.push_back(as);
      }
      t.mask[((b * t.anchors + as.anchor) * t.grid + as.gy) * t.grid + as.gx] = 1.0f;
    }
  }
  return t;
}

LossTerms detection_loss(const Tensor& head, const Targets& targets, const ModelConfig& config,
                         const LossWeights& weights, Tensor* grad_head) {
  const std::size_t batch = targets.batch, anchors = targets.anchors, grid = targets.grid;
  const std::size_t classes = targets.classes;
  const std::size_t per_anchor = 5 + classes;
  const Shape expected{batch, anchors * per_anchor, grid, grid};
  if (head.shape() != expected)
    throw ShapeError("head shape " + shape_to_string(head.shape()) + " does not match targets " +
                     shape_to_string(expected));
  if (anchors != config.anchors.size()) throw ShapeError("targets and config disagree on anchor count");
  for (float v : head.data())
    if (!std::isfinite(v)) throw DivergenceError("non-finite value in detection head");

  if (grad_head) *grad_head = Tensor(head.shape());
  auto index = [&](std::size_t b, std::size_t a, std::size_t k, std::size_t i, std::size_t j) {
    return ((b * anchors * per_anchor + a * per_anchor + k) * grid + i) * grid + j;
  };

  LossTerms terms;
  const double obj_count = static_cast<double>(batch * anchors * grid * grid);
  double obj_sum = 0.0;
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t a = 0; a < anchors; ++a)
      for (std::size_t i = 0; i < grid; ++i)
        for (std::size_t j = 0; j < grid; ++j) {
          const std::size_t k = index(b, a, 4, i, j);
          const float target = targets.mask[((b * anchors + a) * grid + i) * grid + j];
          obj_sum += bce_with_logits(head[k], target);
          if (grad_head)
            (*grad_head)[k] =
                static_cast<float>(weights.objectness * bce_with_logits_grad(head[k], target) / obj_count);
        }
  terms.objectness = obj_sum / obj_count;

  const std::size_t positives = targets.positives.size();
  if (positives > 0) {
    const double cls_count = static_cast<double>(positives * classes);
    double cls_sum = 0.0, box_sum = 0.0;
    const float g = static_cast<float>(grid);
    for (const auto& p : targets.positives) {
      for (std::size_t c = 0; c < classes; ++c) {
        const std::size_t k = index(p.batch, p.anchor, 5 + c, p.gy, p.gx);
        const float target = static_cast<int>(c) == p.class_id ? 1.0f : 0.0f;
        cls_sum += bce_with_logits(head[k], target);
        if (grad_head)
          (*grad_head)[k] +=
              static_cast<float>(weights.classification * bce_with_logits_grad(head[k], target) / cls_count);
      }

      const std::size_t kx = index(p.batch, p.anchor, 0, p.gy, p.gx);
      const std::size_t ky = index(p.batch, p.anchor, 1, p.gy, p.gx);
      const std::size_t kw = index(p.batch, p.anchor, 2, p.gy, p.gx);
      const std::size_t kh = index(p.batch, p.anchor, 3, p.gy, p.gx);
      const float sx = sigmoid(head[kx]);
      const float sy = sigmoid(head[ky]);
      const float ew = std::exp(std::clamp(head[kw], -kMaxLogScale, kMaxLogScale));
      const float eh = std::exp(std::clamp(head[kh], -kMaxLogScale, kMaxLogScale));
      Box pred;
      pred.cx = (static_cast<float>(p.gx) + sx) / g;
      pred.cy = (static_cast<float>(p.gy) + sy) / g;
      pred.w = config.anchors[p.anchor].w * ew;
      pred.h = config.anchors[p.anchor].h * eh;
      std::array<double, 4> d{};
      const double v = iou_with_grad(pred, p.box, d);
      box_sum += 1.0 - v;
      if (grad_head) {
        const double s = -weights.box / static_cast<double>(positives);
        (*grad_head)[kx] += static_cast<float>(s * d[0] * sx * (1.0f - sx) / g);
        (*grad_head)[ky] += static_cast<float>(s * d[1] * sy * (1.0f - sy) / g);
        if (std::abs(head[kw]) < kMaxLogScale) (*grad_head)[kw] += static_cast<float>(s * d[2] * pred.w);
        if (std::abs(head[kh]) < kMaxLogScale) (*grad_head)[kh] += static_cast<float>(s * d[3] * pred.h);
      }
    }
    terms.classification = cls_sum / cls_count;
    terms.box = box_sum / static_cast<double>(positives);
  }

  terms.total =
      weights.objectness * terms.objectness + weights.classification * terms.classification + weights.box * terms.box;
  if (!std::isfinite(terms.total)) throw DivergenceError("non-finite detection loss");
  return terms;
}

}  // namespace mfdet
