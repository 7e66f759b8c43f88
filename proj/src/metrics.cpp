#include "mfdet/metrics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <set>
#include <sstream>

#include "mfdet/error.hpp"

namespace mfdet {

const std::vector<double>& coco_iou_thresholds() {
  static const std::vector<double> t = [] {
    std::vector<double> v;
    for (int i = 0; i < 10; ++i) v.push_back(0.5 + 0.05 * i);
    return v;
  }();
  return t;
}

MatchResult match_detections(const std::vector<Detection>& preds, const std::vector<BoxLabel>& gts,
                             const std::vector<double>& thresholds) {
  MatchResult r;
  r.order.resize(preds.size());
  std::iota(r.order.begin(), r.order.end(), 0);
  std::stable_sort(r.order.begin(), r.order.end(),
                   [&](std::size_t a, std::size_t b) { return preds[a].confidence > preds[b].confidence; });

  // IoU table is shared by all thresholds.
  std::vector<double> overlap(preds.size() * gts.size(), -1.0);
  for (std::size_t p = 0; p < preds.size(); ++p)
    for (std::size_t g = 0; g < gts.size(); ++g)
      if (preds[p].class_id == gts[g].class_id) overlap[p * gts.size() + g] = iou(preds[p].box, gts[g].box);

  for (double thr : thresholds) {
    std::vector<bool> tp(preds.size(), false);
    std::vector<bool> used(gts.size(), false);
    std::size_t matched = 0;
    for (std::size_t p : r.order) {
      double best = -1.0;
      std::size_t best_g = gts.size();
      for (std::size_t g = 0; g < gts.size(); ++g) {
        const double v = overlap[p * gts.size() + g];
        if (used[g] || v < 0.0) continue;
        if (v > best) {
          best = v;
          best_g = g;
        }
      }
      if (best_g < gts.size() && best >= thr) {
        tp[p] = true;
        used[best_g] = true;
        ++matched;
      }
    }
    r.tp.push_back(std::move(tp));
    r.unmatched_gt.push_back(gts.size() - matched);
  }
  return r;
}

double average_precision(const std::vector<RankedMatch>& ranked, std::size_t num_gt) {
  if (num_gt == 0) return ranked.empty() ? 1.0 : 0.0;
  if (ranked.empty()) return 0.0;
  const std::size_t n = ranked.size();
  std::vector<double> precision(n), recall(n);
  std::size_t tp = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (ranked[i].tp) ++tp;
    precision[i] = static_cast<double>(tp) / static_cast<double>(i + 1);
    recall[i] = static_cast<double>(tp) / static_cast<double>(num_gt);
  }
  for (std::size_t i = n - 1; i-- > 0;) precision[i] = std::max(precision[i], precision[i + 1]);
  double sum = 0.0;
  for (int k = 0; k <= 100; ++k) {
    const double r = k / 100.0;
    const auto it = std::lower_bound(recall.begin(), recall.end(), r);
    if (it != recall.end()) sum += precision[static_cast<std::size_t>(it - recall.begin())];
  }
  return sum / 101.0;
}

EvalReport evaluate_detections(const std::vector<std::vector<Detection>>& preds,
                               const std::vector<std::vector<BoxLabel>>& gts, float conf_threshold) {
  if (preds.size() != gts.size()) throw ShapeError("prediction and ground-truth image counts differ");
  const auto& thresholds = coco_iou_thresholds();
  EvalReport report;
  report.images = preds.size();

  struct Scored {
    float confidence;
    std::size_t image, rank;
    int class_id;
    std::vector<bool> tp;  // per threshold
  };
  std::vector<Scored> scored;
  std::map<int, std::size_t> gt_per_class;
  std::set<int> classes;
  std::size_t op_tp = 0, op_preds = 0;

  for (std::size_t img = 0; img < preds.size(); ++img) {
    for (const auto& g : gts[img]) {
      ++gt_per_class[g.class_id];
      classes.insert(g.class_id);
    }
    report.ground_truth += gts[img].size();
    const MatchResult m = match_detections(preds[img], gts[img], thresholds);
    for (std::size_t rank = 0; rank < m.order.size(); ++rank) {
      const std::size_t p = m.order[rank];
      Scored s{preds[img][p].confidence, img, rank, preds[img][p].class_id, {}};
      for (std::size_t t = 0; t < thresholds.size(); ++t) s.tp.push_back(m.tp[t][p]);
      classes.insert(s.class_id);
      if (s.confidence >= conf_threshold) {
        ++op_preds;
        if (s.tp[0]) ++op_tp;
      }
      scored.push_back(std::move(s));
    }
  }

  std::stable_sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) {
    if (a.confidence != b.confidence) return a.confidence > b.confidence;
    if (a.image != b.image) return a.image < b.image;
    return a.rank < b.rank;
  });

  if (classes.empty()) {
    report.map50 = report.map5095 = 1.0;
  } else {
    double sum50 = 0.0, sum5095 = 0.0;
    for (int c : classes) {
      std::array<double, 10> aps{};
      for (std::size_t t = 0; t < thresholds.size(); ++t) {
        std::vector<RankedMatch> ranked;
        for (const auto& s : scored)
          if (s.class_id == c) ranked.push_back({s.confidence, s.tp[t]});
        aps[t] = average_precision(ranked, gt_per_class[c]);
      }
      report.per_class_ap[c] = aps;
      sum50 += aps[0];
      sum5095 += std::accumulate(aps.begin(), aps.end(), 0.0) / static_cast<double>(aps.size());
    }
    report.map50 = sum50 / static_cast<double>(classes.size());
    report.map5095 = sum5095 / static_cast<double>(classes.size());
  }

  report.precision = op_preds > 0 ? static_cast<double>(op_tp) / op_preds : (report.ground_truth == 0 ? 1.0 : 0.0);
  report.recall = report.ground_truth > 0 ? static_cast<double>(op_tp) / report.ground_truth : (op_preds == 0 ? 1.0 : 0.0);
  return report;
}

std::vector<Detection> predict(const LayerStack& model, const FrameStack& stack, const EvalOptions& options) {
  const Tensor head = forward(model, stack_to_tensor(stack));
  return nms(decode(head, model.config, options.min_confidence), options.nms_iou);
}

EvalReport evaluate(const Predictor& predictor, const std::vector<FrameStack>& stacks, const EvalOptions& options) {
  if (stacks.empty()) throw ConfigError("evaluation needs at least one stack");
  std::vector<std::vector<Detection>> preds;
  std::vector<std::vector<BoxLabel>> gts;
  for (const auto& s : stacks) {
    preds.push_back(predictor(s));
    gts.push_back(s.labels);
  }
  return evaluate_detections(preds, gts, options.conf_threshold);
}

EvalReport evaluate(const LayerStack& model, const std::vector<FrameStack>& stacks, const EvalOptions& options) {
  if (stacks.empty()) throw ConfigError("evaluation needs at least one stack");
  constexpr std::size_t kBatch = 16;
  std::vector<std::vector<Detection>> preds;
  std::vector<std::vector<BoxLabel>> gts;
  for (std::size_t start = 0; start < stacks.size(); start += kBatch) {
    std::vector<const FrameStack*> batch;
    for (std::size_t i = start; i < std::min(stacks.size(), start + kBatch); ++i) batch.push_back(&stacks[i]);
    const Tensor head = forward(model, stacks_to_tensor(batch));
    for (std::size_t b = 0; b < batch.size(); ++b) {
      preds.push_back(nms(decode(head, model.config, options.min_confidence, b), options.nms_iou));
      gts.push_back(batch[b]->labels);
    }
  }
  EvalReport report = evaluate_detections(preds, gts, options.conf_threshold);
  report.params = count_params(model);
  report.flops = count_flops(model, model.config.input_size);
  return report;
}

std::uint64_t count_params(const std::vector<ConvSpec>& specs) {
  std::uint64_t total = 0;
  for (const auto& s : specs) {
    total += static_cast<std::uint64_t>(s.out_channels) * (s.in_channels / s.groups) * s.kernel_h * s.kernel_w;
    if (s.has_bias) total += s.out_channels;
  }
  return total;
}

std::uint64_t count_params(const LayerStack& model) {
  std::vector<ConvSpec> specs;
  for (const auto& l : model.layers) specs.push_back(l.spec);
  return count_params(specs);
}

std::uint64_t count_flops(const std::vector<ConvSpec>& specs, std::size_t input_size) {
  std::uint64_t total = 0;
  std::size_t h = input_size, w = input_size;
  for (const auto& s : specs) {
    const Shape out = conv_output_shape(s, {1, s.in_channels, h, w});
    h = out[2];
    w = out[3];
    const std::uint64_t positions = static_cast<std::uint64_t>(h) * w * s.out_channels;
    total += 2 * positions * (s.in_channels / s.groups) * s.kernel_h * s.kernel_w;
    if (s.has_bias) total += positions;
  }
  return total;
}

std::uint64_t count_flops(const LayerStack& model, std::size_t input_size) {
  std::vector<ConvSpec> specs;
  for (const auto& l : model.layers) specs.push_back(l.spec);
  return count_flops(specs, input_size);
}

LatencyStats time_inference(const LayerStack& model, const Shape& input_shape, std::size_t warmup, std::size_t runs) {
  if (runs == 0) throw ConfigError("time_inference needs at least one timed run");
  Tensor input(input_shape);
  for (std::size_t i = 0; i < input.size(); ++i) input[i] = 0.5f + 0.5f * std::sin(0.37f * static_cast<float>(i));

  LatencyStats stats;
  for (std::size_t i = 0; i < warmup; ++i) {
    forward(model, input);
    ++stats.warmup_runs;
  }
  for (std::size_t i = 0; i < runs; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    const Tensor out = forward(model, input);
    const auto t1 = std::chrono::steady_clock::now();
    stats.samples_ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  stats.runs = runs;
  std::vector<double> sorted = stats.samples_ms;
  std::sort(sorted.begin(), sorted.end());
  stats.mean_ms = std::accumulate(sorted.begin(), sorted.end(), 0.0) / static_cast<double>(runs);
  stats.median_ms = runs % 2 ? sorted[runs / 2] : 0.5 * (sorted[runs / 2 - 1] + sorted[runs / 2]);
  const std::size_t rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(runs)));
  stats.p95_ms = sorted[std::max<std::size_t>(rank, 1) - 1];
  if (runs == 1) stats.mean_ms = stats.median_ms = stats.p95_ms = sorted[0];
  return stats;
}

std::string csv_header() {
  return "name,precision,recall,map50,map5095,params,flops,latency_mean_ms,latency_median_ms,latency_p95_ms,images,"
         "ground_truth";
}

std::string csv_row(const std::string& name, const EvalReport& r) {
  char buf[512];
  std::snprintf(buf, sizeof buf, "%s,%.6f,%.6f,%.6f,%.6f,%llu,%llu,%.4f,%.4f,%.4f,%zu,%zu", name.c_str(), r.precision,
                r.recall, r.map50, r.map5095, static_cast<unsigned long long>(r.params),
                static_cast<unsigned long long>(r.flops), r.latency.mean_ms, r.latency.median_ms, r.latency.p95_ms,
                r.images, r.ground_truth);
  return buf;
}

std::string format_table(const std::vector<std::pair<std::string, EvalReport>>& rows) {
  std::ostringstream os;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-28s %7s %7s %8s %10s %10s %12s\n", "config", "P", "R", "mAP@.5", "mAP@.5:.95",
                "params", "FLOPs");
  os << buf;
  for (const auto& [name, r] : rows) {
    std::snprintf(buf, sizeof buf, "%-28s %7.3f %7.3f %8.3f %10.3f %10llu %12llu\n", name.c_str(), r.precision,
                  r.recall, r.map50, r.map5095, static_cast<unsigned long long>(r.params),
                  static_cast<unsigned long long>(r.flops));
    os << buf;
  }
  return os.str();
}

}  // namespace mfdet
