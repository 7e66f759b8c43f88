// Helpers shared by the unit tests and the acceptance runner.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "mfdet/box.hpp"
#include "mfdet/metrics.hpp"
#include "mfdet/tensor.hpp"

namespace testing_support {

using mfdet::Shape;
using mfdet::Tensor;

inline Tensor random_tensor(const Shape& shape, std::mt19937_64& rng, float lo = -1.0f, float hi = 1.0f) {
  std::uniform_real_distribution<float> u(lo, hi);
  Tensor t(shape);
  for (auto& v : t.data()) v = u(rng);
  return t;
}

struct GradCheck {
  double max_rel_error = 0;
  double norm_rel_error = 0;  // ||analytic - numeric|| / max(||analytic||, ||numeric||)
  std::size_t checked = 0;
  std::size_t skipped = 0;
};

/// |analytic - numeric| / max(|analytic|, |numeric|, floor).
inline double relative_error(double analytic, double numeric, double floor = 1e-3) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

/// Central differences of `loss` with respect to every element of `x`,
/// compared against `analytic`. `skip(i)` excludes non-smooth points.
inline GradCheck check_gradient(Tensor& x, const std::vector<double>& analytic, const std::function<double()>& loss,
                                double step = 1e-2, const std::function<bool(std::size_t)>& skip = {}) {
  GradCheck r;
  double diff2 = 0, a2 = 0, n2 = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (skip && skip(i)) {
      ++r.skipped;
      continue;
    }
    const float saved = x[i];
    x[i] = static_cast<float>(saved + step);
    const double up = loss();
    x[i] = static_cast<float>(saved - step);
    const double down = loss();
    x[i] = saved;
    const double numeric = (up - down) / (2 * step);
    r.max_rel_error = std::max(r.max_rel_error, relative_error(analytic[i], numeric));
    diff2 += (analytic[i] - numeric) * (analytic[i] - numeric);
    a2 += analytic[i] * analytic[i];
    n2 += numeric * numeric;
    ++r.checked;
  }
  const double scale = std::sqrt(std::max(a2, n2));
  r.norm_rel_error = scale > 0 ? std::sqrt(diff2) / scale : 0.0;
  return r;
}

inline std::vector<double> to_double(std::span<const float> v) { return {v.begin(), v.end()}; }

/// sum_i w_i y_i in double precision; a generic scalar head for gradchecks.
inline double project(const Tensor& y, const Tensor& w) {
  double s = 0;
  for (std::size_t i = 0; i < y.size(); ++i) s += static_cast<double>(y[i]) * w[i];
  return s;
}

/// Independent AP: for every recall level r in {0, .01, .., 1} take the best
/// precision over all ranking prefixes whose recall reaches r, then average.
/// Prefix sums are recomputed from scratch for each cut.
inline double brute_force_ap(const std::vector<bool>& ranked_tp, std::size_t num_gt) {
  if (num_gt == 0) return ranked_tp.empty() ? 1.0 : 0.0;
  double total = 0;
  for (int level = 0; level <= 100; ++level) {
    const double r = level / 100.0;
    double best = 0;
    for (std::size_t cut = 1; cut <= ranked_tp.size(); ++cut) {
      std::size_t tp = 0;
      for (std::size_t i = 0; i < cut; ++i) tp += ranked_tp[i] ? 1 : 0;
      const double recall = static_cast<double>(tp) / static_cast<double>(num_gt);
      const double precision = static_cast<double>(tp) / static_cast<double>(cut);
      if (recall >= r) best = std::max(best, precision);
    }
    total += best;
  }
  return total / 101.0;
}

/// IoU computed from pixel-free corner arithmetic, written independently of
/// the library version.
inline double oracle_iou(const mfdet::Box& a, const mfdet::Box& b) {
  const double ax1 = a.cx - a.w / 2.0, ax2 = a.cx + a.w / 2.0, ay1 = a.cy - a.h / 2.0, ay2 = a.cy + a.h / 2.0;
  const double bx1 = b.cx - b.w / 2.0, bx2 = b.cx + b.w / 2.0, by1 = b.cy - b.h / 2.0, by2 = b.cy + b.h / 2.0;
  const double iw = std::max(0.0, std::min(ax2, bx2) - std::max(ax1, bx1));
  const double ih = std::max(0.0, std::min(ay2, by2) - std::max(ay1, by1));
  const double inter = iw * ih;
  return inter / (static_cast<double>(a.w) * a.h + static_cast<double>(b.w) * b.h - inter);
}

struct OracleScores {
  double map50 = 0;
  double map5095 = 0;
};

/// Dataset-level oracle evaluator: per class, pools every prediction, sorts
/// by confidence (stable on image then prediction index), matches greedily
/// within its image and scores with brute_force_ap. mAP averages over
/// classes with ground truth or predictions.
inline OracleScores oracle_evaluate(const std::vector<std::vector<mfdet::Detection>>& preds,
                                    const std::vector<std::vector<mfdet::BoxLabel>>& gts) {
  std::vector<int> classes;
  for (const auto& img : preds)
    for (const auto& d : img) classes.push_back(d.class_id);
  for (const auto& img : gts)
    for (const auto& g : img) classes.push_back(g.class_id);
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  if (classes.empty()) return {1.0, 1.0};

  OracleScores out;
  for (int cls : classes) {
    double ap_sum = 0, ap50 = 0;
    for (int t = 0; t < 10; ++t) {
      const double thr = 0.5 + 0.05 * t;
      // Per-image greedy matching in confidence order.
      struct Entry {
        float conf;
        std::size_t image, index;
        bool tp;
      };
      std::vector<Entry> entries;
      std::size_t num_gt = 0;
      for (std::size_t img = 0; img < preds.size(); ++img) {
        std::vector<std::size_t> order(preds[img].size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
          return preds[img][a].confidence > preds[img][b].confidence;
        });
        std::vector<bool> used(gts[img].size(), false);
        for (const auto& g : gts[img]) num_gt += g.class_id == cls ? 1 : 0;
        for (std::size_t i : order) {
          const auto& d = preds[img][i];
          double best = -1;
          std::size_t best_j = 0;
          for (std::size_t j = 0; j < gts[img].size(); ++j) {
            if (used[j] || gts[img][j].class_id != d.class_id) continue;
            const double v = oracle_iou(d.box, gts[img][j].box);
            if (v > best) {
              best = v;
              best_j = j;
            }
          }
          const bool tp = best >= thr;
          if (tp) used[best_j] = true;
          if (d.class_id == cls) entries.push_back({d.confidence, img, i, tp});
        }
      }
      std::stable_sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) { return a.conf > b.conf; });
      std::vector<bool> ranked;
      for (const auto& e : entries) ranked.push_back(e.tp);
      const double ap = brute_force_ap(ranked, num_gt);
      ap_sum += ap;
      if (t == 0) ap50 = ap;
    }
    out.map50 += ap50;
    out.map5095 += ap_sum / 10.0;
  }
  out.map50 /= static_cast<double>(classes.size());
  out.map5095 /= static_cast<double>(classes.size());
  return out;
}

}  // namespace testing_support
