#pragma once

#include <array>

namespace mfdet {

/// Axis-aligned box in corner form.
struct Corners {
  double x1 = 0, y1 = 0, x2 = 0, y2 = 0;
};

/// Axis-aligned box in normalized centre form.
struct Box {
  float cx = 0, cy = 0, w = 0, h = 0;

  Corners corners() const { return {cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h}; }
  friend bool operator==(const Box&, const Box&) = default;
};

/// Ground-truth label of the supervised frame.
struct BoxLabel {
  int class_id = 0;
  Box box;

  friend bool operator==(const BoxLabel&, const BoxLabel&) = default;
};

struct Detection {
  int class_id = 0;
  float confidence = 0;
  Box box;
  // Head location that produced the detection (-1 when not from a head).
  int anchor = -1;
  int grid_y = -1;
  int grid_x = -1;
};

/// Intersection over union; throws ConfigError for non-positive extents.
double iou(const Corners& a, const Corners& b);
double iou(const Box& a, const Box& b);

/// IoU of `pred` against `target` and its gradient with respect to
/// (cx, cy, w, h) of `pred`. Extents must be positive.
double iou_with_grad(const Box& pred, const Box& target, std::array<double, 4>& grad);

}  // namespace mfdet
