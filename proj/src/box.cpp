#include "mfdet/box.hpp"

#include <algorithm>

#include "mfdet/error.hpp"

namespace mfdet {

double iou(const Corners& a, const Corners& b) {
  if (!(a.x2 > a.x1 && a.y2 > a.y1 && b.x2 > b.x1 && b.y2 > b.y1))
    throw ConfigError("iou requires boxes with positive width and height");
  const double iw = std::max(0.0, std::min(a.x2, b.x2) - std::max(a.x1, b.x1));
  const double ih = std::max(0.0, std::min(a.y2, b.y2) - std::max(a.y1, b.y1));
  const double inter = iw * ih;
  const double uni = (a.x2 - a.x1) * (a.y2 - a.y1) + (b.x2 - b.x1) * (b.y2 - b.y1) - inter;
  return uni > 0.0 ? std::clamp(inter / uni, 0.0, 1.0) : 0.0;
}

double iou(const Box& a, const Box& b) { return iou(a.corners(), b.corners()); }

double iou_with_grad(const Box& pred, const Box& target, std::array<double, 4>& grad) {
  grad = {0, 0, 0, 0};
  const Corners p = pred.corners();
  const Corners t = target.corners();
  if (!(pred.w > 0 && pred.h > 0 && target.w > 0 && target.h > 0))
    throw ConfigError("iou requires boxes with positive width and height");

  const double left = std::max(p.x1, t.x1), right = std::min(p.x2, t.x2);
  const double top = std::max(p.y1, t.y1), bottom = std::min(p.y2, t.y2);
  const double iw = right - left, ih = bottom - top;
  if (iw <= 0.0 || ih <= 0.0) return 0.0;

  const double area_p = static_cast<double>(pred.w) * pred.h;
  const double area_t = static_cast<double>(target.w) * target.h;
  const double inter = iw * ih;
  const double uni = area_p + area_t - inter;
  const double value = inter / uni;

  // d(iou)/d(inter) and d(iou)/d(area_p)
  const double d_inter = (area_p + area_t) / (uni * uni);
  const double d_area = -inter / (uni * uni);

  // Derivatives of the overlap extents with respect to the predicted corners.
  const double d_iw_dx1 = p.x1 > t.x1 ? -1.0 : 0.0;
  const double d_iw_dx2 = p.x2 < t.x2 ? 1.0 : 0.0;
  const double d_ih_dy1 = p.y1 > t.y1 ? -1.0 : 0.0;
  const double d_ih_dy2 = p.y2 < t.y2 ? 1.0 : 0.0;

  // x1 = cx - w/2, x2 = cx + w/2
  const double d_iw_dcx = d_iw_dx1 + d_iw_dx2;
  const double d_iw_dw = 0.5 * (d_iw_dx2 - d_iw_dx1);
  const double d_ih_dcy = d_ih_dy1 + d_ih_dy2;
  const double d_ih_dh = 0.5 * (d_ih_dy2 - d_ih_dy1);

  grad[0] = d_inter * ih * d_iw_dcx;
  grad[1] = d_inter * iw * d_ih_dcy;
  grad[2] = d_inter * ih * d_iw_dw + d_area * pred.h;
  grad[3] = d_inter * iw * d_ih_dh + d_area * pred.w;
  return value;
}

}  // namespace mfdet
