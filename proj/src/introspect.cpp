#include "mfdet/introspect.hpp"

#include <algorithm>
#include <cmath>

#include "mfdet/error.hpp"
#include "mfdet/ops.hpp"

namespace mfdet {

Heatmap grad_cam_pp_from(const Tensor& activations, const Tensor& gradients) {
  if (activations.shape() != gradients.shape())
    throw ShapeError("activation and gradient shapes differ for Grad-CAM++");
  if (activations.rank() != 3) throw ShapeError("Grad-CAM++ expects (C, H, W) activations");
  const std::size_t C = activations.dim(0), H = activations.dim(1), W = activations.dim(2);
  const std::size_t plane = H * W;

  Heatmap map;
  map.width = W;
  map.height = H;
  std::vector<double> cam(plane, 0.0);
  for (std::size_t k = 0; k < C; ++k) {
    const float* a = activations.raw() + k * plane;
    const float* g = gradients.raw() + k * plane;
    double sum_a = 0.0;
    for (std::size_t i = 0; i < plane; ++i) sum_a += a[i];
    double weight = 0.0;
    for (std::size_t i = 0; i < plane; ++i) {
      const double g1 = g[i], g2 = g1 * g1, g3 = g2 * g1;
      const double denom = 2.0 * g2 + sum_a * g3;
      const double alpha = denom != 0.0 ? g2 / denom : 0.0;
      weight += alpha * std::max(0.0, g1);
    }
    for (std::size_t i = 0; i < plane; ++i) cam[i] += weight * a[i];
  }
  double lo = 0.0, hi = 0.0;
  bool first = true;
  for (auto& v : cam) {
    v = std::max(0.0, v);
    if (first || v < lo) lo = v;
    if (first || v > hi) hi = v;
    first = false;
  }
  map.values.assign(plane, 0.0f);
  if (hi > 0.0) {
    const double range = hi - lo;
    for (std::size_t i = 0; i < plane; ++i)
      map.values[i] = range > 0.0 ? static_cast<float>((cam[i] - lo) / range) : 1.0f;
  }
  return map;
}

Heatmap grad_cam_pp(const LayerStack& model, const Tensor& input, float conf_threshold) {
  const ForwardTrace trace = forward_trace(model, input);
  const Tensor& head = trace.head();
  const auto& cfg = model.config;
  const std::size_t per_anchor = 5 + cfg.num_classes;
  const std::size_t G = head.dim(2);

  Tensor grad_head(head.shape());
  float score = 0.0f;
  const auto detections = decode(head, cfg, conf_threshold, 0);
  auto add_cell = [&](std::size_t a, std::size_t i, std::size_t j) {
    const std::size_t idx = ((a * per_anchor + 4) * G + i) * G + j;  // batch 0
    const float s = sigmoid(head[idx]);
    score += s;
    grad_head[idx] += s * (1.0f - s);
  };
  if (!detections.empty()) {
    for (const auto& d : detections)
      add_cell(static_cast<std::size_t>(d.anchor), static_cast<std::size_t>(d.grid_y),
               static_cast<std::size_t>(d.grid_x));
  } else {
    for (std::size_t a = 0; a < cfg.anchors.size(); ++a)
      for (std::size_t i = 0; i < G; ++i)
        for (std::size_t j = 0; j < G; ++j) add_cell(a, i, j);
  }

  const Tensor grad = gradient_at_layer_output(model, trace, grad_head, kPenultimateLayer);
  const Tensor& act = trace.outputs[kPenultimateLayer];
  const std::size_t C = act.dim(1), H = act.dim(2), W = act.dim(3);
  const std::size_t n = C * H * W;
  Tensor a0(Shape{C, H, W}, std::vector<float>(act.raw(), act.raw() + n));
  Tensor g0(Shape{C, H, W}, std::vector<float>(grad.raw(), grad.raw() + n));

  Heatmap map = grad_cam_pp_from(a0, g0);
  map.target_score = score;
  map.selected_detections = detections.size();
  map.input_height = input.dim(2);
  map.input_width = input.dim(3);
  map.upsampled.resize(map.input_width * map.input_height);
  for (std::size_t y = 0; y < map.input_height; ++y)
    for (std::size_t x = 0; x < map.input_width; ++x)
      map.upsampled[y * map.input_width + x] =
          map.values[(y * map.height / map.input_height) * map.width + x * map.width / map.input_width];
  return map;
}

Image overlay_heatmap(const Heatmap& map, const Image& base) {
  Image out = base;
  for (std::size_t y = 0; y < base.height; ++y)
    for (std::size_t x = 0; x < base.width; ++x) {
      float m = 0.0f;
      if (map.width && map.height)
        m = map.values[(y * map.height / base.height) * map.width + x * map.width / base.width];
      const std::uint8_t gray = luminance(base.pixel(x, y));
      auto* p = out.pixel(x, y);
      const double r = 0.5 * gray + 255.0 * std::clamp(m, 0.0f, 1.0f);
      p[0] = static_cast<std::uint8_t>(std::min(255L, std::lround(r)));
      p[1] = gray;
      p[2] = gray;
    }
  return out;
}

void export_heatmap(const Heatmap& map, const Image& base, const std::filesystem::path& path) {
  write_ppm(overlay_heatmap(map, base), path);
}

}  // namespace mfdet
