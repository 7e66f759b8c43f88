#pragma once

#include <filesystem>
#include <vector>

#include "mfdet/detector.hpp"
#include "mfdet/image.hpp"

namespace mfdet {

struct Heatmap {
  std::size_t width = 0, height = 0;             // penultimate-layer grid
  std::vector<float> values;                      // row-major, in [0, 1]
  std::size_t input_width = 0, input_height = 0;
  std::vector<float> upsampled;                   // nearest-neighbour to input size
  float target_score = 0;                         // Y
  std::size_t selected_detections = 0;            // detections that formed Y (0 = all cells)
};

/// Grad-CAM++ over the penultimate layer (L4) for batch element 0.
/// Y sums sigmoid(objectness) over decoded detections with confidence >=
/// conf_threshold, or over every cell/anchor when none pass. With g = dY/dA:
///   alpha = g^2 / (2 g^2 + sum_ab A_ab g^3)   (0 where the denominator is 0)
///   w_k   = sum_ij alpha_ij relu(g_ij)
///   map   = relu(sum_k w_k A_k), min-max normalized (all zero stays zero).
Heatmap grad_cam_pp(const LayerStack& model, const Tensor& input, float conf_threshold);

/// Same map computed from given activations (C, H, W) and gradients.
Heatmap grad_cam_pp_from(const Tensor& activations, const Tensor& gradients);

/// Red-channel overlay on the grayscale base frame:
///   R = min(255, 0.5 gray + 255 m),  G = B = gray.
Image overlay_heatmap(const Heatmap& map, const Image& base);
void export_heatmap(const Heatmap& map, const Image& base, const std::filesystem::path& path);

}  // namespace mfdet
