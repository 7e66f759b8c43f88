#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "mfdet/box.hpp"
#include "mfdet/conv.hpp"
#include "mfdet/sgd.hpp"
#include "mfdet/tensor.hpp"

namespace mfdet {

enum class FusionKind { Single, EarlyFusion, Grouped };

/// How the first layer consumes the frame stack.
struct FusionMode {
  FusionKind kind = FusionKind::Single;
  std::size_t frames = 1;

  static FusionMode single() { return {FusionKind::Single, 1}; }
  static FusionMode early_fusion(std::size_t n) { return {FusionKind::EarlyFusion, n}; }
  static FusionMode grouped(std::size_t n) { return {FusionKind::Grouped, n}; }

  std::size_t input_channels() const { return 3 * frames; }
  friend bool operator==(const FusionMode&, const FusionMode&) = default;
};

/// "single", "early:<n>" or "grouped:<n>".
std::string to_string(const FusionMode& mode);
FusionMode parse_fusion_mode(const std::string& text);

struct Anchor {
  float w = 0, h = 0;
  friend bool operator==(const Anchor&, const Anchor&) = default;
};

std::vector<Anchor> default_anchors();

struct ModelConfig {
  std::size_t input_size = 64;
  FusionMode fusion;
  std::size_t base_width = 32;
  std::size_t num_classes = 1;
  std::vector<Anchor> anchors = default_anchors();
  float leaky_slope = 0.1f;

  std::size_t grid() const { return input_size / kTotalStride; }
  std::size_t head_channels() const { return anchors.size() * (5 + num_classes); }

  static constexpr std::size_t kTotalStride = 8;
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

void validate(const ModelConfig& config);

struct ConvLayer {
  std::string name;
  ConvSpec spec;
  Tensor weight;
  Tensor bias;
  bool activation = true;
};

/// L1 conv(k3,s2,N) -> L2 conv(k3,s2,64) -> L3 conv(k3,s1,64) ->
/// L4 conv(k3,s2,128) -> head conv(k1, A(5+C)), leaky activations except
/// on the head. L1/L2 channel counts follow the fusion mode.
struct LayerStack {
  ModelConfig config;
  std::vector<ConvLayer> layers;

  std::vector<NamedParam> parameters();
  void enable_grad();
  void zero_grad();
  /// Bitwise equality of config, specs and tensors.
  bool identical(const LayerStack& other) const;
};

inline constexpr std::size_t kPenultimateLayer = 3;

std::vector<ConvSpec> layer_specs(const ModelConfig& config);
const char* layer_name(std::size_t index);

/// He-normal weights, zero biases, objectness bias set to a low prior.
LayerStack build_model(const ModelConfig& config, std::uint64_t seed);

/// Output shape of every layer for a given input shape, without running it.
std::vector<Shape> layer_output_shapes(const LayerStack& model, const Shape& input_shape);

/// Intermediate values kept for the backward pass.
struct ForwardTrace {
  std::vector<Tensor> inputs;          // input of layer i
  std::vector<Tensor> preactivations;  // conv output of layer i
  std::vector<Tensor> outputs;         // post-activation output of layer i

  const Tensor& head() const { return outputs.back(); }
};

/// Raw head (N, A(5+C), G, G). Throws ShapeError naming the fusion mode on a
/// channel mismatch.
Tensor forward(const LayerStack& model, const Tensor& input);
ForwardTrace forward_trace(const LayerStack& model, const Tensor& input);

/// Accumulates parameter gradients into the layers' grad buffers (enabling
/// them as needed) and returns the gradient with respect to the input
/// (an empty tensor when `need_input_grad` is false).
Tensor backward(LayerStack& model, const ForwardTrace& trace, const Tensor& grad_head, bool need_input_grad = true);

/// Gradient with respect to the post-activation output of `layer` without
/// touching parameter gradients.
Tensor gradient_at_layer_output(const LayerStack& model, const ForwardTrace& trace, const Tensor& grad_head,
                                std::size_t layer);

// --- targets and loss --------------------------------------------------

struct Assignment {
  std::size_t batch = 0, anchor = 0, gy = 0, gx = 0;
  float tx = 0, ty = 0;  // centre offsets within the cell, in [0, 1)
  float tw = 0, th = 0;  // log(w / anchor_w), log(h / anchor_h)
  int class_id = 0;
  Box box;
  std::size_t label_index = 0;
};

struct Targets {
  std::size_t batch = 0, anchors = 0, grid = 0, classes = 0;
  Tensor mask;  // (B, A, G, G), 1 at positives
  std::vector<Assignment> positives;
};

/// Centre-cell, single-best-anchor assignment. Throws ConfigError naming the
/// label index for labels outside the unit square. When two labels land on
/// the same cell and anchor the later one wins.
Targets assign_targets(const std::vector<BoxLabel>& labels, const ModelConfig& config);
Targets assign_targets(const std::vector<std::vector<BoxLabel>>& batch_labels, const ModelConfig& config);

/// Index of the anchor with the largest shape IoU (ties: lowest index).
std::size_t best_anchor(float w, float h, const std::vector<Anchor>& anchors);

struct LossWeights {
  float objectness = 1.0f;
  float box = 5.0f;
  float classification = 1.0f;
};

struct LossTerms {
  double total = 0, objectness = 0, classification = 0, box = 0;
};

/// total = w_obj BCE(obj, all cells) + w_cls BCE(class, positives)
///       + w_box mean(1 - IoU) over positives.
/// When `grad_head` is non-null it receives d(total)/d(head).
/// Throws DivergenceError on a non-finite head.
LossTerms detection_loss(const Tensor& head, const Targets& targets, const ModelConfig& config,
                         const LossWeights& weights = {}, Tensor* grad_head = nullptr);

/// Bound on |tw|, |th| before exponentiation in the loss and in decode.
inline constexpr float kMaxLogScale = 10.0f;

// --- inference ---------------------------------------------------------

/// Decodes one batch element of the head into detections with
/// confidence = sigmoid(obj) * max_c sigmoid(cls) >= conf_threshold.
std::vector<Detection> decode(const Tensor& head, const ModelConfig& config, float conf_threshold,
                              std::size_t batch_index = 0);

/// Greedy class-aware NMS, output sorted by descending confidence with ties
/// broken by input order.
std::vector<Detection> nms(const std::vector<Detection>& detections, float iou_threshold);

/// k-means over label (w, h) with 1 - IoU distance; result sorted by area.
std::vector<Anchor> fit_anchors(const std::vector<std::pair<float, float>>& sizes, std::size_t k,
                                std::size_t iterations = 50);

}  // namespace mfdet
