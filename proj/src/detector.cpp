#include "mfdet/detector.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "mfdet/error.hpp"
#include "mfdet/ops.hpp"

namespace mfdet {
namespace {

constexpr float kObjectnessPrior = 0.01f;

}  // namespace

std::string to_string(const FusionMode& mode) {
  switch (mode.kind) {
    case FusionKind::Single:
      return "single";
    case FusionKind::EarlyFusion:
      return "early:" + std::to_string(mode.frames);
    case FusionKind::Grouped:
      return "grouped:" + std::to_string(mode.frames);
  }
  return "?";
}

FusionMode parse_fusion_mode(const std::string& text) {
  if (text == "single") return FusionMode::single();
  const auto colon = text.find(':');
  if (colon == std::string::npos)
    throw ConfigError("fusion mode must be 'single', 'early:<n>' or 'grouped:<n>', got '" + text + "'");
  const std::string kind = text.substr(0, colon);
  std::size_t n = 0;
  try {
    n = std::stoul(text.substr(colon + 1));
  } catch (const std::exception&) {
    throw ConfigError("fusion mode frame count is not a number in '" + text + "'");
  }
  if (kind == "early") return FusionMode::early_fusion(n);
  if (kind == "grouped") return FusionMode::grouped(n);
  throw ConfigError("unknown fusion kind '" + kind + "'");
}

std::vector<Anchor> default_anchors() { return {{0.10f, 0.10f}, {0.18f, 0.18f}, {0.30f, 0.30f}}; }

void validate(const ModelConfig& config) {
  if (config.input_size == 0 || config.input_size % ModelConfig::kTotalStride != 0)
    throw ConfigError("input_size must be a positive multiple of 8, got " + std::to_string(config.input_size));
  if (config.fusion.kind == FusionKind::Single && config.fusion.frames != 1)
    throw ConfigError("single-frame mode must have exactly one frame");
  if (config.fusion.kind != FusionKind::Single && config.fusion.frames < 2)
    throw ConfigError("multi-frame mode " + to_string(config.fusion) + " needs at least 2 frames");
  if (config.base_width == 0) throw ConfigError("base_width must be positive");
  if (config.num_classes == 0) throw ConfigError("num_classes must be positive");
  if (config.anchors.empty()) throw ConfigError("at least one anchor is required");
  for (const auto& a : config.anchors)
    if (!(a.w > 0 && a.h > 0)) throw ConfigError("anchor sizes must be positive");
  if (!(config.leaky_slope >= 0.0f && config.leaky_slope < 1.0f))
    throw ConfigError("leaky_slope must lie in [0, 1)");
}

const char* layer_name(std::size_t index) {
  static const char* names[] = {"l1", "l2", "l3", "l4", "head"};
  return index < 5 ? names[index] : "?";
}

std::vector<ConvSpec> layer_specs(const ModelConfig& config) {
  validate(config);
  const std::size_t n = config.fusion.frames;
  const bool grouped = config.fusion.kind == FusionKind::Grouped;
  const std::size_t l1_out = grouped ? config.base_width * n : config.base_width;

  std::vector<ConvSpec> specs;
  specs.push_back({config.fusion.input_channels(), l1_out, 3, 3, 2, 1, grouped ? n : 1, true});
  specs.push_back({l1_out, 64, 3, 3, 2, 1, 1, true});
  specs.push_back({64, 64, 3, 3, 1, 1, 1, true});
  specs.push_back({64, 128, 3, 3, 2, 1, 1, true});
  specs.push_back({128, config.head_channels(), 1, 1, 1, 0, 1, true});
  return specs;
}

LayerStack build_model(const ModelConfig& config, std::uint64_t seed) {
  LayerStack model;
  model.config = config;
  std::mt19937_64 rng(seed);
  const auto specs = layer_specs(config);
  for (std::size_t i = 0; i < specs.size(); ++i) {
    ConvLayer layer;
    layer.name = layer_name(i);
    layer.spec = specs[i];
    layer.activation = i + 1 < specs.size();
    layer.weight = Tensor(conv_weight_shape(layer.spec));
    layer.bias = Tensor(Shape{layer.spec.out_channels});
    const double fan_in = static_cast<double>(layer.weight.size()) / layer.spec.out_channels;
    const double gain = layer.activation ? 2.0 / (1.0 + config.leaky_slope * config.leaky_slope) : 1.0;
    std::normal_distribution<double> dist(0.0, std::sqrt(gain / fan_in));
    for (auto& w : layer.weight.data()) w = static_cast<float>(dist(rng));
    model.layers.push_back(std::move(layer));
  }
  // Objectness starts at a low prior so early training is not swamped by negatives.
  auto& head_bias = model.layers.back().bias;
  const std::size_t per_anchor = 5 + config.num_classes;
  for (std::size_t a = 0; a < config.anchors.size(); ++a)
    head_bias[a * per_anchor + 4] = std::log(kObjectnessPrior / (1.0f - kObjectnessPrior));
  return model;
}

std::vector<NamedParam> LayerStack::parameters() {
  std::vector<NamedParam> params;
  for (auto& layer : layers) {
    params.push_back({layer.name + ".weight", &layer.weight});
    params.push_back({layer.name + ".bias", &layer.bias});
  }
  return params;
}

void LayerStack::enable_grad() {
  for (auto& layer : layers) {
    layer.weight.enable_grad();
    layer.bias.enable_grad();
  }
}

void LayerStack::zero_grad() {
  for (auto& layer : layers) {
    layer.weight.zero_grad();
    layer.bias.zero_grad();
  }
}

bool LayerStack::identical(const LayerStack& other) const {
  if (!(config == other.config) || layers.size() != other.layers.size()) return false;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& a = layers[i];
    const auto& b = other.layers[i];
    if (a.name != b.name || !(a.spec == b.spec) || a.activation != b.activation || !a.weight.identical(b.weight) ||
        !a.bias.identical(b.bias))
      return false;
  }
  return true;
}

namespace {

void check_input(const LayerStack& model, const Shape& input_shape) {
  if (model.layers.empty()) throw ShapeError("model has no layers");
  if (input_shape.size() != 4) throw ShapeError("model input must be NCHW, got " + shape_to_string(input_shape));
  const std::size_t expected = model.layers.front().spec.in_channels;
  if (input_shape[1] != expected)
    throw ShapeError("input has " + std::to_string(input_shape[1]) + " channels but fusion mode " +
                     to_string(model.config.fusion) + " expects " + std::to_string(expected));
}

}  // namespace

std::vector<Shape> layer_output_shapes(const LayerStack& model, const Shape& input_shape) {
  check_input(model, input_shape);
  std::vector<Shape> shapes;
  Shape current = input_shape;
  for (const auto& layer : model.layers) {
    current = conv_output_shape(layer.spec, current);
    shapes.push_back(current);
  }
  return shapes;
}

Tensor forward(const LayerStack& model, const Tensor& input) {
  check_input(model, input.shape());
  Tensor x = input;
  for (const auto& layer : model.layers) {
    x = conv2d_forward(x, layer.weight, &layer.bias, layer.spec);
    if (layer.activation) x = leaky_relu(x, model.config.leaky_slope);
  }
  return x;
}

ForwardTrace forward_trace(const LayerStack& model, const Tensor& input) {
  check_input(model, input.shape());
  ForwardTrace trace;
  trace.inputs.reserve(model.layers.size());
  trace.preactivations.reserve(model.layers.size());
  trace.outputs.reserve(model.layers.size());
  const Tensor* x = &input;  // stays valid: outputs never reallocates
  for (const auto& layer : model.layers) {
    trace.inputs.push_back(*x);
    trace.preactivations.push_back(conv2d_forward(*x, layer.weight, &layer.bias, layer.spec));
    trace.outputs.push_back(layer.activation ? leaky_relu(trace.preactivations.back(), model.config.leaky_slope)
                                             : trace.preactivations.back());
    x = &trace.outputs.back();
  }
  return trace;
}

Tensor backward(LayerStack& model, const ForwardTrace& trace, const Tensor& grad_head, bool need_input_grad) {
  if (trace.outputs.size() != model.layers.size()) throw ShapeError("forward trace does not match model depth");
  Tensor grad = grad_head;
  for (std::size_t i = model.layers.size(); i-- > 0;) {
    auto& layer = model.layers[i];
    if (layer.activation) grad = leaky_relu_backward(grad, trace.preactivations[i], model.config.leaky_slope);
    auto g = conv2d_backward(grad, trace.inputs[i], layer.weight, layer.spec, i > 0 || need_input_grad);
    layer.weight.enable_grad();
    layer.bias.enable_grad();
    auto wg = layer.weight.grad();
    for (std::size_t k = 0; k < wg.size(); ++k) wg[k] += g.weight[k];
    auto bg = layer.bias.grad();
    for (std::size_t k = 0; k < bg.size(); ++k) bg[k] += g.bias[k];
    grad = std::move(g.input);
  }
  return grad;
}

Tensor gradient_at_layer_output(const LayerStack& model, const ForwardTrace& trace, const Tensor& grad_head,
                                std::size_t layer) {
  if (layer >= model.layers.size()) throw ShapeError("layer index out of range");
  Tensor grad = grad_head;
  for (std::size_t i = model.layers.size(); i-- > layer + 1;) {
    const auto& l = model.layers[i];
    if (l.activation) grad = leaky_relu_backward(grad, trace.preactivations[i], model.config.leaky_slope);
    grad = conv2d_backward(grad, trace.inputs[i], l.weight, l.spec, true).input;
  }
  return grad;
}

std::vector<Detection> decode(const Tensor& head, const ModelConfig& config, float conf_threshold,
                              std::size_t batch_index) {
  const std::size_t grid = config.grid();
  const std::size_t per_anchor = 5 + config.num_classes;
  if (head.rank() != 4 || head.dim(1) != config.head_channels() || head.dim(2) != grid || head.dim(3) != grid)
    throw ShapeError("head shape " + shape_to_string(head.shape()) + " does not match config");
  if (batch_index >= head.dim(0)) throw ShapeError("batch index out of range");

  std::vector<Detection> out;
  for (std::size_t a = 0; a < config.anchors.size(); ++a) {
    for (std::size_t i = 0; i < grid; ++i) {
      for (std::size_t j = 0; j < grid; ++j) {
        auto v = [&](std::size_t k) { return head.at(batch_index, a * per_anchor + k, i, j); };
        float best = -1.0f;
        int best_class = 0;
        for (std::size_t c = 0; c < config.num_classes; ++c) {
          const float p = sigmoid(v(5 + c));
          if (p > best) {
            best = p;
            best_class = static_cast<int>(c);
          }
        }
        const float confidence = sigmoid(v(4)) * best;
        if (!(confidence >= conf_threshold) || confidence <= 0.0f) continue;
        Detection d;
        d.class_id = best_class;
        d.confidence = confidence;
        d.box.cx = (static_cast<float>(j) + sigmoid(v(0))) / static_cast<float>(grid);
        d.box.cy = (static_cast<float>(i) + sigmoid(v(1))) / static_cast<float>(grid);
        d.box.w = std::clamp(config.anchors[a].w * std::exp(std::clamp(v(2), -kMaxLogScale, kMaxLogScale)), 1e-6f, 1.0f);
        d.box.h = std::clamp(config.anchors[a].h * std::exp(std::clamp(v(3), -kMaxLogScale, kMaxLogScale)), 1e-6f, 1.0f);
        d.anchor = static_cast<int>(a);
        d.grid_y = static_cast<int>(i);
        d.grid_x = static_cast<int>(j);
        out.push_back(d);
      }
    }
  }
  return out;
}

std::vector<Detection> nms(const std::vector<Detection>& detections, float iou_threshold) {
  std::vector<std::size_t> order(detections.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return detections[a].confidence > detections[b].confidence;
  });
  std::vector<Detection> kept;
  for (std::size_t idx : order) {
    const auto& d = detections[idx];
    bool suppressed = false;
    for (const auto& k : kept)
      if (k.class_id == d.class_id && iou(k.box, d.box) > iou_threshold) {
        suppressed = true;
        break;
      }
    if (!suppressed) kept.push_back(d);
  }
  return kept;
}

namespace {

double shape_iou(float w1, float h1, float w2, float h2) {
  const double inter = static_cast<double>(std::min(w1, w2)) * std::min(h1, h2);
  return inter / (static_cast<double>(w1) * h1 + static_cast<double>(w2) * h2 - inter);
}

}  // namespace

std::size_t best_anchor(float w, float h, const std::vector<Anchor>& anchors) {
  std::size_t best = 0;
  double best_iou = -1.0;
  for (std::size_t a = 0; a < anchors.size(); ++a) {
    const double v = shape_iou(w, h, anchors[a].w, anchors[a].h);
    if (v > best_iou) {
      best_iou = v;
      best = a;
    }
  }
  return best;
}

std::vector<Anchor> fit_anchors(const std::vector<std::pair<float, float>>& sizes, std::size_t k,
                                std::size_t iterations) {
  if (k == 0) throw ConfigError("anchor count must be positive");
  if (sizes.size() < k) {
    auto anchors = default_anchors();
    anchors.resize(k, anchors.back());
    return anchors;
  }
  std::vector<std::pair<float, float>> sorted = sizes;
  std::sort(sorted.begin(), sorted.end(),
            [](const auto& a, const auto& b) { return a.first * a.second < b.first * b.second; });
  std::vector<Anchor> centres(k);
  for (std::size_t c = 0; c < k; ++c) {
    const auto& s = sorted[(2 * c + 1) * sorted.size() / (2 * k)];
    centres[c] = {s.first, s.second};
  }
  std::vector<std::size_t> assign(sorted.size(), 0);
  for (std::size_t it = 0; it < iterations; ++it) {
    bool changed = false;
    for (std::size_t i = 0; i < sorted.size(); ++i) {
      const std::size_t a = best_anchor(sorted[i].first, sorted[i].second, centres);
      if (a != assign[i]) changed = true;
      assign[i] = a;
    }
    std::vector<double> sw(k, 0.0), sh(k, 0.0);
    std::vector<std::size_t> count(k, 0);
    for (std::size_t i = 0; i < sorted.size(); ++i) {
      sw[assign[i]] += sorted[i].first;
      sh[assign[i]] += sorted[i].second;
      ++count[assign[i]];
    }
    for (std::size_t c = 0; c < k; ++c)
      if (count[c] > 0) centres[c] = {static_cast<float>(sw[c] / count[c]), static_cast<float>(sh[c] / count[c])};
    if (!changed && it > 0) break;
  }
  std::sort(centres.begin(), centres.end(), [](const Anchor& a, const Anchor& b) { return a.w * a.h < b.w * b.h; });
  return centres;
}

}  // namespace mfdet
