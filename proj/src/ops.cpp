#include "mfdet/ops.hpp"

#include <cmath>

#include "mfdet/error.hpp"

namespace mfdet {
namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape())
    throw ShapeError(std::string(what) + ": shape " + shape_to_string(a.shape()) + " does not match " +
                     shape_to_string(b.shape()));
}

}  // namespace

Tensor leaky_relu(const Tensor& input, float slope) {
  Tensor out = input;
  for (auto& v : out.data())
    if (v < 0.0f) v *= slope;
  return out;
}

Tensor leaky_relu_backward(const Tensor& grad_out, const Tensor& input, float slope) {
  require_same_shape(grad_out, input, "leaky_relu_backward");
  Tensor grad = grad_out;
  for (std::size_t i = 0; i < grad.size(); ++i)
    if (input[i] < 0.0f) grad[i] *= slope;
  return grad;
}

float sigmoid(float x) {
  if (x >= 0.0f) return 1.0f / (1.0f + std::exp(-x));
  const float e = std::exp(x);
  return e / (1.0f + e);
}

Tensor sigmoid(const Tensor& input) {
  Tensor out = input;
  for (auto& v : out.data()) v = sigmoid(v);
  return out;
}

Tensor sigmoid_backward(const Tensor& grad_out, const Tensor& output) {
  require_same_shape(grad_out, output, "sigmoid_backward");
  Tensor grad = grad_out;
  for (std::size_t i = 0; i < grad.size(); ++i) grad[i] *= output[i] * (1.0f - output[i]);
  return grad;
}

double bce_with_logits(float logit, float target) {
  const double x = logit;
  return std::max(x, 0.0) - x * target + std::log1p(std::exp(-std::fabs(x)));
}

float bce_with_logits_grad(float logit, float target) { return sigmoid(logit) - target; }

Tensor bce_with_logits(const Tensor& logits, const Tensor& targets) {
  require_same_shape(logits, targets, "bce_with_logits");
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) sum += bce_with_logits(logits[i], targets[i]);
  return Tensor(Shape{1}, {static_cast<float>(sum / static_cast<double>(logits.size()))});
}

Tensor bce_with_logits_backward(const Tensor& logits, const Tensor& targets, float grad_scale) {
  require_same_shape(logits, targets, "bce_with_logits_backward");
  Tensor grad(logits.shape());
  const float scale = grad_scale / static_cast<float>(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) grad[i] = scale * bce_with_logits_grad(logits[i], targets[i]);
  return grad;
}

}  // namespace mfdet
