#pragma once

#include "mfdet/tensor.hpp"

namespace mfdet {

/// Elementwise max(x, slope * x) for slope in [0, 1).
Tensor leaky_relu(const Tensor& input, float slope);
/// Gradient at x == 0 is taken from the positive side.
Tensor leaky_relu_backward(const Tensor& grad_out, const Tensor& input, float slope);

float sigmoid(float x);
Tensor sigmoid(const Tensor& input);
/// Takes the forward output y = sigmoid(x); dy/dx = y (1 - y).
Tensor sigmoid_backward(const Tensor& grad_out, const Tensor& output);

/// Numerically stable per-element BCE: max(x,0) - x t + log(1 + exp(-|x|)).
double bce_with_logits(float logit, float target);
/// d/dx of the per-element loss above: sigmoid(x) - t.
float bce_with_logits_grad(float logit, float target);

/// Mean-reduced binary cross entropy; returns a rank-1 tensor of size one.
Tensor bce_with_logits(const Tensor& logits, const Tensor& targets);
/// Gradient of the mean-reduced loss with respect to the logits, scaled by
/// the upstream scalar gradient.
Tensor bce_with_logits_backward(const Tensor& logits, const Tensor& targets, float grad_scale = 1.0f);

}  // namespace mfdet
