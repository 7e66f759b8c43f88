#pragma once

#include <cstddef>

#include "mfdet/tensor.hpp"

namespace mfdet {

struct ConvSpec {
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t kernel_h = 3;
  std::size_t kernel_w = 3;
  std::size_t stride = 1;
  std::size_t padding = 0;
  std::size_t groups = 1;
  bool has_bias = true;

  friend bool operator==(const ConvSpec&, const ConvSpec&) = default;
};

/// Throws ShapeError unless channel counts divide evenly into groups and the
/// kernel/stride are non-degenerate.
void validate(const ConvSpec& spec);

/// (out_channels, in_channels / groups, kernel_h, kernel_w)
Shape conv_weight_shape(const ConvSpec& spec);

/// Output NCHW shape for an NCHW input shape; throws when the kernel does
/// not fit the padded input.
Shape conv_output_shape(const ConvSpec& spec, const Shape& input_shape);

enum class ConvAlgorithm { Direct, Im2col };

/// Grouped, strided, zero-padded 2-D cross-correlation. `bias` may be null
/// when `spec.has_bias` is false.
Tensor conv2d_forward(const Tensor& input, const Tensor& weight, const Tensor* bias, const ConvSpec& spec,
                      ConvAlgorithm algorithm = ConvAlgorithm::Im2col);

struct ConvGradients {
  Tensor input;
  Tensor weight;
  Tensor bias;  // empty when the spec has no bias
};

/// Gradients of a scalar loss with respect to the convolution's input,
/// weight and bias given the gradient with respect to its output.
/// `need_input_grad=false` skips the (comparatively expensive) input term and
/// leaves `input` empty.
ConvGradients conv2d_backward(const Tensor& grad_out, const Tensor& saved_input, const Tensor& weight,
                              const ConvSpec& spec, bool need_input_grad = true);

}  // namespace mfdet
