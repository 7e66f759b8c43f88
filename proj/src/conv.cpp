#include "mfdet/conv.hpp"

#include <algorithm>
#include <cstring>
#include <string>
#include <vector>

#include "mfdet/error.hpp"

namespace mfdet {
namespace {

struct Geometry {
  std::size_t batch, in_c, in_h, in_w;
  std::size_t out_c, out_h, out_w;
  std::size_t in_per_group, out_per_group;
  std::size_t kh, kw, stride, pad, groups;

  std::size_t patch() const { return in_per_group * kh * kw; }
  std::size_t pixels() const { return out_h * out_w; }
};

void check_weight(const Tensor& weight, const ConvSpec& spec) {
  const Shape expected = conv_weight_shape(spec);
  if (weight.shape() != expected) {
    static const char* names[] = {"out_channels", "in_channels/groups", "kernel_h", "kernel_w"};
    for (std::size_t i = 0; i < 4 && i < weight.rank(); ++i)
      if (weight.shape()[i] != expected[i])
        throw ShapeError(std::string("conv weight dimension ") + names[i] + " is " +
                         std::to_string(weight.shape()[i]) + ", expected " + std::to_string(expected[i]) +
                         " (weight " + shape_to_string(weight.shape()) + ")");
    throw ShapeError("conv weight shape " + shape_to_string(weight.shape()) + ", expected " +
                     shape_to_string(expected));
  }
}

Geometry geometry(const Tensor& input, const ConvSpec& spec) {
  const Shape out = conv_output_shape(spec, input.shape());
  Geometry g{};
  g.batch = input.dim(0);
  g.in_c = input.dim(1);
  g.in_h = input.dim(2);
  g.in_w = input.dim(3);
  g.out_c = out[1];
  g.out_h = out[2];
  g.out_w = out[3];
  g.groups = spec.groups;
  g.in_per_group = spec.in_channels / spec.groups;
  g.out_per_group = spec.out_channels / spec.groups;
  g.kh = spec.kernel_h;
  g.kw = spec.kernel_w;
  g.stride = spec.stride;
  g.pad = spec.padding;
  return g;
}

// col[(c*kh + i)*kw + j][oy*out_w + ox] = in[c][oy*s - p + i][ox*s - p + j]
void im2col(const float* in, const Geometry& g, float* col) {
  const std::size_t pixels = g.pixels();
  for (std::size_t c = 0; c < g.in_per_group; ++c) {
    const float* plane = in + c * g.in_h * g.in_w;
    for (std::size_t i = 0; i < g.kh; ++i) {
      for (std::size_t j = 0; j < g.kw; ++j) {
        float* row = col + ((c * g.kh + i) * g.kw + j) * pixels;
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          const long y = static_cast<long>(oy * g.stride + i) - static_cast<long>(g.pad);
          float* dst = row + oy * g.out_w;
          if (y < 0 || y >= static_cast<long>(g.in_h)) {
            std::fill(dst, dst + g.out_w, 0.0f);
            continue;
          }
          const float* src = plane + static_cast<std::size_t>(y) * g.in_w;
          for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            const long x = static_cast<long>(ox * g.stride + j) - static_cast<long>(g.pad);
            dst[ox] = (x < 0 || x >= static_cast<long>(g.in_w)) ? 0.0f : src[x];
          }
        }
      }
    }
  }
}

void col2im_add(const float* col, const Geometry& g, float* in) {
  const std::size_t pixels = g.pixels();
  for (std::size_t c = 0; c < g.in_per_group; ++c) {
    float* plane = in + c * g.in_h * g.in_w;
    for (std::size_t i = 0; i < g.kh; ++i) {
      for (std::size_t j = 0; j < g.kw; ++j) {
        const float* row = col + ((c * g.kh + i) * g.kw + j) * pixels;
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          const long y = static_cast<long>(oy * g.stride + i) - static_cast<long>(g.pad);
          if (y < 0 || y >= static_cast<long>(g.in_h)) continue;
          float* dst = plane + static_cast<std::size_t>(y) * g.in_w;
          const float* src = row + oy * g.out_w;
          for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            const long x = static_cast<long>(ox * g.stride + j) - static_cast<long>(g.pad);
            if (x >= 0 && x < static_cast<long>(g.in_w)) dst[x] += src[ox];
          }
        }
      }
    }
  }
}

// C (rows x cols) += A' B where A'[r][q] = a[r * rs + q * qs] and B is
// (depth x cols) row-major. Each output element accumulates over q in order.
using vec8 = float __attribute__((vector_size(32)));

void gemm_strided(std::size_t rows, std::size_t cols, std::size_t depth, const float* a, std::size_t rs,
                  std::size_t qs, const float* b, float* c) {
  constexpr std::size_t kRows = 6;
  constexpr std::size_t kCols = 16;
  constexpr std::size_t kPanels = 16;  // strips packed together to amortise TLB misses
  thread_local std::vector<float> packed;
  packed.resize(depth * kCols * kPanels);
  const std::size_t full = cols / kCols * kCols;
  std::size_t j0 = 0;
  for (; j0 < full; j0 += kCols) {
    const std::size_t strip = (j0 / kCols) % kPanels;
    if (strip == 0) {
      const std::size_t width = std::min(kPanels * kCols, full - j0);
      for (std::size_t q = 0; q < depth; ++q)
        for (std::size_t s0 = 0; s0 < width; s0 += kCols)
          std::memcpy(&packed[(s0 / kCols * depth + q) * kCols], b + q * cols + j0 + s0, kCols * sizeof(float));
    }
    const float* bp = packed.data() + strip * depth * kCols;
    std::size_t i0 = 0;
    for (; i0 + kRows <= rows; i0 += kRows) {
      vec8 acc[kRows][2];
      for (std::size_t r = 0; r < kRows; ++r) {
        std::memcpy(&acc[r][0], c + (i0 + r) * cols + j0, sizeof(vec8));
        std::memcpy(&acc[r][1], c + (i0 + r) * cols + j0 + 8, sizeof(vec8));
      }
      const float* arow = a + i0 * rs;
      for (std::size_t q = 0; q < depth; ++q) {
        vec8 b0, b1;
        std::memcpy(&b0, bp + q * kCols, sizeof(vec8));
        std::memcpy(&b1, bp + q * kCols + 8, sizeof(vec8));
        const float* aq = arow + q * qs;
        for (std::size_t r = 0; r < kRows; ++r) {
          const float av = aq[r * rs];
          acc[r][0] += av * b0;
          acc[r][1] += av * b1;
        }
      }
      for (std::size_t r = 0; r < kRows; ++r) {
        std::memcpy(c + (i0 + r) * cols + j0, &acc[r][0], sizeof(vec8));
        std::memcpy(c + (i0 + r) * cols + j0 + 8, &acc[r][1], sizeof(vec8));
      }
    }
    for (; i0 < rows; ++i0) {
      vec8 acc0, acc1;
      std::memcpy(&acc0, c + i0 * cols + j0, sizeof(vec8));
      std::memcpy(&acc1, c + i0 * cols + j0 + 8, sizeof(vec8));
      for (std::size_t q = 0; q < depth; ++q) {
        vec8 b0, b1;
        std::memcpy(&b0, bp + q * kCols, sizeof(vec8));
        std::memcpy(&b1, bp + q * kCols + 8, sizeof(vec8));
        const float av = a[i0 * rs + q * qs];
        acc0 += av * b0;
        acc1 += av * b1;
      }
      std::memcpy(c + i0 * cols + j0, &acc0, sizeof(vec8));
      std::memcpy(c + i0 * cols + j0 + 8, &acc1, sizeof(vec8));
    }
  }
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = j0; j < cols; ++j) {
      float acc = c[i * cols + j];
      for (std::size_t q = 0; q < depth; ++q) acc += a[i * rs + q * qs] * b[q * cols + j];
      c[i * cols + j] = acc;
    }
}

// C[m][n] += sum_k A[m][k] * B[k][n]
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const float* a, const float* b, float* c) {
  gemm_strided(m, n, k, a, k, 1, b, c);
}

// C[m][k] += sum_n A[m][n] * B[k][n]
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const float* a, const float* b, float* c) {
  thread_local std::vector<float> bt;
  bt.resize(n * k);
  constexpr std::size_t kBlock = 32;
  for (std::size_t p0 = 0; p0 < k; p0 += kBlock)
    for (std::size_t j0 = 0; j0 < n; j0 += kBlock)
      for (std::size_t p = p0; p < std::min(k, p0 + kBlock); ++p)
        for (std::size_t j = j0; j < std::min(n, j0 + kBlock); ++j) bt[j * k + p] = b[p * n + j];
  gemm_strided(m, k, n, a, n, 1, bt.data(), c);
}

// C[k][n] += sum_m A[m][k] * B[m][n]
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const float* a, const float* b, float* c) {
  gemm_strided(k, n, m, a, 1, k, b, c);
}

Tensor forward_direct(const Tensor& input, const Tensor& weight, const Tensor* bias, const Geometry& g,
                      const Shape& out_shape) {
  Tensor out(out_shape);
  const float* in = input.raw();
  const float* w = weight.raw();
  for (std::size_t n = 0; n < g.batch; ++n)
    for (std::size_t co = 0; co < g.out_c; ++co) {
      const std::size_t grp = co / g.out_per_group;
      for (std::size_t oy = 0; oy < g.out_h; ++oy)
        for (std::size_t ox = 0; ox < g.out_w; ++ox) {
          float acc = bias ? (*bias)[co] : 0.0f;
          for (std::size_t ci = 0; ci < g.in_per_group; ++ci) {
            const std::size_t c = grp * g.in_per_group + ci;
            for (std::size_t i = 0; i < g.kh; ++i) {
              const long y = static_cast<long>(oy * g.stride + i) - static_cast<long>(g.pad);
              if (y < 0 || y >= static_cast<long>(g.in_h)) continue;
              for (std::size_t j = 0; j < g.kw; ++j) {
                const long x = static_cast<long>(ox * g.stride + j) - static_cast<long>(g.pad);
                if (x < 0 || x >= static_cast<long>(g.in_w)) continue;
                acc += w[((co * g.in_per_group + ci) * g.kh + i) * g.kw + j] *
                       in[((n * g.in_c + c) * g.in_h + static_cast<std::size_t>(y)) * g.in_w +
                          static_cast<std::size_t>(x)];
              }
            }
          }
          out.at(n, co, oy, ox) = acc;
        }
    }
  return out;
}

}  // namespace

void validate(const ConvSpec& spec) {
  if (spec.groups == 0) throw ShapeError("conv groups must be positive");
  if (spec.in_channels == 0 || spec.out_channels == 0) throw ShapeError("conv channel counts must be positive");
  if (spec.in_channels % spec.groups != 0)
    throw ShapeError("conv in_channels " + std::to_string(spec.in_channels) + " not divisible by groups " +
                     std::to_string(spec.groups));
  if (spec.out_channels % spec.groups != 0)
    throw ShapeError("conv out_channels " + std::to_string(spec.out_channels) + " not divisible by groups " +
                     std::to_string(spec.groups));
  if (spec.kernel_h == 0 || spec.kernel_w == 0) throw ShapeError("conv kernel must be positive");
  if (spec.stride == 0) throw ShapeError("conv stride must be positive");
}

Shape conv_weight_shape(const ConvSpec& spec) {
  validate(spec);
  return {spec.out_channels, spec.in_channels / spec.groups, spec.kernel_h, spec.kernel_w};
}

Shape conv_output_shape(const ConvSpec& spec, const Shape& input_shape) {
  validate(spec);
  if (input_shape.size() != 4)
    throw ShapeError("conv input must be NCHW, got " + shape_to_string(input_shape));
  if (input_shape[1] != spec.in_channels)
    throw ShapeError("conv input channel dimension is " + std::to_string(input_shape[1]) + ", expected " +
                     std::to_string(spec.in_channels));
  const std::size_t ph = input_shape[2] + 2 * spec.padding;
  const std::size_t pw = input_shape[3] + 2 * spec.padding;
  if (ph < spec.kernel_h) throw ShapeError("conv input height " + std::to_string(input_shape[2]) + " too small");
  if (pw < spec.kernel_w) throw ShapeError("conv input width " + std::to_string(input_shape[3]) + " too small");
  return {input_shape[0], spec.out_channels, (ph - spec.kernel_h) / spec.stride + 1,
          (pw - spec.kernel_w) / spec.stride + 1};
}

Tensor conv2d_forward(const Tensor& input, const Tensor& weight, const Tensor* bias, const ConvSpec& spec,
                      ConvAlgorithm algorithm) {
  const Shape out_shape = conv_output_shape(spec, input.shape());
  check_weight(weight, spec);
  if (spec.has_bias) {
    if (!bias) throw ShapeError("conv spec has bias but none was supplied");
    if (bias->shape() != Shape{spec.out_channels})
      throw ShapeError("conv bias dimension is " + shape_to_string(bias->shape()) + ", expected (" +
                       std::to_string(spec.out_channels) + ")");
  } else {
    bias = nullptr;
  }
  const Geometry g = geometry(input, spec);
  if (algorithm == ConvAlgorithm::Direct) return forward_direct(input, weight, bias, g, out_shape);

  Tensor out(out_shape);
  const std::size_t pixels = g.pixels();
  const std::size_t patch = g.patch();
  std::vector<float> col(patch * pixels);
  for (std::size_t n = 0; n < g.batch; ++n) {
    for (std::size_t grp = 0; grp < g.groups; ++grp) {
      const float* in = input.raw() + (n * g.in_c + grp * g.in_per_group) * g.in_h * g.in_w;
      float* dst = out.raw() + (n * g.out_c + grp * g.out_per_group) * pixels;
      for (std::size_t co = 0; co < g.out_per_group; ++co)
        std::fill(dst + co * pixels, dst + (co + 1) * pixels, bias ? (*bias)[grp * g.out_per_group + co] : 0.0f);
      im2col(in, g, col.data());
      gemm_nn(g.out_per_group, pixels, patch, weight.raw() + grp * g.out_per_group * patch, col.data(), dst);
    }
  }
  return out;
}

ConvGradients conv2d_backward(const Tensor& grad_out, const Tensor& saved_input, const Tensor& weight,
                              const ConvSpec& spec, bool need_input_grad) {
  const Shape out_shape = conv_output_shape(spec, saved_input.shape());
  check_weight(weight, spec);
  if (grad_out.shape() != out_shape)
    throw ShapeError("conv grad_out shape " + shape_to_string(grad_out.shape()) + ", expected " +
                     shape_to_string(out_shape));
  const Geometry g = geometry(saved_input, spec);
  const std::size_t pixels = g.pixels();
  const std::size_t patch = g.patch();

  ConvGradients grads;
  grads.weight = Tensor(weight.shape());
  if (spec.has_bias) grads.bias = Tensor(Shape{spec.out_channels});
  if (need_input_grad) grads.input = Tensor(saved_input.shape());

  std::vector<float> col(patch * pixels);
  std::vector<float> grad_col(need_input_grad ? patch * pixels : 0);
  for (std::size_t n = 0; n < g.batch; ++n) {
    for (std::size_t grp = 0; grp < g.groups; ++grp) {
      const float* in = saved_input.raw() + (n * g.in_c + grp * g.in_per_group) * g.in_h * g.in_w;
      const float* gout = grad_out.raw() + (n * g.out_c + grp * g.out_per_group) * pixels;
      const float* w = weight.raw() + grp * g.out_per_group * patch;

      if (spec.has_bias)
        for (std::size_t co = 0; co < g.out_per_group; ++co) {
          float sum = 0.0f;
          for (std::size_t p = 0; p < pixels; ++p) sum += gout[co * pixels + p];
          grads.bias[grp * g.out_per_group + co] += sum;
        }

      im2col(in, g, col.data());
      gemm_nt(g.out_per_group, pixels, patch, gout, col.data(), grads.weight.raw() + grp * g.out_per_group * patch);

      if (need_input_grad) {
        std::fill(grad_col.begin(), grad_col.end(), 0.0f);
        gemm_tn(g.out_per_group, pixels, patch, w, gout, grad_col.data());
        col2im_add(grad_col.data(), g,
                   grads.input.raw() + (n * g.in_c + grp * g.in_per_group) * g.in_h * g.in_w);
      }
    }
  }
  return grads;
}

}  // namespace mfdet
