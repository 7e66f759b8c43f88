#include "mfdet/surgery.hpp"

#include <algorithm>
#include <cstdio>
#include <random>

#include "mfdet/error.hpp"

namespace mfdet {
namespace {

void require_single_frame(const LayerStack& source) {
  if (source.layers.size() < 2) throw ConfigError("surgery needs a model with at least two layers");
  const auto& l1 = source.layers.front().spec;
  if (source.config.fusion.kind != FusionKind::Single || l1.in_channels != 3 || l1.groups != 1)
    throw ConfigError("surgery source must be a single-frame model, got " + to_string(source.config.fusion));
}

// Repeats `weight` (Cout, Cin, kh, kw) n times along Cin and scales by 1/n.
Tensor tile_input_channels(const Tensor& weight, std::size_t n) {
  const std::size_t cout = weight.dim(0), cin = weight.dim(1), kk = weight.dim(2) * weight.dim(3);
  Tensor out(Shape{cout, cin * n, weight.dim(2), weight.dim(3)});
  const float scale = 1.0f / static_cast<float>(n);
  for (std::size_t o = 0; o < cout; ++o)
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < cin; ++c)
        for (std::size_t k = 0; k < kk; ++k)
          out[((o * cin * n) + r * cin + c) * kk + k] = weight[(o * cin + c) * kk + k] * scale;
  return out;
}

Tensor random_frame(std::mt19937_64& rng, std::size_t size) {
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  Tensor t(Shape{1, 3, size, size});
  for (auto& v : t.data()) v = u(rng);
  return t;
}

Tensor repeat_frame(const Tensor& frame, std::size_t n) {
  const std::size_t plane = frame.size();
  Tensor out(Shape{1, 3 * n, frame.dim(2), frame.dim(3)});
  for (std::size_t r = 0; r < n; ++r) std::copy(frame.raw(), frame.raw() + plane, out.raw() + r * plane);
  return out;
}

}  // namespace

LayerStack adapt_early_fusion(const LayerStack& source, std::size_t n) {
  require_single_frame(source);
  if (n == 0) throw ConfigError("frame count must be positive");
  if (n == 1) return source;

  LayerStack out = source;
  out.config.fusion = FusionMode::early_fusion(n);
  auto& l1 = out.layers.front();
  l1.spec.in_channels = 3 * n;
  l1.weight = tile_input_channels(source.layers.front().weight, n);
  return out;
}

LayerStack adapt_grouped(const LayerStack& source, std::size_t n) {
  require_single_frame(source);
  if (n == 0) throw ConfigError("frame count must be positive");
  if (n == 1) return source;

  LayerStack out = source;
  out.config.fusion = FusionMode::grouped(n);
  const auto& src1 = source.layers[0];
  auto& l1 = out.layers[0];
  l1.spec.in_channels = 3 * n;
  l1.spec.out_channels = src1.spec.out_channels * n;
  l1.spec.groups = n;
  l1.weight = Tensor(conv_weight_shape(l1.spec));
  l1.bias = Tensor(Shape{l1.spec.out_channels});
  for (std::size_t g = 0; g < n; ++g) {
    std::copy(src1.weight.raw(), src1.weight.raw() + src1.weight.size(), l1.weight.raw() + g * src1.weight.size());
    std::copy(src1.bias.raw(), src1.bias.raw() + src1.bias.size(), l1.bias.raw() + g * src1.bias.size());
  }
  auto& l2 = out.layers[1];
  l2.spec.in_channels = l1.spec.out_channels;
  l2.weight = tile_input_channels(source.layers[1].weight, n);
  return out;
}

LayerStack adapt(const LayerStack& source, const FusionMode& mode) {
  switch (mode.kind) {
    case FusionKind::EarlyFusion:
      return adapt_early_fusion(source, mode.frames);
    case FusionKind::Grouped:
      return adapt_grouped(source, mode.frames);
    case FusionKind::Single:
      require_single_frame(source);
      return source;
  }
  throw ConfigError("unknown fusion mode");
}

std::string EquivalenceReport::summary() const {
  char buf[256];
  std::snprintf(buf, sizeof buf, "equivalence %s: trials=%zu max_l1_dev=%.3g max_head_dev=%.3g tol=%.3g",
                passed ? "PASS" : "FAIL", trials, static_cast<double>(max_l1_deviation),
                static_cast<double>(max_output_deviation), static_cast<double>(tolerance));
  return buf;
}

EquivalenceReport verify_equivalence(const LayerStack& adapted, const LayerStack& source, std::size_t n,
                                     std::size_t trials, float tolerance, std::uint64_t seed) {
  if (adapted.layers.empty() || adapted.layers.front().spec.in_channels != 3 * n)
    throw ShapeError("adapted model does not take " + std::to_string(3 * n) + " input channels");
  EquivalenceReport report;
  report.trials = trials;
  report.tolerance = tolerance;
  std::mt19937_64 rng(seed);
  const bool same_l1_width = adapted.layers.front().spec.out_channels == source.layers.front().spec.out_channels;
  for (std::size_t t = 0; t < trials; ++t) {
    const Tensor frame = random_frame(rng, source.config.input_size);
    const Tensor stack = repeat_frame(frame, n);
    if (same_l1_width) {
      const auto& a1 = adapted.layers.front();
      const auto& s1 = source.layers.front();
      const Tensor ya = conv2d_forward(stack, a1.weight, &a1.bias, a1.spec);
      const Tensor ys = conv2d_forward(frame, s1.weight, &s1.bias, s1.spec);
      report.max_l1_deviation = std::max(report.max_l1_deviation, max_abs_diff(ya, ys));
    }
    report.max_output_deviation =
        std::max(report.max_output_deviation, max_abs_diff(forward(adapted, stack), forward(source, frame)));
  }
  report.passed = report.max_output_deviation <= tolerance;
  return report;
}

}  // namespace mfdet
