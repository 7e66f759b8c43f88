#pragma once

#include <cstdint>
#include <string>

#include "mfdet/detector.hpp"

namespace mfdet {

/// Early fusion: L1 weights tiled n times along the input-channel axis and
/// scaled by 1/n; L1 bias and all later layers copied. n == 1 returns the
/// source unchanged. Throws ConfigError when the source is already
/// multi-frame or n == 0.
LayerStack adapt_early_fusion(const LayerStack& source, std::size_t n);

/// Grouped: L1 becomes an n-group convolution whose groups each hold a copy
/// of the source L1 weights and bias; L2 weights are tiled n times along the
/// input-channel axis and scaled by 1/n. n == 1 returns the source.
LayerStack adapt_grouped(const LayerStack& source, std::size_t n);

/// Dispatches on mode.kind using mode.frames.
LayerStack adapt(const LayerStack& source, const FusionMode& mode);

struct EquivalenceReport {
  std::size_t trials = 0;
  float tolerance = 0;
  float max_l1_deviation = 0;       // L1 pre-activation
  float max_output_deviation = 0;   // raw head
  bool passed = false;              // head deviation <= tolerance

  std::string summary() const;
};

/// Feeds `trials` random frames through `source` and the n-fold identical
/// stack of each frame through `adapted`, recording the largest absolute
/// deviation at L1 (pre-activation, early fusion only) and at the head.
EquivalenceReport verify_equivalence(const LayerStack& adapted, const LayerStack& source, std::size_t n,
                                     std::size_t trials, float tolerance, std::uint64_t seed = 0);

}  // namespace mfdet
