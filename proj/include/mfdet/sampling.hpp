#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "mfdet/box.hpp"
#include "mfdet/image.hpp"
#include "mfdet/tensor.hpp"

namespace mfdet {

/// Which past frames accompany the target frame.
struct SamplingSpec {
  enum class Kind { Adjacent, Stepped, Explicit };
  Kind kind = Kind::Adjacent;
  std::size_t frames = 1;
  std::size_t step = 1;
  std::vector<int> offsets;  // Explicit only

  static SamplingSpec adjacent(std::size_t n) { return {Kind::Adjacent, n, 1, {}}; }
  static SamplingSpec stepped(std::size_t n, std::size_t s) { return {Kind::Stepped, n, s, {}}; }
  static SamplingSpec explicit_offsets(std::vector<int> offsets) {
    return {Kind::Explicit, offsets.size(), 1, std::move(offsets)};
  }
};

/// Adjacent{n} -> [-(n-1) .. 0]; Stepped{n,s} -> [-(n-1)s, .., -s, 0];
/// Explicit passes through after checking it is strictly increasing,
/// non-positive and ends at 0.
std::vector<int> resolve_offsets(const SamplingSpec& spec);

/// "adjacent:<n>", "stepped:<n>:<s>", "explicit:<o1>,<o2>,..,0".
std::string to_string(const SamplingSpec& spec);
SamplingSpec parse_sampling(const std::string& text);

/// n frames in temporal order (oldest first) plus the labels of the newest.
struct FrameStack {
  std::vector<Image> frames;
  std::vector<int> offsets;
  std::vector<BoxLabel> labels;
  std::size_t sequence_id = 0;
  std::size_t target_index = 0;
};

/// A video sequence with optional per-frame labels; a frame without labels
/// (std::nullopt) is unannotated and is never used as a supervised target.
struct Sequence {
  std::size_t id = 0;
  std::vector<Image> frames;
  std::vector<std::optional<std::vector<BoxLabel>>> labels;
};

/// Frames at t + offset (negative indices clamp to frame 0); labels are read
/// from frame t only. Throws ConfigError when t is out of range.
FrameStack build_stack(const Sequence& sequence, std::size_t t, const SamplingSpec& spec);

/// Same geometric transform for every frame of a stack.
struct AugmentParams {
  bool flip = false;
  float dx = 0.0f, dy = 0.0f;  // translation as a fraction of the image
  float scale = 1.0f;          // about the image centre

  bool is_identity() const { return !flip && dx == 0.0f && dy == 0.0f && scale == 1.0f; }
};

struct AugmentRanges {
  float flip_probability = 0.5f;
  float max_translate = 0.1f;
  float min_scale = 0.8f;
  float max_scale = 1.2f;
};

AugmentParams draw_augment(std::mt19937_64& rng, const AugmentRanges& ranges = {});

inline constexpr std::uint8_t kFillValue = 114;
inline constexpr float kMinAugmentedAreaFraction = 0.10f;

/// Nearest-neighbour resample of every frame with the same parameters;
/// labels follow the transform, are clipped to the unit square and dropped
/// when less than 10% of their transformed area survives the clip.
FrameStack augment_stack(const FrameStack& stack, const AugmentParams& params);

/// (1, 3n, H, W): frame-major, oldest first, RGB within a frame, values in [0,1].
Tensor stack_to_tensor(const FrameStack& stack);
/// (B, 3n, H, W) for stacks of identical geometry.
Tensor stacks_to_tensor(const std::vector<const FrameStack*>& stacks);

}  // namespace mfdet
