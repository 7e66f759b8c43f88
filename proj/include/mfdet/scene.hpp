#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "mfdet/box.hpp"
#include "mfdet/image.hpp"

namespace mfdet {

enum class ShapeKind { Disc, Rect, Triangle };

/// Object centre over time in normalized image coordinates:
///   x(t) = x0 + vx t + amp_x sin(2 pi t / period + phase)   (same for y)
/// Linear paths have zero amplitude.
struct Trajectory {
  float x0 = 0.5f, y0 = 0.5f;
  float vx = 0.0f, vy = 0.0f;
  float amp_x = 0.0f, amp_y = 0.0f;
  float period = 1.0f;
  float phase = 0.0f;

  std::array<double, 2> at(double t) const;
};

struct SceneObject {
  ShapeKind shape = ShapeKind::Disc;
  float width = 0.15f;   // normalized extents of the tight box
  float height = 0.15f;
  std::array<std::uint8_t, 3> color{200, 60, 60};
  int class_id = 0;
  Trajectory trajectory;
};

enum class DegradationKind { OccluderSweep, MotionBlur, BoundaryExit, Glare };

std::string to_string(DegradationKind kind);
DegradationKind parse_degradation_kind(const std::string& text);

/// Active on frames [start, end).
struct Degradation {
  DegradationKind kind = DegradationKind::OccluderSweep;
  std::size_t start = 0;
  std::size_t end = 0;
  float intensity = 1.0f;  // in [0, 1]
  float x = 0.5f, y = 0.5f;  // glare centre / sweep direction seed
};

struct SceneScript {
  std::uint64_t seed = 0;
  std::size_t num_frames = 1;
  std::size_t width = 64;
  std::size_t height = 64;
  float noise = 0.0f;  // per-pixel Gaussian sensor noise, std as a fraction of full scale
  std::size_t clutter = 0;  // static background blobs
  std::vector<SceneObject> objects;
  std::vector<Degradation> degradations;
};

void validate(const SceneScript& script);

struct RenderedSequence {
  std::vector<Image> frames;
  std::vector<std::vector<BoxLabel>> labels;            // per frame
  std::vector<std::vector<int>> label_objects;          // object index of each label
  std::vector<std::vector<std::vector<std::uint8_t>>> visible;  // [frame][object] -> pixel mask
};

/// Deterministic under the script (including its seed). Boxes are the
/// objects' full extents clipped to the image; an object emits no box when it
/// has no visible pixel or when less than 25% of its nominal area remains
/// inside the image.
RenderedSequence render_sequence(const SceneScript& script);

inline constexpr float kMinVisibleAreaFraction = 0.25f;
inline constexpr std::size_t kBlurSubframes = 7;
inline constexpr double kMaxBlurExposure = 4.0;  // frames of motion at intensity 1

/// Built-in scenario families: "static", "clean", "occlusion", "blur",
/// "boundary-exit", "glare", "mixed".
const std::vector<std::string>& preset_names();

/// Script for sequence `index` of a preset. Throws ConfigError listing the
/// presets for an unknown name.
SceneScript make_preset(const std::string& name, std::uint64_t seed, std::size_t index, std::size_t num_frames,
                        std::size_t size);

}  // namespace mfdet
