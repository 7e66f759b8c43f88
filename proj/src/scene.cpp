#include "mfdet/scene.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "mfdet/error.hpp"

namespace mfdet {

std::array<double, 2> Trajectory::at(double t) const {
  const double w = 2.0 * std::numbers::pi * t / period + phase;
  return {x0 + vx * t + amp_x * std::sin(w), y0 + vy * t + amp_y * std::sin(w)};
}

std::string to_string(DegradationKind kind) {
  switch (kind) {
    case DegradationKind::OccluderSweep:
      return "occluder-sweep";
    case DegradationKind::MotionBlur:
      return "motion-blur";
    case DegradationKind::BoundaryExit:
      return "boundary-exit";
    case DegradationKind::Glare:
      return "glare";
  }
  return "?";
}

DegradationKind parse_degradation_kind(const std::string& text) {
  for (auto k : {DegradationKind::OccluderSweep, DegradationKind::MotionBlur, DegradationKind::BoundaryExit,
                 DegradationKind::Glare})
    if (to_string(k) == text) return k;
  throw ConfigError("unknown degradation kind '" + text + "'");
}

void validate(const SceneScript& script) {
  if (script.num_frames == 0) throw ConfigError("scene needs at least one frame");
  if (script.width == 0 || script.height == 0) throw ConfigError("scene resolution must be positive");
  if (!(script.noise >= 0.0f && script.noise <= 1.0f)) throw ConfigError("scene noise must lie in [0, 1]");
  for (std::size_t i = 0; i < script.objects.size(); ++i) {
    const auto& o = script.objects[i];
    if (!(o.width > 0 && o.width <= 1 && o.height > 0 && o.height <= 1))
      throw ConfigError("object " + std::to_string(i) + " has invalid size");
    if (o.trajectory.period <= 0) throw ConfigError("object " + std::to_string(i) + " has non-positive period");
    const auto p0 = o.trajectory.at(0.0);
    const auto p1 = o.trajectory.at(static_cast<double>(script.num_frames));
    if (!std::isfinite(p0[0]) || !std::isfinite(p0[1]) || !std::isfinite(p1[0]) || !std::isfinite(p1[1]))
      throw ConfigError("object " + std::to_string(i) + " trajectory is not finite");
  }
  for (std::size_t i = 0; i < script.degradations.size(); ++i) {
    const auto& d = script.degradations[i];
    if (d.start >= d.end || d.end > script.num_frames)
      throw ConfigError("degradation " + std::to_string(i) + " window [" + std::to_string(d.start) + ", " +
                        std::to_string(d.end) + ") is not inside the sequence");
    if (!(d.intensity >= 0.0f && d.intensity <= 1.0f))
      throw ConfigError("degradation " + std::to_string(i) + " intensity must lie in [0, 1]");
  }
}

namespace {

bool active(const Degradation& d, double t) { return t >= static_cast<double>(d.start) && t < static_cast<double>(d.end); }

bool covers(const SceneObject& o, double cx, double cy, double u, double v) {
  const double hw = 0.5 * o.width, hh = 0.5 * o.height;
  switch (o.shape) {
    case ShapeKind::Disc: {
      const double a = (u - cx) / hw, b = (v - cy) / hh;
      return a * a + b * b <= 1.0;
    }
    case ShapeKind::Rect:
      return std::fabs(u - cx) <= hw && std::fabs(v - cy) <= hh;
    case ShapeKind::Triangle: {
      const double frac = (v - (cy - hh)) / o.height;
      return frac >= 0.0 && frac <= 1.0 && std::fabs(u - cx) <= frac * hw;
    }
  }
  return false;
}

// Horizontal camera pan from boundary-exit windows: ramps out and back.
double pan_offset(const SceneScript& s, double t) {
  double dx = 0.0;
  for (const auto& d : s.degradations) {
    if (d.kind != DegradationKind::BoundaryExit) continue;
    const double len = static_cast<double>(d.end - d.start);
    const double f = (t - static_cast<double>(d.start)) / len;
    if (f < 0.0 || f > 1.0) continue;
    const double tri = f < 0.5 ? 2.0 * f : 2.0 * (1.0 - f);
    dx += (d.x >= 0.5 ? 1.0 : -1.0) * 0.6 * d.intensity * tri;
  }
  return dx;
}

std::array<double, 2> object_position(const SceneScript& s, const SceneObject& o, double t) {
  auto p = o.trajectory.at(t);
  p[0] += pan_offset(s, t);
  return p;
}

double blur_exposure(const SceneScript& s, std::size_t t) {
  double e = 0.0;
  for (const auto& d : s.degradations)
    if (d.kind == DegradationKind::MotionBlur && active(d, static_cast<double>(t)))
      e = std::max(e, d.intensity * kMaxBlurExposure);
  return e;
}

std::vector<float> render_background(const SceneScript& s) {
  std::mt19937_64 rng(s.seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  const float base[3] = {70.0f + 60.0f * u(rng), 70.0f + 60.0f * u(rng), 70.0f + 60.0f * u(rng)};
  const float tilt = 40.0f * (u(rng) - 0.5f);
  std::vector<float> bg(s.width * s.height * 3);
  for (std::size_t y = 0; y < s.height; ++y)
    for (std::size_t x = 0; x < s.width; ++x)
      for (int c = 0; c < 3; ++c)
        bg[(y * s.width + x) * 3 + c] = base[c] + tilt * (static_cast<float>(y) / static_cast<float>(s.height) - 0.5f);

  for (std::size_t k = 0; k < s.clutter; ++k) {
    SceneObject blob;
    blob.shape = static_cast<ShapeKind>(rng() % 3);
    blob.width = 0.05f + 0.15f * u(rng);
    blob.height = blob.width * (0.6f + 0.8f * u(rng));
    const double cx = u(rng), cy = u(rng);
    float col[3];
    for (auto& c : col) c = 50.0f + 150.0f * u(rng);
    const float alpha = 0.35f + 0.3f * u(rng);
    for (std::size_t y = 0; y < s.height; ++y)
      for (std::size_t x = 0; x < s.width; ++x) {
        const double uu = (x + 0.5) / static_cast<double>(s.width), vv = (y + 0.5) / static_cast<double>(s.height);
        if (!covers(blob, cx, cy, uu, vv)) continue;
        for (int c = 0; c < 3; ++c) {
          float& p = bg[(y * s.width + x) * 3 + c];
          p = (1.0f - alpha) * p + alpha * col[c];
        }
      }
  }
  return bg;
}

}  // namespace

RenderedSequence render_sequence(const SceneScript& script) {
  validate(script);
  const std::size_t W = script.width, H = script.height, T = script.num_frames;
  const std::size_t npx = W * H;
  const std::vector<float> background = render_background(script);

  RenderedSequence seq;
  seq.frames.reserve(T);
  seq.labels.resize(T);
  seq.label_objects.resize(T);
  seq.visible.resize(T);

  std::vector<std::uint16_t> hits(npx);
  for (std::size_t t = 0; t < T; ++t) {
    std::vector<float> buf = background;
    auto& visible = seq.visible[t];
    visible.assign(script.objects.size(), std::vector<std::uint8_t>(npx, 0));

    const double exposure = blur_exposure(script, t);
    const std::size_t subframes = exposure > 0.0 ? kBlurSubframes : 1;

    for (std::size_t oi = 0; oi < script.objects.size(); ++oi) {
      const auto& obj = script.objects[oi];
      std::fill(hits.begin(), hits.end(), 0);
      for (std::size_t k = 0; k < subframes; ++k) {
        const double tt = static_cast<double>(t) - (subframes > 1 ? exposure * k / (subframes - 1) : 0.0);
        const auto p = object_position(script, obj, tt);
        const long x0 = std::max(0L, static_cast<long>(std::floor((p[0] - obj.width) * W)));
        const long x1 = std::min(static_cast<long>(W) - 1, static_cast<long>(std::ceil((p[0] + obj.width) * W)));
        const long y0 = std::max(0L, static_cast<long>(std::floor((p[1] - obj.height) * H)));
        const long y1 = std::min(static_cast<long>(H) - 1, static_cast<long>(std::ceil((p[1] + obj.height) * H)));
        for (long y = y0; y <= y1; ++y)
          for (long x = x0; x <= x1; ++x) {
            const double u = (x + 0.5) / static_cast<double>(W), v = (y + 0.5) / static_cast<double>(H);
            if (!covers(obj, p[0], p[1], u, v)) continue;
            const std::size_t idx = static_cast<std::size_t>(y) * W + static_cast<std::size_t>(x);
            ++hits[idx];
            if (k == 0) visible[oi][idx] = 1;
          }
      }
      for (std::size_t idx = 0; idx < npx; ++idx) {
        if (!hits[idx]) continue;
        const float alpha = static_cast<float>(hits[idx]) / static_cast<float>(subframes);
        for (int c = 0; c < 3; ++c) buf[idx * 3 + c] = (1.0f - alpha) * buf[idx * 3 + c] + alpha * obj.color[c];
        // Later objects hide earlier ones where they are sharp.
        if (visible[oi][idx])
          for (std::size_t prev = 0; prev < oi; ++prev) visible[prev][idx] = 0;
      }
    }

    for (const auto& d : script.degradations) {
      if (d.kind != DegradationKind::OccluderSweep || !active(d, static_cast<double>(t))) continue;
      const double bw = 0.15 + 0.35 * d.intensity;
      const double f = (static_cast<double>(t - d.start) + 0.5) / static_cast<double>(d.end - d.start);
      double centre = -0.5 * bw + f * (1.0 + bw);
      if (d.x < 0.5) centre = 1.0 - centre;
      for (std::size_t x = 0; x < W; ++x) {
        const double u = (x + 0.5) / static_cast<double>(W);
        if (std::fabs(u - centre) > 0.5 * bw) continue;
        for (std::size_t y = 0; y < H; ++y) {
          const std::size_t idx = y * W + x;
          const float shade = 45.0f + 10.0f * static_cast<float>((x / 2 + y / 3) % 2);
          buf[idx * 3 + 0] = shade;
          buf[idx * 3 + 1] = shade;
          buf[idx * 3 + 2] = shade + 5.0f;
          for (auto& vis : visible) vis[idx] = 0;
        }
      }
    }

    for (const auto& d : script.degradations) {
      if (d.kind != DegradationKind::Glare || !active(d, static_cast<double>(t))) continue;
      // Flickers between full and 30% strength on alternate frames, drifting slowly.
      const double amp = d.intensity * (((t - d.start) % 2 == 0) ? 1.0 : 0.3);
      const double r = 0.2 + 0.15 * d.intensity;
      const double gx = d.x + 0.004 * static_cast<double>(t - d.start);
      const double gy = d.y;
      for (std::size_t y = 0; y < H; ++y)
        for (std::size_t x = 0; x < W; ++x) {
          const double u = (x + 0.5) / static_cast<double>(W), v = (y + 0.5) / static_cast<double>(H);
          const double dist = std::hypot((u - gx) / 1.3, v - gy) / r;
          if (dist >= 1.0) continue;
          const double fall = dist < 0.6 ? 1.0 : (1.0 - dist) / 0.4;
          const double add = 255.0 * 1.6 * amp * fall;
          const std::size_t idx = y * W + x;
          buf[idx * 3 + 0] += static_cast<float>(add);
          buf[idx * 3 + 1] += static_cast<float>(add * 0.98);
          buf[idx * 3 + 2] += static_cast<float>(add * 0.86);
        }
    }

    Image frame(W, H);
    std::mt19937_64 noise_rng(script.seed * 0x100000001b3ULL + t + 1);
    std::normal_distribution<float> noise(0.0f, 255.0f * script.noise);
    for (std::size_t i = 0; i < buf.size(); ++i) {
      const float v = buf[i] + (script.noise > 0.0f ? noise(noise_rng) : 0.0f);
      frame.rgb[i] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
    }
    seq.frames.push_back(std::move(frame));

    for (std::size_t oi = 0; oi < script.objects.size(); ++oi) {
      const auto& obj = script.objects[oi];
      const auto p = object_position(script, obj, static_cast<double>(t));
      const double x1 = p[0] - 0.5 * obj.width, x2 = p[0] + 0.5 * obj.width;
      const double y1 = p[1] - 0.5 * obj.height, y2 = p[1] + 0.5 * obj.height;
      const double cx1 = std::max(0.0, x1), cx2 = std::min(1.0, x2);
      const double cy1 = std::max(0.0, y1), cy2 = std::min(1.0, y2);
      if (cx2 <= cx1 || cy2 <= cy1) continue;
      const double kept = (cx2 - cx1) * (cy2 - cy1) / (static_cast<double>(obj.width) * obj.height);
      if (kept < kMinVisibleAreaFraction) continue;
      const auto& vis = visible[oi];
      if (std::none_of(vis.begin(), vis.end(), [](std::uint8_t v) { return v != 0; })) continue;
      BoxLabel label;
      label.class_id = obj.class_id;
      label.box = {static_cast<float>(0.5 * (cx1 + cx2)), static_cast<float>(0.5 * (cy1 + cy2)),
                   static_cast<float>(cx2 - cx1), static_cast<float>(cy2 - cy1)};
      seq.labels[t].push_back(label);
      seq.label_objects[t].push_back(static_cast<int>(oi));
    }
  }
  return seq;
}

const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names = {"static", "clean", "occlusion", "blur",
                                                 "boundary-exit", "glare", "mixed"};
  return names;
}

namespace {

Degradation random_window(std::mt19937_64& rng, DegradationKind kind, std::size_t frames, std::size_t min_len,
                          std::size_t max_len, float min_intensity) {
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  Degradation d;
  d.kind = kind;
  max_len = std::max(max_len, min_len);
  const std::size_t len =
      std::clamp<std::size_t>(min_len + static_cast<std::size_t>(rng() % (max_len - min_len + 1)), 1, frames);
  d.start = frames > len ? static_cast<std::size_t>(rng() % (frames - len + 1)) : 0;
  d.end = d.start + len;
  d.intensity = min_intensity + (1.0f - min_intensity) * u(rng);
  d.x = u(rng);
  d.y = u(rng);
  return d;
}

}  // namespace

SceneScript make_preset(const std::string& name, std::uint64_t seed, std::size_t index, std::size_t num_frames,
                        std::size_t size) {
  const auto& names = preset_names();
  if (std::find(names.begin(), names.end(), name) == names.end()) {
    std::string list;
    for (const auto& n : names) list += (list.empty() ? "" : ", ") + n;
    throw ConfigError("unknown preset '" + name + "'; available presets: " + list);
  }
  std::mt19937_64 rng(seed * 1000003ULL + index * 7919ULL + 17);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);

  SceneScript s;
  s.seed = rng();
  s.num_frames = num_frames;
  s.width = size;
  s.height = size;
  s.noise = name == "static" ? 0.0f : 0.03f;
  s.clutter = name == "static" ? 0 : 4;

  const bool moving = name != "static";
  const float speed_scale = name == "blur" || name == "mixed" ? 1.5f : 1.0f;
  const std::size_t count = 2 + rng() % 3;
  for (std::size_t i = 0; i < count; ++i) {
    SceneObject o;
    o.shape = static_cast<ShapeKind>(rng() % 3);
    o.width = 0.12f + 0.12f * u(rng);
    o.height = o.width * (0.8f + 0.45f * u(rng));
    o.height = std::min(o.height, 0.3f);
    const float hue = u(rng);
    o.color = {static_cast<std::uint8_t>(120 + 135 * std::fabs(std::sin(6.2832f * hue))),
               static_cast<std::uint8_t>(120 + 135 * std::fabs(std::sin(6.2832f * (hue + 0.33f)))),
               static_cast<std::uint8_t>(120 + 135 * std::fabs(std::sin(6.2832f * (hue + 0.66f))))};
    o.trajectory.x0 = 0.2f + 0.6f * u(rng);
    o.trajectory.y0 = 0.2f + 0.6f * u(rng);
    if (moving) {
      const float angle = 6.2832f * u(rng);
      const float speed = speed_scale * (0.004f + 0.008f * u(rng));
      o.trajectory.vx = speed * std::cos(angle);
      o.trajectory.vy = speed * std::sin(angle);
      if (rng() % 2) {
        o.trajectory.amp_x = 0.04f * u(rng);
        o.trajectory.amp_y = 0.04f * u(rng);
        o.trajectory.period = 16.0f + 24.0f * u(rng);
        o.trajectory.phase = 6.2832f * u(rng);
      }
      // Keep the undisturbed path mostly inside the frame.
      const double t_end = static_cast<double>(num_frames);
      const double xe = o.trajectory.x0 + o.trajectory.vx * t_end;
      const double ye = o.trajectory.y0 + o.trajectory.vy * t_end;
      if (xe < 0.1 || xe > 0.9) o.trajectory.vx = -o.trajectory.vx;
      if (ye < 0.1 || ye > 0.9) o.trajectory.vy = -o.trajectory.vy;
    }
    s.objects.push_back(o);
  }

  const std::size_t T = num_frames;
  auto add = [&](DegradationKind kind, std::size_t min_len, std::size_t max_len, float min_intensity) {
    if (T < 2) return;
    auto d = random_window(rng, kind, T, std::min(min_len, T), std::min(max_len, T), min_intensity);
    if (kind == DegradationKind::Glare) {
      // Aim the glare at one of the objects.
      const auto& target = s.objects[rng() % s.objects.size()];
      const auto p = target.trajectory.at(static_cast<double>(d.start));
      d.x = static_cast<float>(p[0]);
      d.y = static_cast<float>(p[1]);
    }
    s.degradations.push_back(d);
  };
  if (name == "occlusion") {
    add(DegradationKind::OccluderSweep, 6, 12, 0.5f);
    add(DegradationKind::OccluderSweep, 6, 12, 0.5f);
  } else if (name == "blur") {
    add(DegradationKind::MotionBlur, T / 2, T, 0.6f);
  } else if (name == "boundary-exit") {
    add(DegradationKind::BoundaryExit, 8, 16, 0.5f);
  } else if (name == "glare") {
    add(DegradationKind::Glare, 8, 12, 0.7f);
    add(DegradationKind::Glare, 8, 12, 0.7f);
  } else if (name == "mixed") {
    add(DegradationKind::OccluderSweep, 6, 12, 0.5f);
    add(DegradationKind::MotionBlur, T / 3, T / 2, 0.6f);
    add(DegradationKind::BoundaryExit, 8, 16, 0.5f);
    add(DegradationKind::Glare, 8, 12, 0.7f);
  }
  return s;
}

}  // namespace mfdet
