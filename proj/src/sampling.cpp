#include "mfdet/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mfdet/error.hpp"

namespace mfdet {

std::vector<int> resolve_offsets(const SamplingSpec& spec) {
  switch (spec.kind) {
    case SamplingSpec::Kind::Adjacent:
    case SamplingSpec::Kind::Stepped: {
      if (spec.frames == 0) throw ConfigError("sampling needs at least one frame");
      const std::size_t step = spec.kind == SamplingSpec::Kind::Adjacent ? 1 : spec.step;
      if (step == 0) throw ConfigError("sampling step must be >= 1");
      std::vector<int> offsets;
      for (std::size_t i = spec.frames; i-- > 0;) offsets.push_back(-static_cast<int>(i * step));
      return offsets;
    }
    case SamplingSpec::Kind::Explicit: {
      const auto& o = spec.offsets;
      if (o.empty() || o.back() != 0) throw ConfigError("explicit offsets must end at 0");
      for (std::size_t i = 1; i < o.size(); ++i)
        if (o[i] <= o[i - 1]) throw ConfigError("explicit offsets must be strictly increasing");
      return o;
    }
  }
  throw ConfigError("unknown sampling kind");
}

std::string to_string(const SamplingSpec& spec) {
  std::ostringstream os;
  switch (spec.kind) {
    case SamplingSpec::Kind::Adjacent:
      os << "adjacent:" << spec.frames;
      break;
    case SamplingSpec::Kind::Stepped:
      os << "stepped:" << spec.frames << ':' << spec.step;
      break;
    case SamplingSpec::Kind::Explicit:
      os << "explicit:";
      for (std::size_t i = 0; i < spec.offsets.size(); ++i) os << (i ? "," : "") << spec.offsets[i];
      break;
  }
  return os.str();
}

namespace {

long parse_int(const std::string& s, const std::string& whole) {
  try {
    std::size_t used = 0;
    const long v = std::stol(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("bad number '" + s + "' in sampling spec '" + whole + "'");
  }
}

}  // namespace

SamplingSpec parse_sampling(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos)
    throw ConfigError("sampling must look like adjacent:<n>, stepped:<n>:<s> or explicit:<offsets>, got '" + text +
                      "'");
  const std::string kind = text.substr(0, colon);
  const std::string rest = text.substr(colon + 1);
  SamplingSpec spec;
  if (kind == "adjacent") {
    const long n = parse_int(rest, text);
    if (n < 1) throw ConfigError("sampling frame count must be >= 1");
    spec = SamplingSpec::adjacent(static_cast<std::size_t>(n));
  } else if (kind == "stepped") {
    const auto c2 = rest.find(':');
    if (c2 == std::string::npos) throw ConfigError("stepped sampling needs <n>:<step>, got '" + text + "'");
    const long n = parse_int(rest.substr(0, c2), text);
    const long s = parse_int(rest.substr(c2 + 1), text);
    if (n < 1 || s < 1) throw ConfigError("stepped sampling needs n >= 1 and step >= 1");
    spec = SamplingSpec::stepped(static_cast<std::size_t>(n), static_cast<std::size_t>(s));
  } else if (kind == "explicit") {
    std::vector<int> offsets;
    std::stringstream ss(rest);
    std::string item;
    while (std::getline(ss, item, ',')) offsets.push_back(static_cast<int>(parse_int(item, text)));
    spec = SamplingSpec::explicit_offsets(std::move(offsets));
  } else {
    throw ConfigError("unknown sampling kind '" + kind + "'");
  }
  resolve_offsets(spec);
  return spec;
}

FrameStack build_stack(const Sequence& sequence, std::size_t t, const SamplingSpec& spec) {
  if (t >= sequence.frames.size())
    throw ConfigError("target index " + std::to_string(t) + " outside sequence of " +
                      std::to_string(sequence.frames.size()) + " frames");
  FrameStack stack;
  stack.offsets = resolve_offsets(spec);
  stack.sequence_id = sequence.id;
  stack.target_index = t;
  for (int off : stack.offsets) {
    const long idx = std::max(0L, static_cast<long>(t) + off);
    stack.frames.push_back(sequence.frames[static_cast<std::size_t>(idx)]);
  }
  if (t < sequence.labels.size() && sequence.labels[t]) stack.labels = *sequence.labels[t];
  return stack;
}

AugmentParams draw_augment(std::mt19937_64& rng, const AugmentRanges& ranges) {
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  AugmentParams p;
  p.flip = u(rng) < ranges.flip_probability;
  p.dx = ranges.max_translate * (2.0f * u(rng) - 1.0f);
  p.dy = ranges.max_translate * (2.0f * u(rng) - 1.0f);
  p.scale = ranges.min_scale + (ranges.max_scale - ranges.min_scale) * u(rng);
  return p;
}

FrameStack augment_stack(const FrameStack& stack, const AugmentParams& params) {
  if (params.is_identity()) return stack;
  if (!(params.scale > 0.0f)) throw ConfigError("augment scale must be positive");
  FrameStack out = stack;
  for (auto& frame : out.frames) {
    const Image& src = frame;
    Image dst(src.width, src.height, kFillValue);
    const double W = static_cast<double>(src.width), H = static_cast<double>(src.height);
    for (std::size_t y = 0; y < src.height; ++y) {
      const double v = ((y + 0.5) / H - 0.5 - params.dy) / params.scale + 0.5;
      const double sy = std::floor(v * H);
      if (sy < 0.0 || sy >= H) continue;
      for (std::size_t x = 0; x < src.width; ++x) {
        double u = (x + 0.5) / W;
        if (params.flip) u = 1.0 - u;
        u = (u - 0.5 - params.dx) / params.scale + 0.5;
        const double sx = std::floor(u * W);
        if (sx < 0.0 || sx >= W) continue;
        const auto* p = src.pixel(static_cast<std::size_t>(sx), static_cast<std::size_t>(sy));
        auto* q = dst.pixel(x, y);
        q[0] = p[0];
        q[1] = p[1];
        q[2] = p[2];
      }
    }
    frame = std::move(dst);
  }

  out.labels.clear();
  for (const auto& label : stack.labels) {
    double cx = (label.box.cx - 0.5) * params.scale + 0.5 + params.dx;
    const double cy = (label.box.cy - 0.5) * params.scale + 0.5 + params.dy;
    if (params.flip) cx = 1.0 - cx;
    const double w = static_cast<double>(label.box.w) * params.scale;
    const double h = static_cast<double>(label.box.h) * params.scale;
    const double x1 = std::max(0.0, cx - 0.5 * w), x2 = std::min(1.0, cx + 0.5 * w);
    const double y1 = std::max(0.0, cy - 0.5 * h), y2 = std::min(1.0, cy + 0.5 * h);
    if (x2 <= x1 || y2 <= y1) continue;
    if ((x2 - x1) * (y2 - y1) < kMinAugmentedAreaFraction * w * h) continue;
    BoxLabel l = label;
    const bool clipped = x1 != cx - 0.5 * w || x2 != cx + 0.5 * w || y1 != cy - 0.5 * h || y2 != cy + 0.5 * h;
    if (clipped) {
      l.box = {static_cast<float>(0.5 * (x1 + x2)), static_cast<float>(0.5 * (y1 + y2)), static_cast<float>(x2 - x1),
               static_cast<float>(y2 - y1)};
    } else {
      l.box = {static_cast<float>(cx), static_cast<float>(cy), static_cast<float>(w), static_cast<float>(h)};
    }
    out.labels.push_back(l);
  }
  return out;
}

Tensor stacks_to_tensor(const std::vector<const FrameStack*>& stacks) {
  if (stacks.empty() || stacks.front()->frames.empty()) throw ShapeError("cannot convert an empty stack");
  const std::size_t n = stacks.front()->frames.size();
  const std::size_t W = stacks.front()->frames.front().width, H = stacks.front()->frames.front().height;
  Tensor t(Shape{stacks.size(), 3 * n, H, W});
  const std::size_t plane = H * W;
  for (std::size_t b = 0; b < stacks.size(); ++b) {
    const auto& frames = stacks[b]->frames;
    if (frames.size() != n) throw ShapeError("stacks in a batch must have the same frame count");
    for (std::size_t f = 0; f < n; ++f) {
      const Image& img = frames[f];
      if (img.width != W || img.height != H)
        throw ShapeError("frame " + std::to_string(f) + " is " + std::to_string(img.width) + "x" +
                         std::to_string(img.height) + ", expected " + std::to_string(W) + "x" + std::to_string(H));
      float* base = t.raw() + (b * 3 * n + 3 * f) * plane;
      for (std::size_t i = 0; i < plane; ++i)
        for (std::size_t c = 0; c < 3; ++c) base[c * plane + i] = static_cast<float>(img.rgb[i * 3 + c]) / 255.0f;
    }
  }
  return t;
}

Tensor stack_to_tensor(const FrameStack& stack) { return stacks_to_tensor({&stack}); }

}  // namespace mfdet
