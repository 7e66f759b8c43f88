#include "mfdet/image.hpp"

#include <algorithm>
#include <cmath>
#include <cctype>
#include <fstream>
#include <string>

#include "mfdet/error.hpp"

namespace mfdet {

void write_ppm(const Image& image, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open '" + path.string() + "' for writing");
  out << "P6\n" << image.width << ' ' << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.rgb.data()), static_cast<std::streamsize>(image.rgb.size()));
  if (!out) throw FormatError("failed writing '" + path.string() + "'");
}

namespace {

std::size_t read_header_int(std::istream& in, const std::filesystem::path& path) {
  // Skips whitespace and '#' comments between header tokens.
  int c = in.peek();
  while (c != EOF) {
    if (std::isspace(c)) {
      in.get();
    } else if (c == '#') {
      std::string line;
      std::getline(in, line);
    } else {
      break;
    }
    c = in.peek();
  }
  long value = -1;
  if (!(in >> value) || value <= 0) throw FormatError("bad PPM header in '" + path.string() + "'");
  return static_cast<std::size_t>(value);
}

}  // namespace

Image read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path.string() + "'");
  char magic[2] = {};
  in.read(magic, 2);
  if (!in || magic[0] != 'P' || magic[1] != '6') throw FormatError("'" + path.string() + "' is not a P6 PPM");
  const std::size_t w = read_header_int(in, path);
  const std::size_t h = read_header_int(in, path);
  const std::size_t maxval = read_header_int(in, path);
  if (maxval != 255) throw FormatError("only 8-bit PPM is supported: '" + path.string() + "'");
  in.get();  // single whitespace before the raster
  Image image(w, h);
  in.read(reinterpret_cast<char*>(image.rgb.data()), static_cast<std::streamsize>(image.rgb.size()));
  if (in.gcount() != static_cast<std::streamsize>(image.rgb.size()))
    throw FormatError("truncated PPM raster in '" + path.string() + "'");
  return image;
}

std::uint8_t luminance(const std::uint8_t* px) {
  const double y = 0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2];
  return static_cast<std::uint8_t>(std::clamp(std::lround(y), 0L, 255L));
}

void draw_box(Image& image, float cx, float cy, float w, float h, std::array<std::uint8_t, 3> color) {
  if (image.width == 0 || image.height == 0) return;
  const auto clampx = [&](double v) {
    return static_cast<long>(std::clamp(std::floor(v), 0.0, static_cast<double>(image.width - 1)));
  };
  const auto clampy = [&](double v) {
    return static_cast<long>(std::clamp(std::floor(v), 0.0, static_cast<double>(image.height - 1)));
  };
  const long x1 = clampx((cx - 0.5 * w) * image.width), x2 = clampx((cx + 0.5 * w) * image.width);
  const long y1 = clampy((cy - 0.5 * h) * image.height), y2 = clampy((cy + 0.5 * h) * image.height);
  auto put = [&](long x, long y) {
    auto* p = image.pixel(static_cast<std::size_t>(x), static_cast<std::size_t>(y));
    p[0] = color[0];
    p[1] = color[1];
    p[2] = color[2];
  };
  for (long x = x1; x <= x2; ++x) {
    put(x, y1);
    put(x, y2);
  }
  for (long y = y1; y <= y2; ++y) {
    put(x1, y);
    put(x2, y);
  }
}

}  // namespace mfdet
