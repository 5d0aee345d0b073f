#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "towerlab/core/errors.hpp"
#include "towerlab/env/render.hpp"

namespace towerlab::eval {

using env::Rgb;

// RGB raster, row-major, 3 bytes per pixel.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;

  Image() = default;
  Image(int w, int h, Rgb fill = {}) : width(w), height(h), rgb(static_cast<std::size_t>(w * h * 3)) {
    for (int i = 0; i < w * h; ++i) {
      rgb[3 * i] = fill.r;
      rgb[3 * i + 1] = fill.g;
      rgb[3 * i + 2] = fill.b;
    }
  }

  bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width && y < height; }

  Rgb at(int x, int y) const {
    const auto k = static_cast<std::size_t>((y * width + x) * 3);
    return {rgb[k], rgb[k + 1], rgb[k + 2]};
  }

  void set(int x, int y, Rgb c) {
    if (!contains(x, y)) return;
    const auto k = static_cast<std::size_t>((y * width + x) * 3);
    rgb[k] = c.r;
    rgb[k + 1] = c.g;
    rgb[k + 2] = c.b;
  }

  // alpha in [0, 1]
  void blend(int x, int y, Rgb c, double alpha) {
    if (!contains(x, y)) return;
    const Rgb o = at(x, y);
    auto mix = [alpha](std::uint8_t a, std::uint8_t b) {
      return static_cast<std::uint8_t>(std::lround(a * (1 - alpha) + b * alpha));
    };
    set(x, y, {mix(o.r, c.r), mix(o.g, c.g), mix(o.b, c.b)});
  }

  void fill_rect(int x0, int y0, int w, int h, Rgb c) {
    for (int y = y0; y < y0 + h; ++y)
      for (int x = x0; x < x0 + w; ++x) set(x, y, c);
  }

  void outline_rect(int x0, int y0, int w, int h, Rgb c) {
    for (int x = x0; x < x0 + w; ++x) {
      set(x, y0, c);
      set(x, y0 + h - 1, c);
    }
    for (int y = y0; y < y0 + h; ++y) {
      set(x0, y, c);
      set(x0 + w - 1, y, c);
    }
  }

  void line(int x0, int y0, int x1, int y1, Rgb c) {
    const int dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
    const int sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
    int err = dx + dy;
    for (;;) {
      set(x0, y0, c);
      if (x0 == x1 && y0 == y1) break;
      const int e2 = 2 * err;
      if (e2 >= dy) {
        err += dy;
        x0 += sx;
      }
      if (e2 <= dx) {
        err += dx;
        y0 += sy;
      }
    }
  }
};

// Binary PPM (P6).
inline void write_ppm(const std::string& path, const Image& img) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  os << "P6\n" << img.width << ' ' << img.height << "\n255\n";
  os.write(reinterpret_cast<const char*>(img.rgb.data()), static_cast<std::streamsize>(img.rgb.size()));
  if (!os) throw IoError("write to '" + path + "' failed");
}

inline Image read_ppm(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open '" + path + "'");
  std::string magic;
  int w = 0, h = 0, maxv = 0;
  is >> magic >> w >> h >> maxv;
  if (magic != "P6" || w <= 0 || h <= 0 || maxv != 255) throw ParseError(path + ": not a binary 8-bit PPM", 0);
  is.get();
  Image img(w, h);
  is.read(reinterpret_cast<char*>(img.rgb.data()), static_cast<std::streamsize>(img.rgb.size()));
  if (!is) throw ParseError(path + ": truncated pixel data", static_cast<long long>(is.gcount()));
  return img;
}

// A few fixed colors for line plots, one per theme.
inline Rgb series_color(std::size_t i) {
  static const Rgb table[] = {{200, 60, 40}, {40, 120, 200}, {60, 160, 60}, {170, 80, 190}, {230, 150, 20},
                              {90, 90, 90}};
  return table[i % (sizeof(table) / sizeof(table[0]))];
}

}  // namespace towerlab::eval
