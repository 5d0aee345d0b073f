#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "towerlab/env/types.hpp"

namespace towerlab::env {

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  bool operator==(const Rgb&) const = default;
};

enum class Texture : std::uint8_t { checker, stripes, dots, bricks, grid };

struct ThemePalette {
  Rgb void_color;
  Rgb wall, wall_alt;
  Rgb floor, floor_alt;
  Rgb gap;
  Rgb door, locked_door;
  Rgb key, orb, exit;
  Rgb agent;
  Texture texture;
};

// Ancient is deliberately low contrast: everything sits in brown hues,
// including the key.
inline const ThemePalette& palette(Theme t) {
  static const std::array<ThemePalette, 5> table{{
      {{40, 30, 20}, {96, 72, 48}, {88, 66, 44}, {122, 94, 62}, {114, 88, 58}, {58, 42, 28},
       {142, 106, 68}, {152, 98, 52}, {172, 132, 72}, {132, 112, 90}, {138, 112, 76}, {160, 128, 96},
       Texture::checker},
      {{10, 10, 12}, {70, 75, 80}, {58, 62, 66}, {142, 142, 136}, {120, 120, 118}, {18, 18, 24},
       {204, 160, 40}, {204, 58, 40}, {250, 222, 0}, {60, 140, 255}, {40, 200, 80}, {232, 232, 232},
       Texture::stripes},
      {{0, 0, 30}, {222, 226, 236}, {200, 206, 220}, {176, 198, 222}, {160, 184, 212}, {10, 10, 42},
       {60, 120, 222}, {222, 40, 82}, {255, 196, 0}, {0, 182, 255}, {0, 222, 122}, {30, 30, 30}, Texture::grid},
      {{30, 10, 10}, {150, 62, 40}, {132, 52, 34}, {40, 132, 122}, {230, 200, 150}, {32, 20, 50},
       {200, 170, 60}, {122, 30, 122}, {250, 250, 120}, {80, 80, 255}, {250, 120, 40}, {255, 255, 255},
       Texture::dots},
      {{0, 0, 0}, {22, 22, 44}, {40, 10, 70}, {30, 30, 62}, {0, 200, 200}, {0, 0, 0}, {255, 0, 255},
       {255, 62, 0}, {0, 255, 122}, {122, 200, 255}, {255, 255, 0}, {255, 255, 255}, Texture::bricks},
  }};
  return table[static_cast<std::size_t>(t)];
}

// Egocentric top-down rasterizer. The window spans view_ahead cells in front
// of the agent, view_behind behind and view_side to each side, rotated so
// the heading points up. Cells are square tiles; leftover pixels take the
// theme's void color. Output is H x W x 3 bytes, row-major.
class Renderer {
 public:
  Renderer(const EnvConfig& cfg, Theme theme) : cfg_(cfg), theme_(theme) {
    rows_ = cfg.view_ahead + 1 + cfg.view_behind;
    cols_ = 2 * cfg.view_side + 1;
    cell_ = std::min(cfg.frame_height / rows_, cfg.frame_width / cols_);
    top_ = (cfg.frame_height - rows_ * cell_) / 2;
    left_ = (cfg.frame_width - cols_ * cell_) / 2;
    build_tiles();
  }

  int cell_pixels() const noexcept { return cell_; }
  Theme theme() const noexcept { return theme_; }

  // World cell shown at screen cell (row, col), row 0 = farthest ahead.
  GridPos world_cell(const EnvState& s, int row, int col) const {
    const int forward = cfg_.view_ahead - row;
    const int lateral = col - cfg_.view_side;
    GridPos p = s.position;
    const Heading right = turn_right(s.heading);
    for (int i = 0; i < std::abs(forward); ++i) p = step_towards(p, forward > 0 ? s.heading : turn_left(turn_left(s.heading)));
    for (int i = 0; i < std::abs(lateral); ++i) p = step_towards(p, lateral > 0 ? right : turn_left(s.heading));
    return p;
  }

  void render(const EnvState& s, std::vector<std::uint8_t>& out) const {
    const int H = cfg_.frame_height, W = cfg_.frame_width;
    out.resize(static_cast<std::size_t>(H * W * 3));
    const auto& pal = palette(theme_);
    for (std::size_t i = 0; i < out.size(); i += 3) {
      out[i] = pal.void_color.r;
      out[i + 1] = pal.void_color.g;
      out[i + 2] = pal.void_color.b;
    }
    for (int row = 0; row < rows_; ++row)
      for (int col = 0; col < cols_; ++col) {
        const GridPos p = world_cell(s, row, col);
        const Cell c = s.layout.at(p);
        const int parity = (p.x + p.y) & 1;
        const bool agent = row == cfg_.view_ahead && col == cfg_.view_side;
        const auto& tile = agent ? agent_tiles_[parity] : tiles_[static_cast<std::size_t>(c)][parity];
        for (int v = 0; v < cell_; ++v) {
          std::uint8_t* dst = out.data() + (static_cast<std::size_t>(top_ + row * cell_ + v) * W + left_ + col * cell_) * 3;
          const std::uint8_t* src = tile.data() + static_cast<std::size_t>(v * cell_) * 3;
          std::copy(src, src + cell_ * 3, dst);
        }
      }
  }

 private:
  using Tile = std::vector<std::uint8_t>;

  static void put(Tile& t, int cell, int u, int v, Rgb c) {
    auto* p = t.data() + static_cast<std::size_t>(v * cell + u) * 3;
    p[0] = c.r;
    p[1] = c.g;
    p[2] = c.b;
  }

  Rgb floor_texel(int u, int v, int parity) const {
    const auto& pal = palette(theme_);
    bool alt = false;
    switch (pal.texture) {
      case Texture::checker: alt = parity == 1; break;
      case Texture::stripes: alt = ((u + v) / 2) % 2 == 0; break;
      case Texture::dots: alt = std::abs(2 * u - cell_ + 1) <= cell_ / 3 && std::abs(2 * v - cell_ + 1) <= cell_ / 3; break;
      case Texture::bricks: alt = v == 0 || u == ((v < cell_ / 2) ? 0 : cell_ / 2); break;
      case Texture::grid: alt = u == 0 || v == 0; break;
    }
    return alt ? pal.floor_alt : pal.floor;
  }

  void build_tiles() {
    const auto& pal = palette(theme_);
    const int n = cell_;
    const int mid2 = n - 1;  // doubled centre coordinate
    for (std::size_t kind = 0; kind < tiles_.size(); ++kind)
      for (int parity = 0; parity < 2; ++parity) {
        Tile t(static_cast<std::size_t>(n * n * 3));
        for (int v = 0; v < n; ++v)
          for (int u = 0; u < n; ++u) {
            const int du = std::abs(2 * u - mid2), dv = std::abs(2 * v - mid2);
            Rgb c = floor_texel(u, v, parity);
            switch (static_cast<Cell>(kind)) {
              case Cell::wall: c = (v % std::max(2, n / 2) == 0) ? pal.wall_alt : pal.wall; break;
              case Cell::open:
              case Cell::start: break;
              case Cell::gap: c = pal.gap; break;
              case Cell::door:
                if (u < 2 || u >= n - 2 || v < 1) c = pal.door;
                break;
              case Cell::locked_door: c = (dv <= n / 4) ? pal.door : pal.locked_door; break;
              case Cell::key:
                if (du + dv <= 2 * n / 3) c = pal.key;
                break;
              case Cell::orb:
                if (du * du + dv * dv <= (2 * n / 3) * (2 * n / 3)) c = pal.orb;
                break;
              case Cell::exit: c = (du <= n / 3 && dv <= n / 3) ? pal.floor_alt : pal.exit; break;
            }
            put(t, n, u, v, c);
          }
        tiles_[kind][static_cast<std::size_t>(parity)] = std::move(t);
      }
    for (int parity = 0; parity < 2; ++parity) {
      Tile t(static_cast<std::size_t>(n * n * 3));
      for (int v = 0; v < n; ++v)
        for (int u = 0; u < n; ++u) {
          // Upward-pointing triangle.
          const bool inside = v >= 1 && v <= n - 2 && std::abs(2 * u - mid2) <= v;
          put(t, n, u, v, inside ? pal.agent : floor_texel(u, v, parity));
        }
      agent_tiles_[static_cast<std::size_t>(parity)] = std::move(t);
    }
  }

  EnvConfig cfg_;
  Theme theme_;
  int rows_ = 0, cols_ = 0, cell_ = 0, top_ = 0, left_ = 0;
  std::array<std::array<Tile, 2>, 9> tiles_;
  std::array<Tile, 2> agent_tiles_;
};

inline std::vector<std::uint8_t> render(const EnvState& state, Theme theme, const EnvConfig& cfg) {
  std::vector<std::uint8_t> out;
  Renderer(cfg, theme).render(state, out);
  return out;
}

}  // namespace towerlab::env
