#pragma once

#include <cmath>
#include <cstdlib>
#include <map>
#include <vector>

#include "towerlab/env/floor_gen.hpp"
#include "towerlab/env/recording.hpp"
#include "towerlab/eval/image.hpp"

namespace towerlab::eval {

struct TracePoint {
  int floor = 0;
  env::GridPos position;
  int step = 0;  // agent step at which the position was reached; 0 = episode start
};

// Positions in visiting order. Repeated ticks on the same cell collapse into
// one point, so a stationary agent yields a single point.
inline std::vector<TracePoint> trace_recording(const env::EpisodeRecording& rec) {
  std::vector<TracePoint> out{{rec.start_floor, rec.start, 0}};
  for (std::size_t i = 0; i < rec.steps.size(); ++i)
    for (const auto& t : rec.steps[i].ticks) {
      const auto& last = out.back();
      if (t.floor == last.floor && t.position == last.position) continue;
      out.push_back({t.floor, t.position, static_cast<int>(i + 1)});
    }
  return out;
}

// Consecutive points on the same floor differ by at most one cell.
inline bool trace_is_adjacent(const std::vector<TracePoint>& trace) {
  for (std::size_t i = 1; i < trace.size(); ++i) {
    if (trace[i].floor != trace[i - 1].floor) continue;
    const int d = std::abs(trace[i].position.x - trace[i - 1].position.x) +
                  std::abs(trace[i].position.y - trace[i - 1].position.y);
    if (d > 1) return false;
  }
  return true;
}

// Gradient color for point i of n: red at the first point, blue at the last.
inline Rgb path_color(std::size_t i, std::size_t n) {
  const double t = n > 1 ? static_cast<double>(i) / static_cast<double>(n - 1) : 0.0;
  return {static_cast<std::uint8_t>(std::lround(255.0 * (1.0 - t))), 0, static_cast<std::uint8_t>(std::lround(255.0 * t))};
}

struct PathStyle {
  int cell = 8;   // pixels per grid cell
  int inset = 2;  // path square leaves this margin inside the cell
  Rgb wall{60, 60, 60};
  Rgb open{225, 225, 225};
  Rgb gap{20, 20, 20};
  Rgb door{150, 110, 70};
  Rgb orb{200, 230, 255};
  Rgb exit{80, 200, 120};
  Rgb key_glyph{255, 200, 0};   // outline on the cell border
  Rgb door_glyph{160, 0, 160};  // outline on the cell border
};

inline Rgb base_color(env::Cell c, const PathStyle& s) {
  using env::Cell;
  switch (c) {
    case Cell::wall: return s.wall;
    case Cell::gap: return s.gap;
    case Cell::door:
    case Cell::locked_door: return s.door;
    case Cell::orb: return s.orb;
    case Cell::exit: return s.exit;
    default: return s.open;
  }
}

// Top-down image of one floor with the path drawn over it. `points` must all
// belong to this floor, in visiting order. Key and locked-door cells get
// outline glyphs on their borders, which the inset path squares never touch.
inline Image render_floor_path(const env::FloorLayout& layout, const std::vector<TracePoint>& points,
                               const PathStyle& style = {}) {
  const int s = style.cell;
  Image img(layout.width * s, layout.height * s);
  for (int y = 0; y < layout.height; ++y)
    for (int x = 0; x < layout.width; ++x) img.fill_rect(x * s, y * s, s, s, base_color(layout.at({x, y}), style));
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto p = points[i].position;
    img.fill_rect(p.x * s + style.inset, p.y * s + style.inset, s - 2 * style.inset, s - 2 * style.inset,
                  path_color(i, points.size()));
  }
  for (int y = 0; y < layout.height; ++y)
    for (int x = 0; x < layout.width; ++x) {
      const auto c = layout.at({x, y});
      if (c == env::Cell::key) img.outline_rect(x * s, y * s, s, s, style.key_glyph);
      if (c == env::Cell::locked_door) img.outline_rect(x * s, y * s, s, s, style.door_glyph);
    }
  return img;
}

// One image per floor visited, keyed by floor index. Layouts are regenerated
// from the recording's seed, so the config must be the one it was made with.
inline std::map<int, Image> render_recording_paths(const env::EpisodeRecording& rec, const env::EnvConfig& cfg,
                                                   const PathStyle& style = {}) {
  if (rec.config_hash != cfg.config_hash())
    throw ConfigError("recording was made with a different environment config (hash mismatch)");
  std::map<int, std::vector<TracePoint>> by_floor;
  for (const auto& p : trace_recording(rec)) by_floor[p.floor].push_back(p);
  std::map<int, Image> out;
  for (const auto& [floor, pts] : by_floor) {
    if (floor >= cfg.floor_cap) continue;  // cap reached: no layout past the last floor
    out.emplace(floor, render_floor_path(env::generate_floor(rec.seed, floor, cfg), pts, style));
  }
  return out;
}

}  // namespace towerlab::eval
