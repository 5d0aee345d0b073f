#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "towerlab/core/errors.hpp"

namespace towerlab::env {

enum class Cell : std::uint8_t { wall, open, gap, door, locked_door, key, orb, start, exit };

enum class Theme : std::uint8_t { ancient, industrial, modern, moorish, future };

inline constexpr std::array<Theme, 5> kAllThemes{Theme::ancient, Theme::industrial, Theme::modern, Theme::moorish,
                                                Theme::future};

inline const char* theme_name(Theme t) {
  switch (t) {
    case Theme::ancient: return "ancient";
    case Theme::industrial: return "industrial";
    case Theme::modern: return "modern";
    case Theme::moorish: return "moorish";
    case Theme::future: return "future";
  }
  return "?";
}

inline Theme parse_theme(std::string_view s) {
  for (auto t : kAllThemes)
    if (s == theme_name(t)) return t;
  throw ConfigError("unknown theme '" + std::string(s) + "' (expected ancient, industrial, modern, moorish, future)");
}

// Clockwise from north; grid y grows southwards.
enum class Heading : std::uint8_t { north = 0, east = 1, south = 2, west = 3 };

struct GridPos {
  int x = 0;
  int y = 0;
  bool operator==(const GridPos&) const = default;
};

inline GridPos step_towards(GridPos p, Heading h) {
  static constexpr int dx[4] = {0, 1, 0, -1};
  static constexpr int dy[4] = {-1, 0, 1, 0};
  const auto i = static_cast<int>(h);
  return {p.x + dx[i], p.y + dy[i]};
}

inline Heading turn_left(Heading h) { return static_cast<Heading>((static_cast<int>(h) + 3) % 4); }
inline Heading turn_right(Heading h) { return static_cast<Heading>((static_cast<int>(h) + 1) % 4); }

enum class Move : std::uint8_t { none = 0, forward = 1 };
enum class Jump : std::uint8_t { none = 0, jump = 1 };
enum class Rotate : std::uint8_t { none = 0, left = 1, right = 2 };

// Branch sizes of the reduced action space: move, jump, rotate.
inline const std::vector<std::size_t>& action_branch_sizes() {
  static const std::vector<std::size_t> sizes{2, 2, 3};
  return sizes;
}

struct MultiDiscreteAction {
  Move move = Move::none;
  Jump jump = Jump::none;
  Rotate rotate = Rotate::none;

  bool operator==(const MultiDiscreteAction&) const = default;

  static MultiDiscreteAction from_indices(std::size_t move, std::size_t jump, std::size_t rotate) {
    if (move > 1 || jump > 1 || rotate > 2) throw UsageError("action index out of range for its branch");
    return {static_cast<Move>(move), static_cast<Jump>(jump), static_cast<Rotate>(rotate)};
  }
  static MultiDiscreteAction from_indices(const std::vector<std::size_t>& idx) {
    if (idx.size() != 3) throw UsageError("action needs exactly 3 branch indices");
    return from_indices(idx[0], idx[1], idx[2]);
  }
  std::vector<std::size_t> indices() const {
    return {static_cast<std::size_t>(move), static_cast<std::size_t>(jump), static_cast<std::size_t>(rotate)};
  }
};

struct FloorLayout {
  std::uint64_t seed = 0;
  int floor_index = 0;
  int width = 0;
  int height = 0;
  std::vector<Cell> grid;  // row-major, y * width + x
  Theme theme = Theme::ancient;
  GridPos start;
  Heading start_heading = Heading::north;
  GridPos exit;

  bool in_bounds(GridPos p) const { return p.x >= 0 && p.y >= 0 && p.x < width && p.y < height; }
  Cell at(GridPos p) const { return in_bounds(p) ? grid[static_cast<std::size_t>(p.y * width + p.x)] : Cell::wall; }
  void set(GridPos p, Cell c) { grid[static_cast<std::size_t>(p.y * width + p.x)] = c; }
  int count(Cell c) const {
    int n = 0;
    for (auto g : grid) n += g == c;
    return n;
  }
};

// Dynamics and observation settings. Everything except the render fields
// feeds config_hash().
struct EnvConfig {
  int frame_height = 64;
  int frame_width = 64;
  int stacked_frames = 3;
  int frame_skip = 2;
  int motion_ticks = 2;  // ticks per one-cell move or 90 degree turn
  int floor_cap = 10;
  int key_intro_floor = 2;
  int gap_intro_floor = 4;
  int double_gap_floor = 7;
  int room_size = 7;  // interior cells per room side
  int time_budget = 500;
  int floor_time_bonus = 250;
  int orb_time_bonus = 50;
  bool double_normalization = true;
  int view_ahead = 5;
  int view_behind = 1;
  int view_side = 3;

  void validate() const {
    auto need = [](bool ok, const char* msg) {
      if (!ok) throw ConfigError(msg);
    };
    need(frame_height >= 8 && frame_width >= 8, "env.frame_height/frame_width must be >= 8");
    need(stacked_frames >= 1, "env.stacked_frames must be >= 1");
    need(frame_skip >= 1, "env.frame_skip must be >= 1");
    need(motion_ticks >= 1, "env.motion_ticks must be >= 1");
    need(floor_cap >= 1, "env.floor_cap must be >= 1");
    need(key_intro_floor >= 0 && gap_intro_floor >= 0 && double_gap_floor >= 0, "env intro floors must be >= 0");
    need(room_size >= 5, "env.room_size must be >= 5");
    need(time_budget >= 1, "env.time_budget must be >= 1");
    need(floor_time_bonus >= 0 && orb_time_bonus >= 0, "env time bonuses must be >= 0");
    need(view_ahead >= 1 && view_behind >= 0 && view_side >= 0, "env view extents invalid");
    need(frame_height >= view_ahead + 1 + view_behind && frame_width >= 2 * view_side + 1,
         "env frame too small for the view window");
  }

  // FNV-1a over the fields that determine layouts and dynamics.
  std::uint64_t config_hash() const {
    std::uint64_t h = 0xcbf29ce484222325ull;
    auto mix = [&h](std::int64_t v) {
      for (int i = 0; i < 8; ++i) {
        h ^= static_cast<std::uint64_t>(v >> (8 * i)) & 0xFF;
        h *= 0x100000001b3ull;
      }
    };
    for (int v : {frame_skip, motion_ticks, floor_cap, key_intro_floor, gap_intro_floor, double_gap_floor, room_size,
                  time_budget, floor_time_bonus, orb_time_bonus})
      mix(v);
    return h;
  }
};

enum class Termination : std::uint8_t { none, timeout, fell, floor_cap };

inline const char* termination_name(Termination t) {
  switch (t) {
    case Termination::none: return "none";
    case Termination::timeout: return "timeout";
    case Termination::fell: return "fell";
    case Termination::floor_cap: return "floor_cap";
  }
  return "?";
}

// Agent-visible and bookkeeping state of one environment instance.
struct EnvState {
  FloorLayout layout;
  GridPos position;
  Heading heading = Heading::north;
  bool has_key = false;
  int remaining_time = 0;
  int floor_index = 0;
  bool episode_done = false;
  Termination termination = Termination::none;
  int move_progress = 0;
  int rotate_progress = 0;
  Rotate rotate_dir = Rotate::none;
  // Episode accounting.
  int steps = 0;
  double episode_return = 0;
  int keys_collected = 0;
  int doors_opened = 0;
  int orbs_collected = 0;
};

// Stacked observation. frames: [stacked][H][W][3], oldest frame first.
struct Observation {
  int stacked = 0;
  int height = 0;
  int width = 0;
  std::vector<float> frames;
  std::array<float, 2> game_state{0.f, 0.f};  // has_key, remaining time / budget
};

struct StepInfo {
  int floor = 0;  // floors completed so far; floor_cap once the cap is hit
  Termination termination = Termination::none;
  int episode_length = 0;
  double episode_return = 0;
  int keys_collected = 0;
  int doors_opened = 0;
};

struct StepResult {
  Observation observation;
  double reward = 0;
  bool done = false;
  StepInfo info;
};

}  // namespace towerlab::env
