#pragma once

#include <algorithm>
#include <array>
#include <deque>
#include <vector>

#include "towerlab/core/errors.hpp"
#include "towerlab/core/rng.hpp"
#include "towerlab/env/types.hpp"

namespace towerlab::env {

// Floor grammar:
//   - rooms are room_size x room_size interiors on a 3x3 slot lattice,
//     chained by a self-avoiding walk; consecutive rooms share a door
//   - room count is 1 + min(floor, 3)
//   - from key_intro_floor on, the door into the exit room is locked and a
//     key lies in one of the earlier rooms
//   - from gap_intro_floor on, a gap strip spans the exit room between its
//     entrance and the exit; two cells wide from double_gap_floor on
//   - from floor 1 on, a time orb appears with probability 1/2
namespace detail {

inline constexpr int kSlots = 3;

struct Slot {
  int i = 0;
  int j = 0;
  bool operator==(const Slot&) const = default;
};

inline int room_origin(int slot, int room) { return 1 + slot * (room + 1); }

inline int rooms_for_floor(int floor) { return 1 + std::min(floor, 3); }

}  // namespace detail

// True when the exit is reachable from the start. Search space is
// (position, key phase) with phase 0 = key not taken, 1 = holding,
// 2 = spent on the locked door. Forward moves may chain over any run of gap
// cells (jumping each one) provided they land on an enterable cell.
inline bool is_solvable(const FloorLayout& layout) {
  const int w = layout.width, h = layout.height;
  std::vector<std::array<bool, 3>> seen(static_cast<std::size_t>(w * h), {false, false, false});
  std::deque<std::pair<GridPos, int>> queue;
  const int start_phase = 0;
  queue.push_back({layout.start, start_phase});
  seen[static_cast<std::size_t>(layout.start.y * w + layout.start.x)][start_phase] = true;
  while (!queue.empty()) {
    auto [pos, phase] = queue.front();
    queue.pop_front();
    if (layout.at(pos) == Cell::exit) return true;
    for (int d = 0; d < 4; ++d) {
      const auto heading = static_cast<Heading>(d);
      GridPos t = step_towards(pos, heading);
      while (layout.at(t) == Cell::gap) t = step_towards(t, heading);
      const Cell c = layout.at(t);
      int next_phase = phase;
      if (c == Cell::wall) continue;
      if (c == Cell::locked_door) {
        if (phase == 0) continue;
        next_phase = 2;
      }
      if (c == Cell::key && phase == 0) next_phase = 1;
      auto& s = seen[static_cast<std::size_t>(t.y * w + t.x)][next_phase];
      if (!s) {
        s = true;
        queue.push_back({t, next_phase});
      }
    }
  }
  return false;
}

inline FloorLayout generate_floor(std::uint64_t seed, int floor_index, const EnvConfig& cfg) {
  using namespace detail;
  if (floor_index < 0 || floor_index >= cfg.floor_cap)
    throw UsageError("floor index " + std::to_string(floor_index) + " outside [0, floor_cap)");
  const int room = cfg.room_size;
  const int size = kSlots * (room + 1) + 1;
  Rng rng(derive_seed(seed, static_cast<std::uint64_t>(floor_index)));
  auto pick = [&rng](int n) { return static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(n))); };

  constexpr int kMaxAttempts = 100;
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    FloorLayout L;
    L.seed = seed;
    L.floor_index = floor_index;
    L.width = size;
    L.height = size;
    L.grid.assign(static_cast<std::size_t>(size * size), Cell::wall);

    // Self-avoiding walk over room slots.
    const int n_rooms = rooms_for_floor(floor_index);
    std::vector<Slot> chain{{pick(kSlots), pick(kSlots)}};
    bool stuck = false;
    while (static_cast<int>(chain.size()) < n_rooms) {
      std::vector<Slot> options;
      const Slot cur = chain.back();
      for (auto [di, dj] : {std::pair{1, 0}, {-1, 0}, {0, 1}, {0, -1}}) {
        const Slot s{cur.i + di, cur.j + dj};
        if (s.i < 0 || s.j < 0 || s.i >= kSlots || s.j >= kSlots) continue;
        if (std::find(chain.begin(), chain.end(), s) != chain.end()) continue;
        options.push_back(s);
      }
      if (options.empty()) {
        stuck = true;
        break;
      }
      chain.push_back(options[static_cast<std::size_t>(pick(static_cast<int>(options.size())))]);
    }
    if (stuck) continue;

    for (const auto& s : chain)
      for (int y = 0; y < room; ++y)
        for (int x = 0; x < room; ++x) L.set({room_origin(s.i, room) + x, room_origin(s.j, room) + y}, Cell::open);

    auto random_cell = [&](const Slot& s) {
      return GridPos{room_origin(s.i, room) + pick(room), room_origin(s.j, room) + pick(room)};
    };

    // Doors between consecutive rooms; remember the last one.
    GridPos last_door{};
    for (std::size_t k = 1; k < chain.size(); ++k) {
      const Slot a = chain[k - 1], b = chain[k];
      GridPos door;
      if (a.j == b.j) {
        door.x = room_origin(std::min(a.i, b.i), room) + room;
        door.y = room_origin(a.j, room) + pick(room);
      } else {
        door.x = room_origin(a.i, room) + pick(room);
        door.y = room_origin(std::min(a.j, b.j), room) + room;
      }
      L.set(door, Cell::door);
      last_door = door;
    }

    const Slot exit_room = chain.back();
    const bool has_key_puzzle = floor_index >= cfg.key_intro_floor && chain.size() >= 2;
    const bool has_gap = floor_index >= cfg.gap_intro_floor && chain.size() >= 2;
    if (has_key_puzzle) L.set(last_door, Cell::locked_door);

    L.start = random_cell(chain.front());
    L.start_heading = static_cast<Heading>(pick(4));

    // Exit placement, behind a gap strip when required. Offsets are measured
    // from the exit room's entrance wall.
    if (has_gap) {
      const Slot prev = chain[chain.size() - 2];
      const int width = floor_index >= cfg.double_gap_floor ? 2 : 1;
      const int strip = room / 2;
      const int ox = room_origin(exit_room.i, room), oy = room_origin(exit_room.j, room);
      auto interior = [&](int offset, int along) -> GridPos {
        if (prev.i < exit_room.i) return {ox + offset, oy + along};
        if (prev.i > exit_room.i) return {ox + room - 1 - offset, oy + along};
        if (prev.j < exit_room.j) return {ox + along, oy + offset};
        return {ox + along, oy + room - 1 - offset};
      };
      for (int o = strip; o < strip + width; ++o)
        for (int a = 0; a < room; ++a) L.set(interior(o, a), Cell::gap);
      const int far = strip + width + pick(room - strip - width);
      L.exit = interior(far, pick(room));
    } else {
      do {
        L.exit = random_cell(exit_room);
      } while (L.exit == L.start);
    }
    L.set(L.exit, Cell::exit);
    L.set(L.start, Cell::start);

    auto free_cell_in = [&](const Slot& s, GridPos& out) {
      for (int tries = 0; tries < 64; ++tries) {
        const GridPos p = random_cell(s);
        if (L.at(p) == Cell::open) {
          out = p;
          return true;
        }
      }
      return false;
    };

    if (has_key_puzzle) {
      const auto key_room = chain[static_cast<std::size_t>(pick(static_cast<int>(chain.size()) - 1))];
      GridPos key;
      if (!free_cell_in(key_room, key)) continue;
      L.set(key, Cell::key);
    }
    if (floor_index >= 1 && pick(2) == 0) {
      const auto orb_room = chain[static_cast<std::size_t>(pick(static_cast<int>(chain.size()) - 1))];
      GridPos orb;
      if (free_cell_in(orb_room, orb)) L.set(orb, Cell::orb);
    }

    if (is_solvable(L)) return L;
  }
  throw InternalError("floor generator failed to produce a solvable layout for seed " + std::to_string(seed) +
                      ", floor " + std::to_string(floor_index));
}

}  // namespace towerlab::env
