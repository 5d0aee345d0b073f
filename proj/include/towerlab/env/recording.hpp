#pragma once

// Episode recording (little-endian):
//
//   header
//     4  magic "TLEP"
//     4  u32 version (= 1)
//     8  u64 episode seed
//     1  u8  theme id (ancient=0 .. future=4)
//     8  u64 env config hash (EnvConfig::config_hash)
//     1  u8  frame skip
//     2  u16 start floor
//     2  i16 start x
//     2  i16 start y
//     1  u8  start heading (0=N,1=E,2=S,3=W)
//   then one record per agent step until end of file
//     1  u8  move   (0 none, 1 forward)
//     1  u8  jump   (0 none, 1 jump)
//     1  u8  rotate (0 none, 1 left, 2 right)
//     1  u8  done
//     4  f32 reward
//     1  u8  heading after the step
//     1  u8  tick count K (1..frame skip)
//     6K per executed tick: u16 floor, i16 x, i16 y (position after the tick)
//
// The last tick position is the agent position at the end of the step.

#include <string>
#include <vector>

#include "towerlab/core/binio.hpp"
#include "towerlab/env/types.hpp"

namespace towerlab::env {

inline constexpr char kRecordingMagic[4] = {'T', 'L', 'E', 'P'};
inline constexpr std::uint32_t kRecordingVersion = 1;

struct TickPosition {
  int floor = 0;
  GridPos position;
  bool operator==(const TickPosition&) const = default;
};

struct StepRecord {
  MultiDiscreteAction action;
  bool done = false;
  float reward = 0;
  Heading heading = Heading::north;
  std::vector<TickPosition> ticks;
};

struct EpisodeRecording {
  std::uint64_t seed = 0;
  Theme theme = Theme::ancient;
  std::uint64_t config_hash = 0;
  int frame_skip = 0;
  int start_floor = 0;
  GridPos start;
  Heading start_heading = Heading::north;
  std::vector<StepRecord> steps;
};

inline std::vector<std::uint8_t> encode_recording(const EpisodeRecording& rec) {
  ByteWriter w;
  w.bytes(kRecordingMagic, 4);
  w.u32(kRecordingVersion);
  w.u64(rec.seed);
  w.u8(static_cast<std::uint8_t>(rec.theme));
  w.u64(rec.config_hash);
  w.u8(static_cast<std::uint8_t>(rec.frame_skip));
  w.u16(static_cast<std::uint16_t>(rec.start_floor));
  w.i16(static_cast<std::int16_t>(rec.start.x));
  w.i16(static_cast<std::int16_t>(rec.start.y));
  w.u8(static_cast<std::uint8_t>(rec.start_heading));
  for (const auto& s : rec.steps) {
    w.u8(static_cast<std::uint8_t>(s.action.move));
    w.u8(static_cast<std::uint8_t>(s.action.jump));
    w.u8(static_cast<std::uint8_t>(s.action.rotate));
    w.u8(s.done ? 1 : 0);
    w.f32(s.reward);
    w.u8(static_cast<std::uint8_t>(s.heading));
    w.u8(static_cast<std::uint8_t>(s.ticks.size()));
    for (const auto& t : s.ticks) {
      w.u16(static_cast<std::uint16_t>(t.floor));
      w.i16(static_cast<std::int16_t>(t.position.x));
      w.i16(static_cast<std::int16_t>(t.position.y));
    }
  }
  return w.buffer();
}

inline EpisodeRecording decode_recording(ByteReader r) {
  EpisodeRecording rec;
  char magic[4];
  r.bytes(magic, 4);
  if (std::string(magic, 4) != std::string(kRecordingMagic, 4)) r.fail("bad recording magic", 0);
  const auto version = r.u32();
  if (version != kRecordingVersion) r.fail("unsupported recording version " + std::to_string(version), 4);
  rec.seed = r.u64();
  const auto theme_at = r.offset();
  const auto theme = r.u8();
  if (theme >= kAllThemes.size()) r.fail("invalid theme id " + std::to_string(theme), theme_at);
  rec.theme = static_cast<Theme>(theme);
  rec.config_hash = r.u64();
  rec.frame_skip = r.u8();
  if (rec.frame_skip < 1) r.fail("frame skip must be >= 1", r.offset() - 1);
  rec.start_floor = r.u16();
  rec.start.x = r.i16();
  rec.start.y = r.i16();
  const auto h_at = r.offset();
  const auto h = r.u8();
  if (h > 3) r.fail("invalid heading " + std::to_string(h), h_at);
  rec.start_heading = static_cast<Heading>(h);
  while (!r.at_end()) {
    const auto at = r.offset();
    StepRecord s;
    const auto mv = r.u8(), jp = r.u8(), rt = r.u8();
    if (mv > 1 || jp > 1 || rt > 2) r.fail("invalid action triple", at);
    s.action = MultiDiscreteAction::from_indices(mv, jp, rt);
    const auto done = r.u8();
    if (done > 1) r.fail("invalid done flag", at + 3);
    s.done = done == 1;
    s.reward = r.f32();
    const auto hd_at = r.offset();
    const auto hd = r.u8();
    if (hd > 3) r.fail("invalid heading " + std::to_string(hd), hd_at);
    s.heading = static_cast<Heading>(hd);
    const auto k_at = r.offset();
    const auto k = r.u8();
    if (k < 1 || k > rec.frame_skip) r.fail("tick count " + std::to_string(k) + " outside [1, frame skip]", k_at);
    for (int i = 0; i < k; ++i) {
      TickPosition t;
      t.floor = r.u16();
      t.position.x = r.i16();
      t.position.y = r.i16();
      s.ticks.push_back(t);
    }
    rec.steps.push_back(std::move(s));
  }
  return rec;
}

inline void write_recording(const std::string& path, const EpisodeRecording& rec) {
  ByteWriter w;
  const auto b = encode_recording(rec);
  w.bytes(b.data(), b.size());
  w.write_file(path);
}

inline EpisodeRecording read_recording(const std::string& path) { return decode_recording(ByteReader::from_file(path)); }

}  // namespace towerlab::env
