#pragma once

#include <deque>
#include <optional>
#include <vector>

#include "towerlab/core/binio.hpp"
#include "towerlab/core/errors.hpp"
#include "towerlab/env/floor_gen.hpp"
#include "towerlab/env/recording.hpp"
#include "towerlab/env/render.hpp"
#include "towerlab/env/types.hpp"

namespace towerlab::env {

inline constexpr double kFloorReward = 1.0;
inline constexpr double kKeyReward = 0.1;
inline constexpr double kDoorReward = 0.1;

// Normalization applied to one byte. With the quirk on the value is divided
// by 255 twice, so the range is [0, 1/255].
inline float normalize_byte(std::uint8_t b, bool double_normalization) {
  const double once = static_cast<double>(b) / 255.0;
  return static_cast<float>(double_normalization ? once / 255.0 : once);
}

inline std::array<float, 2> game_state_vector(const EnvState& s, const EnvConfig& cfg) {
  const double t = std::min(1.0, static_cast<double>(s.remaining_time) / cfg.time_budget);
  return {s.has_key ? 1.f : 0.f, static_cast<float>(t)};
}

// Builds the stacked observation from a frame history (oldest first). A
// history shorter than the stack is padded by repeating its oldest frame.
inline Observation wrap_observation(const std::deque<std::vector<std::uint8_t>>& history, const EnvConfig& cfg,
                                    std::array<float, 2> game_state) {
  if (history.empty()) throw UsageError("wrap_observation needs at least one frame");
  Observation o;
  o.stacked = cfg.stacked_frames;
  o.height = cfg.frame_height;
  o.width = cfg.frame_width;
  o.game_state = game_state;
  const std::size_t frame = static_cast<std::size_t>(o.height * o.width * 3);
  o.frames.resize(frame * static_cast<std::size_t>(o.stacked));
  const int pad = o.stacked - static_cast<int>(history.size());
  for (int f = 0; f < o.stacked; ++f) {
    const int src = std::max(0, f - pad);
    const auto& bytes = history[static_cast<std::size_t>(src)];
    if (bytes.size() != frame) throw UsageError("frame size does not match the env config");
    float* dst = o.frames.data() + frame * static_cast<std::size_t>(f);
    for (std::size_t i = 0; i < frame; ++i) dst[i] = normalize_byte(bytes[i], cfg.double_normalization);
  }
  return o;
}

class MiniTowerEnv {
 public:
  explicit MiniTowerEnv(EnvConfig cfg = {}) : cfg_(std::move(cfg)), renderer_(cfg_, Theme::ancient) {
    cfg_.validate();
    build_lut();
  }

  const EnvConfig& config() const noexcept { return cfg_; }
  const EnvState& state() const noexcept { return state_; }
  std::uint64_t seed() const noexcept { return seed_; }
  Theme theme() const noexcept { return theme_; }
  bool started() const noexcept { return started_; }
  const std::deque<std::vector<std::uint8_t>>& frame_history() const noexcept { return history_; }

  void set_recording(bool on) { recording_on_ = on; }
  const EpisodeRecording& recording() const noexcept { return recording_; }

  Observation reset(std::uint64_t seed, Theme theme) {
    seed_ = seed;
    theme_ = theme;
    if (renderer_.theme() != theme) renderer_ = Renderer(cfg_, theme);
    state_ = EnvState{};
    load_floor(0);
    state_.remaining_time = cfg_.time_budget;
    started_ = true;
    history_.clear();
    push_frame();
    while (static_cast<int>(history_.size()) < cfg_.stacked_frames) history_.push_front(history_.back());
    if (recording_on_) {
      recording_ = EpisodeRecording{};
      recording_.seed = seed;
      recording_.theme = theme;
      recording_.config_hash = cfg_.config_hash();
      recording_.frame_skip = cfg_.frame_skip;
      recording_.start_floor = 0;
      recording_.start = state_.position;
      recording_.start_heading = state_.heading;
    }
    return observation();
  }

  StepResult step(const MultiDiscreteAction& action) {
    if (!started_) throw UsageError("step called before reset");
    if (state_.episode_done) throw UsageError("step called after the episode is done; call reset first");
    double reward = 0;
    StepRecord rec;
    rec.action = action;
    for (int t = 0; t < cfg_.frame_skip && !state_.episode_done; ++t) {
      reward += tick(action);
      if (recording_on_) rec.ticks.push_back({state_.floor_index, state_.position});
    }
    state_.steps += 1;
    state_.episode_return += reward;
    push_frame();
    StepResult r;
    r.reward = reward;
    r.done = state_.episode_done;
    r.info = info();
    r.observation = observation();
    if (recording_on_) {
      rec.done = r.done;
      rec.reward = static_cast<float>(reward);
      rec.heading = state_.heading;
      recording_.steps.push_back(std::move(rec));
    }
    return r;
  }

  // Same as step() but skips building the Observation; use
  // write_model_frames() to read the new frame stack.
  double step_fast(const MultiDiscreteAction& action, bool& done, StepInfo& out_info) {
    if (!started_) throw UsageError("step called before reset");
    if (state_.episode_done) throw UsageError("step called after the episode is done; call reset first");
    double reward = 0;
    for (int t = 0; t < cfg_.frame_skip && !state_.episode_done; ++t) reward += tick(action);
    state_.steps += 1;
    state_.episode_return += reward;
    push_frame();
    done = state_.episode_done;
    out_info = info();
    return reward;
  }

  StepInfo info() const {
    StepInfo i;
    i.floor = state_.floor_index;
    i.termination = state_.termination;
    i.episode_length = state_.steps;
    i.episode_return = state_.episode_return;
    i.keys_collected = state_.keys_collected;
    i.doors_opened = state_.doors_opened;
    return i;
  }

  Observation observation() const { return wrap_observation(history_, cfg_, game_state_vector(state_, cfg_)); }

  // Writes the frame stack in model layout: channel = frame * 3 + color,
  // oldest frame first, then H x W. dst must hold stacked * 3 * H * W floats.
  void write_model_frames(float* dst) const {
    const std::size_t hw = static_cast<std::size_t>(cfg_.frame_height * cfg_.frame_width);
    for (std::size_t f = 0; f < history_.size(); ++f) {
      const auto* src = history_[f].data();
      float* out = dst + f * 3 * hw;
      for (std::size_t p = 0; p < hw; ++p) {
        out[p] = lut_[src[3 * p]];
        out[hw + p] = lut_[src[3 * p + 1]];
        out[2 * hw + p] = lut_[src[3 * p + 2]];
      }
    }
  }

  // Same layout as write_model_frames(), raw bytes.
  void write_model_bytes(std::uint8_t* dst) const {
    const std::size_t hw = static_cast<std::size_t>(cfg_.frame_height * cfg_.frame_width);
    for (std::size_t f = 0; f < history_.size(); ++f) {
      const auto* src = history_[f].data();
      std::uint8_t* out = dst + f * 3 * hw;
      for (std::size_t p = 0; p < hw; ++p) {
        out[p] = src[3 * p];
        out[hw + p] = src[3 * p + 1];
        out[2 * hw + p] = src[3 * p + 2];
      }
    }
  }

  std::array<float, 2> game_state() const { return game_state_vector(state_, cfg_); }

  // Full snapshot for exact resume: state, mutated grid and frame history.
  void save(ByteWriter& w) const {
    w.u8(started_ ? 1 : 0);
    w.u64(seed_);
    w.u8(static_cast<std::uint8_t>(theme_));
    const auto& s = state_;
    w.u32(static_cast<std::uint32_t>(s.floor_index));
    w.u32(static_cast<std::uint32_t>(s.layout.width));
    w.u32(static_cast<std::uint32_t>(s.layout.height));
    for (auto c : s.layout.grid) w.u8(static_cast<std::uint8_t>(c));
    w.u32(static_cast<std::uint32_t>(s.position.x));
    w.u32(static_cast<std::uint32_t>(s.position.y));
    w.u8(static_cast<std::uint8_t>(s.heading));
    w.u8(s.has_key ? 1 : 0);
    w.u32(static_cast<std::uint32_t>(s.remaining_time));
    w.u8(s.episode_done ? 1 : 0);
    w.u8(static_cast<std::uint8_t>(s.termination));
    w.u32(static_cast<std::uint32_t>(s.move_progress));
    w.u32(static_cast<std::uint32_t>(s.rotate_progress));
    w.u8(static_cast<std::uint8_t>(s.rotate_dir));
    w.u32(static_cast<std::uint32_t>(s.steps));
    w.f64(s.episode_return);
    w.u32(static_cast<std::uint32_t>(s.keys_collected));
    w.u32(static_cast<std::uint32_t>(s.doors_opened));
    w.u32(static_cast<std::uint32_t>(s.orbs_collected));
    w.u32(static_cast<std::uint32_t>(history_.size()));
    for (const auto& f : history_) w.bytes(f.data(), f.size());
  }

  void load(ByteReader& r) {
    started_ = r.u8() == 1;
    seed_ = r.u64();
    const auto th = r.u8();
    if (th >= kAllThemes.size()) r.fail("invalid theme id in env snapshot");
    theme_ = static_cast<Theme>(th);
    renderer_ = Renderer(cfg_, theme_);
    EnvState s;
    s.floor_index = static_cast<int>(r.u32());
    const int layout_floor = std::min(s.floor_index, cfg_.floor_cap - 1);
    s.layout = generate_floor(seed_, layout_floor, cfg_);
    s.layout.theme = theme_;
    const int w = static_cast<int>(r.u32()), h = static_cast<int>(r.u32());
    if (w != s.layout.width || h != s.layout.height) r.fail("env snapshot grid size does not match the config");
    for (auto& c : s.layout.grid) c = static_cast<Cell>(r.u8());
    s.position.x = static_cast<int>(r.u32());
    s.position.y = static_cast<int>(r.u32());
    s.heading = static_cast<Heading>(r.u8() & 3);
    s.has_key = r.u8() == 1;
    s.remaining_time = static_cast<int>(r.u32());
    s.episode_done = r.u8() == 1;
    s.termination = static_cast<Termination>(r.u8());
    s.move_progress = static_cast<int>(r.u32());
    s.rotate_progress = static_cast<int>(r.u32());
    s.rotate_dir = static_cast<Rotate>(r.u8());
    s.steps = static_cast<int>(r.u32());
    s.episode_return = r.f64();
    s.keys_collected = static_cast<int>(r.u32());
    s.doors_opened = static_cast<int>(r.u32());
    s.orbs_collected = static_cast<int>(r.u32());
    state_ = std::move(s);
    const auto n = r.u32();
    if (n != static_cast<std::uint32_t>(cfg_.stacked_frames) && started_)
      r.fail("env snapshot frame count does not match the config");
    history_.clear();
    const std::size_t frame = static_cast<std::size_t>(cfg_.frame_height * cfg_.frame_width * 3);
    for (std::uint32_t i = 0; i < n; ++i) {
      std::vector<std::uint8_t> f(frame);
      r.bytes(f.data(), frame);
      history_.push_back(std::move(f));
    }
  }

 private:
  void build_lut() {
    for (int b = 0; b < 256; ++b) lut_[static_cast<std::size_t>(b)] = normalize_byte(static_cast<std::uint8_t>(b), cfg_.double_normalization);
  }

  void load_floor(int floor) {
    state_.floor_index = floor;
    state_.layout = generate_floor(seed_, floor, cfg_);
    state_.layout.theme = theme_;
    state_.position = state_.layout.start;
    state_.heading = state_.layout.start_heading;
    state_.has_key = false;
    state_.move_progress = 0;
    state_.rotate_progress = 0;
    state_.rotate_dir = Rotate::none;
  }

  void push_frame() {
    std::vector<std::uint8_t> frame;
    if (history_.size() == static_cast<std::size_t>(cfg_.stacked_frames)) {
      frame = std::move(history_.front());
      history_.pop_front();
    }
    renderer_.render(state_, frame);
    history_.push_back(std::move(frame));
  }

  // One internal tick. Movement is resolved first, then gap hazards, cell
  // effects and rotation, then the clock.
  double tick(const MultiDiscreteAction& a) {
    auto& s = state_;
    double reward = 0;
    const bool forward = a.move == Move::forward;
    const bool jump = a.jump == Jump::jump;
    bool moved = false, blocked = false;

    if (forward) {
      const GridPos target = step_towards(s.position, s.heading);
      const Cell c = s.layout.at(target);
      blocked = c == Cell::wall || (c == Cell::locked_door && !s.has_key);
      if (blocked) {
        s.move_progress = 0;
      } else if (++s.move_progress >= cfg_.motion_ticks) {
        s.move_progress = 0;
        if (c == Cell::locked_door) {
          s.layout.set(target, Cell::door);
          s.has_key = false;
          s.doors_opened += 1;
          reward += kDoorReward;
        }
        s.position = target;
        moved = true;
      }
    } else {
      s.move_progress = 0;
    }

    const Cell here = s.layout.at(s.position);
    if (here == Cell::gap) {
      const bool safe = moved ? jump : (forward && !blocked);
      if (!safe) {
        s.episode_done = true;
        s.termination = Termination::fell;
        s.remaining_time = std::max(0, s.remaining_time - 1);
        return reward;
      }
      s.rotate_progress = 0;
      s.rotate_dir = Rotate::none;
    } else {
      if (here == Cell::key) {
        s.layout.set(s.position, Cell::open);
        s.has_key = true;
        s.keys_collected += 1;
        reward += kKeyReward;
      } else if (here == Cell::orb) {
        s.layout.set(s.position, Cell::open);
        s.remaining_time += cfg_.orb_time_bonus;
        s.orbs_collected += 1;
      } else if (here == Cell::exit) {
        reward += kFloorReward;
        if (s.floor_index + 1 >= cfg_.floor_cap) {
          s.floor_index = cfg_.floor_cap;
          s.has_key = false;
          s.episode_done = true;
          s.termination = Termination::floor_cap;
          s.remaining_time = std::max(0, s.remaining_time - 1);
          return reward;
        }
        load_floor(s.floor_index + 1);
        s.remaining_time += cfg_.floor_time_bonus;
      }
      if (a.rotate == Rotate::none) {
        s.rotate_progress = 0;
        s.rotate_dir = Rotate::none;
      } else {
        if (a.rotate != s.rotate_dir) s.rotate_progress = 0;
        s.rotate_dir = a.rotate;
        if (++s.rotate_progress >= cfg_.motion_ticks) {
          s.rotate_progress = 0;
          s.heading = a.rotate == Rotate::left ? turn_left(s.heading) : turn_right(s.heading);
          s.move_progress = 0;
        }
      }
    }

    s.remaining_time -= 1;
    if (s.remaining_time <= 0) {
      s.remaining_time = 0;
      s.episode_done = true;
      s.termination = Termination::timeout;
    }
    return reward;
  }

  EnvConfig cfg_;
  Renderer renderer_;
  EnvState state_;
  std::uint64_t seed_ = 0;
  Theme theme_ = Theme::ancient;
  bool started_ = false;
  std::deque<std::vector<std::uint8_t>> history_;
  std::array<float, 256> lut_{};
  bool recording_on_ = false;
  EpisodeRecording recording_;
};

}  // namespace towerlab::env
