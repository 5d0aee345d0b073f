#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "support/tower_oracle.hpp"
#include "towerlab/core/rng.hpp"
#include "towerlab/env/bench.hpp"
#include "towerlab/env/minitower.hpp"

using namespace towerlab;
using namespace towerlab::env;

namespace {

MultiDiscreteAction random_action(Rng& rng) {
  return MultiDiscreteAction::from_indices(uniform_index(rng, 2), uniform_index(rng, 2), uniform_index(rng, 3));
}

const MultiDiscreteAction kNoop{};

EnvConfig small_frames() {
  EnvConfig c;
  c.frame_height = 32;
  c.frame_width = 32;
  return c;
}

}  // namespace

TEST(FloorGen, Deterministic) {
  EnvConfig cfg;
  for (std::uint64_t seed : {0ull, 7ull, 123456789ull}) {
    for (int f = 0; f < cfg.floor_cap; ++f) {
      const auto a = generate_floor(seed, f, cfg);
      const auto b = generate_floor(seed, f, cfg);
      EXPECT_EQ(a.grid, b.grid);
      EXPECT_EQ(a.start, b.start);
      EXPECT_EQ(a.exit, b.exit);
    }
  }
}

TEST(FloorGen, NoKeysBeforeKeyIntro) {
  EnvConfig cfg;
  Rng rng(11);
  for (int i = 0; i < 500; ++i) {
    const int f = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(cfg.key_intro_floor)));
    const auto L = generate_floor(rng(), f, cfg);
    EXPECT_EQ(L.count(Cell::key), 0);
    EXPECT_EQ(L.count(Cell::locked_door), 0);
  }
}

TEST(FloorGen, PuzzlesAppearFromIntroFloors) {
  EnvConfig cfg;
  Rng rng(12);
  for (int i = 0; i < 200; ++i) {
    const auto seed = rng();
    const auto k = generate_floor(seed, cfg.key_intro_floor, cfg);
    EXPECT_EQ(k.count(Cell::key), 1);
    EXPECT_EQ(k.count(Cell::locked_door), 1);
    const auto g = generate_floor(seed, cfg.gap_intro_floor, cfg);
    EXPECT_EQ(g.count(Cell::gap), cfg.room_size);
    const auto d = generate_floor(seed, cfg.double_gap_floor, cfg);
    EXPECT_EQ(d.count(Cell::gap), 2 * cfg.room_size);
  }
}

TEST(FloorGen, RoomCountGrowsWithFloor) {
  EnvConfig cfg;
  const auto open_cells = [&](int f) {
    const auto L = generate_floor(99, f, cfg);
    return L.width * L.height - L.count(Cell::wall);
  };
  EXPECT_LT(open_cells(0), open_cells(1));
  EXPECT_LT(open_cells(1), open_cells(2));
  EXPECT_LT(open_cells(2), open_cells(3));
}

TEST(FloorGen, OutOfRangeFloorIsUsageError) {
  EnvConfig cfg;
  EXPECT_THROW(generate_floor(1, cfg.floor_cap, cfg), UsageError);
  EXPECT_THROW(generate_floor(1, -1, cfg), UsageError);
}

TEST(FloorGen, OracleSolvesManyLayouts) {
  EnvConfig cfg;
  Rng rng(2024);
  for (int i = 0; i < 2000; ++i) {
    const auto seed = rng();
    const int f = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(cfg.floor_cap)));
    const auto L = generate_floor(seed, f, cfg);
    ASSERT_TRUE(tower_oracle::plan(L).has_value()) << "seed " << seed << " floor " << f;
  }
}

TEST(FloorGen, SolverRejectsBlockedLayout) {
  EnvConfig cfg;
  auto L = generate_floor(5, cfg.key_intro_floor, cfg);
  for (auto& c : L.grid)
    if (c == Cell::key) c = Cell::open;
  EXPECT_FALSE(is_solvable(L));
  EXPECT_FALSE(tower_oracle::plan(L).has_value());
}

TEST(Env, ResetDeterministicAndInitialGameState) {
  MiniTowerEnv a(small_frames()), b(small_frames());
  const auto oa = a.reset(42, Theme::modern);
  const auto ob = b.reset(42, Theme::modern);
  EXPECT_EQ(oa.frames, ob.frames);
  EXPECT_EQ(oa.game_state[0], 0.f);
  EXPECT_EQ(oa.game_state[1], 1.f);
}

TEST(Env, ResetPadsStackWithFirstFrame) {
  MiniTowerEnv env(small_frames());
  const auto o = env.reset(3, Theme::industrial);
  const std::size_t frame = 32 * 32 * 3;
  ASSERT_EQ(o.frames.size(), 3 * frame);
  for (std::size_t i = 0; i < frame; ++i) {
    ASSERT_EQ(o.frames[i], o.frames[frame + i]);
    ASSERT_EQ(o.frames[i], o.frames[2 * frame + i]);
  }
}

TEST(Env, StackOrderOldestFirst) {
  MiniTowerEnv env(small_frames());
  env.reset(3, Theme::industrial);
  const auto first = env.frame_history().back();
  env.step(tower_oracle::act(0, 0, 2));
  const auto second = env.frame_history().back();
  ASSERT_NE(first, second);
  const auto o = env.observation();
  const std::size_t frame = 32 * 32 * 3;
  for (std::size_t i = 0; i < frame; ++i) {
    ASSERT_EQ(o.frames[i], normalize_byte(first[i], true));
    ASSERT_EQ(o.frames[frame + i], normalize_byte(first[i], true));
    ASSERT_EQ(o.frames[2 * frame + i], normalize_byte(second[i], true));
  }
}

TEST(Env, DoubleNormalizationQuirk) {
  EXPECT_NEAR(normalize_byte(255, true), 255.0 / 255.0 / 255.0, 1e-9);
  EXPECT_NEAR(normalize_byte(255, true), 0.00392, 1e-5);
  EXPECT_EQ(normalize_byte(255, false), 1.0f);
  EXPECT_EQ(normalize_byte(0, true), 0.0f);

  for (bool quirk : {true, false}) {
    auto cfg = small_frames();
    cfg.double_normalization = quirk;
    MiniTowerEnv env(cfg);
    const auto o = env.reset(8, Theme::future);
    const float hi = quirk ? 1.f / 255.f : 1.f;
    float mx = 0;
    for (float v : o.frames) {
      ASSERT_GE(v, 0.f);
      ASSERT_LE(v, hi + 1e-7f);
      mx = std::max(mx, v);
    }
    EXPECT_GT(mx, hi / 4);
  }
}

TEST(Env, ModelFramesMatchObservation) {
  MiniTowerEnv env(small_frames());
  env.reset(77, Theme::moorish);
  Rng rng(1);
  for (int i = 0; i < 5; ++i) env.step(random_action(rng));
  if (env.state().episode_done) GTEST_SKIP();
  const auto o = env.observation();
  std::vector<float> chw(3 * 3 * 32 * 32);
  env.write_model_frames(chw.data());
  for (int f = 0; f < 3; ++f)
    for (int y = 0; y < 32; ++y)
      for (int x = 0; x < 32; ++x)
        for (int c = 0; c < 3; ++c)
          ASSERT_EQ(chw[static_cast<std::size_t>(((f * 3 + c) * 32 + y) * 32 + x)],
                    o.frames[static_cast<std::size_t>(((f * 32 + y) * 32 + x) * 3 + c)]);
}

TEST(Env, NoopOnlyDecrementsTime) {
  MiniTowerEnv env;
  env.reset(5, Theme::ancient);
  const auto before = env.state();
  const auto r = env.step(kNoop);
  const auto& after = env.state();
  EXPECT_EQ(r.reward, 0.0);
  EXPECT_FALSE(r.done);
  EXPECT_EQ(after.position, before.position);
  EXPECT_EQ(after.heading, before.heading);
  EXPECT_EQ(after.has_key, before.has_key);
  EXPECT_EQ(after.layout.grid, before.layout.grid);
  EXPECT_EQ(after.remaining_time, before.remaining_time - env.config().frame_skip);
}

TEST(Env, RotationIsOneQuarterTurnPerStep) {
  MiniTowerEnv env;
  env.reset(5, Theme::ancient);
  const auto h0 = env.state().heading;
  env.step(tower_oracle::act(0, 0, 2));
  EXPECT_EQ(env.state().heading, turn_right(h0));
  env.step(tower_oracle::act(0, 0, 1));
  env.step(tower_oracle::act(0, 0, 1));
  EXPECT_EQ(env.state().heading, turn_left(h0));
}

TEST(Env, StepAfterDoneIsUsageError) {
  auto cfg = small_frames();
  cfg.time_budget = 4;
  MiniTowerEnv env(cfg);
  env.reset(1, Theme::ancient);
  EXPECT_FALSE(env.step(kNoop).done);
  const auto r = env.step(kNoop);
  EXPECT_TRUE(r.done);
  EXPECT_EQ(r.info.termination, Termination::timeout);
  EXPECT_EQ(env.state().remaining_time, 0);
  EXPECT_THROW(env.step(kNoop), UsageError);
}

TEST(Env, StepBeforeResetIsUsageError) {
  MiniTowerEnv env;
  EXPECT_THROW(env.step(kNoop), UsageError);
}

TEST(Env, WalkingIntoGapWithoutJumpFalls) {
  EnvConfig cfg = small_frames();
  cfg.floor_cap = 5;
  MiniTowerEnv env(cfg);
  env.reset(31, Theme::ancient);
  // Drive the agent up to floor gap_intro_floor with oracle plans.
  while (env.state().floor_index < cfg.gap_intro_floor) {
    const auto legs = tower_oracle::plan(env.state().layout);
    ASSERT_TRUE(legs);
    for (const auto& a : tower_oracle::actions_for(*legs, env.state().heading)) env.step(a);
  }
  const auto legs = *tower_oracle::plan(env.state().layout);
  auto acts = tower_oracle::actions_for(legs, env.state().heading);
  // Strip the jump from the first gap crossing.
  bool stripped = false;
  for (auto& a : acts)
    if (a.jump == Jump::jump) {
      a.jump = Jump::none;
      stripped = true;
      break;
    }
  ASSERT_TRUE(stripped);
  StepResult r;
  for (const auto& a : acts) {
    r = env.step(a);
    if (r.done) break;
  }
  EXPECT_TRUE(r.done);
  EXPECT_EQ(r.info.termination, Termination::fell);
  EXPECT_EQ(r.info.floor, cfg.gap_intro_floor);
}

// Full-tower replay of oracle plans: covers key pickup, door opening, gap
// crossing, floor transitions, the floor cap and reward accounting.
TEST(Env, OraclePlansClimbToTheCap) {
  EnvConfig cfg = small_frames();
  Rng rng(404);
  for (int episode = 0; episode < 30; ++episode) {
    MiniTowerEnv env(cfg);
    env.reset(rng(), kAllThemes[uniform_index(rng, 5)]);
    StepResult last;
    int key_events = 0;
    while (!env.state().episode_done) {
      const auto legs = tower_oracle::plan(env.state().layout);
      ASSERT_TRUE(legs);
      const int floor = env.state().floor_index;
      for (const auto& a : tower_oracle::actions_for(*legs, env.state().heading)) {
        const bool had_key = env.state().has_key;
        const int time_before = env.state().remaining_time;
        const int orbs_before = env.state().orbs_collected;
        last = env.step(a);
        if (!had_key && env.state().has_key) {
          ++key_events;
          EXPECT_NEAR(last.reward, kKeyReward, 1e-12);
          EXPECT_EQ(last.observation.game_state[0], 1.f);
        }
        if (env.state().floor_index == floor && env.state().orbs_collected == orbs_before && !last.done) {
          EXPECT_EQ(env.state().remaining_time, time_before - cfg.frame_skip);
        }
        ASSERT_FALSE(last.done && env.state().floor_index < cfg.floor_cap) << termination_name(last.info.termination);
      }
      ASSERT_EQ(env.state().floor_index, floor + 1);
      if (floor + 1 < cfg.floor_cap) {
        EXPECT_FALSE(env.state().has_key);
      }
    }
    EXPECT_TRUE(last.done);
    EXPECT_EQ(last.info.termination, Termination::floor_cap);
    EXPECT_EQ(last.info.floor, cfg.floor_cap);
    EXPECT_EQ(key_events, cfg.floor_cap - cfg.key_intro_floor);
    const double expected = 1.0 * last.info.floor + 0.1 * last.info.keys_collected + 0.1 * last.info.doors_opened;
    EXPECT_NEAR(last.info.episode_return, expected, 1e-9);
    EXPECT_EQ(last.info.doors_opened, cfg.floor_cap - cfg.key_intro_floor);
  }
}

TEST(Env, RewardAccountingOnRandomEpisodes) {
  EnvConfig cfg = small_frames();
  Rng rng(5);
  for (int e = 0; e < 50; ++e) {
    MiniTowerEnv env(cfg);
    env.reset(rng(), Theme::modern);
    double total = 0;
    StepResult r;
    do {
      const int t0 = env.state().remaining_time;
      const int f0 = env.state().floor_index;
      const int o0 = env.state().orbs_collected;
      r = env.step(random_action(rng));
      total += r.reward;
      EXPECT_GE(env.state().remaining_time, 0);
      if (!r.done && env.state().floor_index == f0 && env.state().orbs_collected == o0) {
        EXPECT_EQ(env.state().remaining_time, t0 - cfg.frame_skip);
      }
    } while (!r.done);
    EXPECT_NEAR(total, r.info.episode_return, 1e-9);
    EXPECT_NEAR(total, r.info.floor + 0.1 * r.info.keys_collected + 0.1 * r.info.doors_opened, 1e-9);
    EXPECT_NE(r.info.termination, Termination::none);
  }
}

TEST(Env, DynamicsAreThemeIndependent) {
  EnvConfig cfg = small_frames();
  Rng seeds(77);
  for (int e = 0; e < 20; ++e) {
    const auto seed = seeds();
    std::vector<std::vector<double>> rewards;
    std::vector<std::vector<int>> floors;
    std::vector<std::vector<std::uint8_t>> first_frames;
    for (Theme t : kAllThemes) {
      MiniTowerEnv env(cfg);
      env.reset(seed, t);
      first_frames.push_back(env.frame_history().back());
      Rng rng(seed);
      std::vector<double> rs;
      std::vector<int> fs;
      StepResult r;
      do {
        r = env.step(random_action(rng));
        rs.push_back(r.reward);
        fs.push_back(r.info.floor * 10 + static_cast<int>(r.info.termination));
      } while (!r.done);
      rewards.push_back(rs);
      floors.push_back(fs);
    }
    for (std::size_t t = 1; t < rewards.size(); ++t) {
      EXPECT_EQ(rewards[t], rewards[0]);
      EXPECT_EQ(floors[t], floors[0]);
      EXPECT_NE(first_frames[t], first_frames[0]);
    }
  }
}

TEST(Env, SameSeedDifferentThemeSameLayout) {
  MiniTowerEnv a, b;
  a.reset(9, Theme::ancient);
  b.reset(9, Theme::future);
  EXPECT_EQ(a.state().layout.grid, b.state().layout.grid);
  EXPECT_EQ(a.state().position, b.state().position);
}

TEST(Env, TrajectoryIsPureFunctionOfInputs) {
  auto run = [](std::uint64_t seed) {
    MiniTowerEnv env(small_frames());
    env.reset(seed, Theme::industrial);
    Rng rng(seed ^ 0xabc);
    std::vector<float> all;
    StepResult r;
    do {
      r = env.step(random_action(rng));
      all.insert(all.end(), r.observation.frames.begin(), r.observation.frames.end());
      all.push_back(static_cast<float>(r.reward));
      all.push_back(r.observation.game_state[1]);
    } while (!r.done);
    return all;
  };
  EXPECT_EQ(run(100), run(100));
}

TEST(Env, SnapshotRoundTripContinuesIdentically) {
  MiniTowerEnv env(small_frames());
  env.reset(55, Theme::moorish);
  Rng rng(3);
  for (int i = 0; i < 20 && !env.state().episode_done; ++i) env.step(random_action(rng));
  ByteWriter w;
  env.save(w);
  MiniTowerEnv copy(small_frames());
  ByteReader r(w.buffer());
  copy.load(r);
  EXPECT_TRUE(r.at_end());
  Rng ra(9), rb(9);
  while (!env.state().episode_done) {
    const auto x = env.step(random_action(ra));
    const auto y = copy.step(random_action(rb));
    ASSERT_EQ(x.observation.frames, y.observation.frames);
    ASSERT_EQ(x.reward, y.reward);
    ASSERT_EQ(x.done, y.done);
  }
}

TEST(Render, DeterministicAndThemeDependent) {
  EnvConfig cfg;
  Rng rng(6);
  double min_fraction = 1.0;
  for (int i = 0; i < 100; ++i) {
    MiniTowerEnv env(cfg);
    env.reset(rng(), Theme::ancient);
    const int steps = static_cast<int>(uniform_index(rng, 20));
    for (int s = 0; s < steps && !env.state().episode_done; ++s) env.step(random_action(rng));
    const auto& st = env.state();
    for (std::size_t a = 0; a < kAllThemes.size(); ++a) {
      const auto img = render(st, kAllThemes[a], cfg);
      ASSERT_EQ(img, render(st, kAllThemes[a], cfg));
      for (std::size_t b = a + 1; b < kAllThemes.size(); ++b) {
        const auto other = render(st, kAllThemes[b], cfg);
        int diff = 0;
        for (std::size_t p = 0; p < img.size(); p += 3)
          diff += img[p] != other[p] || img[p + 1] != other[p + 1] || img[p + 2] != other[p + 2];
        min_fraction = std::min(min_fraction, diff / (img.size() / 3.0));
      }
    }
  }
  EXPECT_GE(min_fraction, 0.30);
}

TEST(Render, KeyTintVisibleWhenKeyInView) {
  EnvConfig cfg;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    EnvState s;
    s.layout = generate_floor(seed, cfg.key_intro_floor, cfg);
    GridPos key{-1, -1};
    for (int y = 0; y < s.layout.height; ++y)
      for (int x = 0; x < s.layout.width; ++x)
        if (s.layout.at({x, y}) == Cell::key) key = {x, y};
    ASSERT_NE(key.x, -1);
    // Stand two cells south of the key facing north, if that cell is open.
    s.position = {key.x, key.y + 2};
    s.heading = Heading::north;
    for (Theme t : kAllThemes) {
      const auto img = render(s, t, cfg);
      const auto tint = palette(t).key;
      bool found = false;
      for (std::size_t p = 0; p < img.size() && !found; p += 3)
        found = img[p] == tint.r && img[p + 1] == tint.g && img[p + 2] == tint.b;
      EXPECT_TRUE(found) << theme_name(t) << " seed " << seed;
      // Without the key the tint vanishes.
      auto s2 = s;
      s2.layout.set(key, Cell::open);
      const auto img2 = render(s2, t, cfg);
      bool found2 = false;
      for (std::size_t p = 0; p < img2.size() && !found2; p += 3)
        found2 = img2[p] == tint.r && img2[p + 1] == tint.g && img2[p + 2] == tint.b;
      EXPECT_FALSE(found2) << theme_name(t);
    }
  }
}

TEST(Render, HeadingPointsUp) {
  EnvConfig cfg;
  EnvState s;
  s.layout = generate_floor(1, 0, cfg);
  s.position = s.layout.start;
  Renderer r(cfg, Theme::modern);
  for (int h = 0; h < 4; ++h) {
    s.heading = static_cast<Heading>(h);
    EXPECT_EQ(r.world_cell(s, cfg.view_ahead - 1, cfg.view_side), step_towards(s.position, s.heading));
    EXPECT_EQ(r.world_cell(s, cfg.view_ahead, cfg.view_side + 1), step_towards(s.position, turn_right(s.heading)));
  }
}

TEST(Recording, RoundTripAndAdjacency) {
  MiniTowerEnv env(small_frames());
  env.set_recording(true);
  env.reset(1234, Theme::modern);
  Rng rng(8);
  StepResult r;
  do r = env.step(random_action(rng));
  while (!r.done);
  const auto& rec = env.recording();
  ASSERT_EQ(static_cast<int>(rec.steps.size()), r.info.episode_length);
  const auto bytes = encode_recording(rec);
  const auto back = decode_recording(ByteReader(bytes));
  ASSERT_EQ(back.steps.size(), rec.steps.size());
  EXPECT_EQ(back.seed, 1234u);
  EXPECT_EQ(back.config_hash, small_frames().config_hash());
  TickPosition prev{0, back.start};
  for (const auto& s : back.steps) {
    for (const auto& t : s.ticks) {
      if (t.floor == prev.floor) {
        EXPECT_LE(std::abs(t.position.x - prev.position.x) + std::abs(t.position.y - prev.position.y), 1);
      }
      prev = t;
    }
  }
  EXPECT_TRUE(back.steps.back().done);
}

TEST(Recording, ParseErrorsCarryOffsets) {
  MiniTowerEnv env(small_frames());
  env.set_recording(true);
  env.reset(1, Theme::modern);
  env.step(tower_oracle::act(0, 0, 1));
  auto bytes = encode_recording(env.recording());
  {
    auto bad = bytes;
    bad[0] = 'X';
    try {
      decode_recording(ByteReader(bad));
      FAIL();
    } catch (const ParseError& e) {
      EXPECT_EQ(e.offset(), 0u);
    }
  }
  {
    auto bad = bytes;
    bad.pop_back();
    EXPECT_THROW(decode_recording(ByteReader(bad)), ParseError);
  }
  {
    auto bad = bytes;
    const std::size_t header = 4 + 4 + 8 + 1 + 8 + 1 + 2 + 2 + 2 + 1;
    bad[header + 2] = 7;  // rotate index out of range
    try {
      decode_recording(ByteReader(bad));
      FAIL();
    } catch (const ParseError& e) {
      EXPECT_EQ(e.offset(), header);
    }
  }
}

TEST(Bench, ZeroEpisodesIsEmpty) {
  const auto r = throughput_bench(EnvConfig{}, 0, 1);
  EXPECT_TRUE(r.episodes.empty());
  EXPECT_EQ(r.mean_steps_per_second, 0.0);
  std::ostringstream os;
  write_bench_csv(os, r);
  EXPECT_EQ(os.str(), "episode,seed,theme,steps,seconds,steps_per_second,return,floor\n");
}

TEST(Bench, PerEpisodeRows) {
  const auto r = throughput_bench(EnvConfig{}, 4, 2);
  ASSERT_EQ(r.episodes.size(), 4u);
  for (const auto& e : r.episodes) {
    EXPECT_GT(e.steps, 0);
    EXPECT_GT(e.steps_per_second, 0);
  }
  EXPECT_GT(r.mean_steps_per_second, 0);
  std::ostringstream os;
  write_bench_csv(os, r);
  int lines = 0;
  for (char c : os.str()) lines += c == '\n';
  EXPECT_EQ(lines, 5);
}

TEST(Bench, OutcomeStatsAreMeansAndDeterministic) {
  const auto a = throughput_bench(EnvConfig{}, 6, 3);
  const auto b = throughput_bench(EnvConfig{}, 6, 3);
  double ret = 0, floor = 0;
  for (std::size_t i = 0; i < a.episodes.size(); ++i) {
    EXPECT_EQ(a.episodes[i].steps, b.episodes[i].steps);
    EXPECT_EQ(a.episodes[i].episode_return, b.episodes[i].episode_return);
    EXPECT_GE(a.episodes[i].floor, 0);
    ret += a.episodes[i].episode_return;
    floor += a.episodes[i].floor;
  }
  EXPECT_DOUBLE_EQ(a.mean_return, ret / 6);
  EXPECT_DOUBLE_EQ(a.mean_floor, floor / 6);
}
