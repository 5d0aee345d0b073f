#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <set>

#include "support/path_fixture.hpp"
#include "support/small_model.hpp"
#include "towerlab/eval/curves.hpp"
#include "towerlab/eval/histogram.hpp"
#include "towerlab/eval/path_render.hpp"
#include "towerlab/eval/protocol.hpp"

using namespace towerlab;
using namespace towerlab::eval;
namespace fs = std::filesystem;

namespace {

env::EnvConfig small_env() {
  env::EnvConfig c;
  c.frame_height = 16;
  c.frame_width = 16;
  c.time_budget = 80;
  return c;
}

model::AgentModel<float> small_agent(std::uint64_t seed) {
  model::AgentModel<float> m(small_model::reduced_config());
  Rng rng(seed);
  m.initialize(rng);
  return m;
}

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("towerlab_eval_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::vector<std::uint64_t> range(std::uint64_t a, std::uint64_t n) {
  std::vector<std::uint64_t> s;
  for (std::uint64_t i = 0; i < n; ++i) s.push_back(a + i);
  return s;
}

EpisodeRow row(Theme t, int floor, int length = 10, double ret = 0) {
  EpisodeRow r;
  r.theme = t;
  r.floor = floor;
  r.length = length;
  r.ret = ret;
  return r;
}

}  // namespace

TEST(Protocol, EpisodeCounts) {
  EvalProtocol p;
  EXPECT_EQ(p.episode_count(), 75u);
  EXPECT_EQ(protocol_episodes(p).size(), 75u);
  p.seeds = {7};
  p.repetitions = 1;
  p.themes = {env::Theme::future};
  EXPECT_EQ(protocol_episodes(p).size(), 1u);
}

TEST(Protocol, SeedHygiene) {
  EvalProtocol p;
  EXPECT_NO_THROW(p.validate(range(0, 100)));
  p.seeds = {1000, 42};
  EXPECT_THROW(p.validate(range(0, 100)), ConfigError);
  p.seeds = {};
  EXPECT_THROW(p.validate(range(0, 100)), ConfigError);
  auto m = small_agent(0);
  EvalProtocol bad;
  bad.seeds = {3};
  EXPECT_THROW(evaluate(m, small_env(), bad, range(0, 10)), ConfigError);
}

TEST(Evaluate, SingleEpisodeAndDeterminism) {
  auto m = small_agent(1);
  EvalProtocol p;
  p.seeds = {500};
  p.repetitions = 1;
  p.themes = {Theme::moorish};
  const auto a = evaluate(m, small_env(), p, range(0, 10));
  const auto b = evaluate(m, small_env(), p, range(0, 10));
  ASSERT_EQ(a.rows.size(), 1u);
  EXPECT_EQ(a.rows[0].theme, Theme::moorish);
  EXPECT_EQ(a.rows[0].seed, 500u);
  EXPECT_EQ(a.rows[0].length, b.rows[0].length);
  EXPECT_EQ(a.rows[0].ret, b.rows[0].ret);
  EXPECT_NE(a.rows[0].termination, env::Termination::none);
}

TEST(Evaluate, FullProtocolShape) {
  auto m = small_agent(2);
  const auto rep = evaluate(m, small_env(), EvalProtocol{}, range(0, 100));
  ASSERT_EQ(rep.rows.size(), 75u);
  const auto agg = rep.aggregates();
  ASSERT_EQ(agg.size(), 5u);
  for (const auto& a : agg) EXPECT_EQ(a.episodes, 15u);
}

// An episode's outcome depends only on its own index and RNG stream, not on
// which other episodes share the batch.
TEST(Evaluate, EpisodesIndependentOfBatchmates) {
  auto m = small_agent(3);
  const std::vector<EpisodeSpec> x{{Theme::ancient, 900, 0}, {Theme::future, 901, 0}};
  const std::vector<EpisodeSpec> y{{Theme::ancient, 900, 0}, {Theme::modern, 955, 2}};
  const auto rx = run_episodes(m, small_env(), x, 11, false, false);
  const auto ry = run_episodes(m, small_env(), y, 11, false, false);
  EXPECT_EQ(rx.rows[0].length, ry.rows[0].length);
  EXPECT_EQ(rx.rows[0].ret, ry.rows[0].ret);
  EXPECT_EQ(rx.rows[0].floor, ry.rows[0].floor);
}

TEST(Evaluate, GreedyIsRepeatable) {
  auto m = small_agent(4);
  const std::vector<EpisodeSpec> s{{Theme::industrial, 77, 0}, {Theme::industrial, 77, 1}};
  const auto r = run_episodes(m, small_env(), s, 5, true, false);
  // Same seed and theme under argmax actions: repetitions coincide.
  EXPECT_EQ(r.rows[0].length, r.rows[1].length);
  EXPECT_EQ(r.rows[0].ret, r.rows[1].ret);
}

TEST(Report, AggregatesRecomputeFromCsv) {
  auto m = small_agent(5);
  EvalProtocol p;
  p.seeds = {2000, 2001};
  p.repetitions = 2;
  auto rep = evaluate(m, small_env(), p, range(0, 10));
  const auto dir = scratch("agg");
  write_episode_csv((dir / "episodes.csv").string(), rep);
  const auto back = read_episode_csv((dir / "episodes.csv").string());
  ASSERT_EQ(back.rows.size(), rep.rows.size());
  const auto a = rep.aggregates(), b = back.aggregates();
  for (std::size_t i = 0; i < a.size(); ++i) {
    // Independent recomputation from the raw rows.
    std::vector<double> floors;
    double len = 0;
    for (const auto& r : back.rows)
      if (r.theme == a[i].theme) {
        floors.push_back(r.floor);
        len += r.length;
      }
    double fm = 0;
    for (double f : floors) fm += f;
    fm /= static_cast<double>(floors.size());
    EXPECT_NEAR(a[i].mean_floor, fm, 1e-12);
    EXPECT_NEAR(a[i].mean_length, len / static_cast<double>(floors.size()), 1e-12);
    EXPECT_NEAR(b[i].mean_return, a[i].mean_return, 1e-12);
  }
  fs::remove_all(dir);
}

TEST(Report, CsvParseErrors) {
  const auto dir = scratch("bad");
  {
    std::ofstream os(dir / "e.csv");
    os << kEpisodeCsvHeader << "\n0,ancient,1,0,zz,3,0,timeout,0,0\n";
  }
  EXPECT_THROW(read_episode_csv((dir / "e.csv").string()), ParseError);
  {
    std::ofstream os(dir / "h.csv");
    os << "nope\n";
  }
  EXPECT_THROW(read_episode_csv((dir / "h.csv").string()), ParseError);
  fs::remove_all(dir);
}

TEST(Stats, AsymmetricDeviation) {
  const auto c = asymmetric_deviation({2, 2, 2});
  EXPECT_EQ(c.up, 0.0);
  EXPECT_EQ(c.down, 0.0);
  // mean 1; one sample 2 above, two samples 1 below
  const auto d = asymmetric_deviation({0, 0, 3});
  EXPECT_DOUBLE_EQ(d.up, 2.0);
  EXPECT_DOUBLE_EQ(d.down, 1.0);
  EXPECT_DOUBLE_EQ(variance_of({1, 3}), 1.0);
}

TEST(Histogram, ConservationAndSplit) {
  EvalReport r;
  r.rows = {row(Theme::ancient, 0), row(Theme::modern, 2), row(Theme::moorish, 1), row(Theme::future, 0),
            row(Theme::industrial, 10)};
  const std::vector<Theme> train{Theme::ancient, Theme::industrial, Theme::modern};
  const auto h = termination_histogram({r}, train, 10);
  EXPECT_EQ(h.total_training(), 3);
  EXPECT_EQ(h.total_evaluation(), 2);
  EXPECT_EQ(h.training[0], 1);
  EXPECT_EQ(h.training[2], 1);
  EXPECT_EQ(h.training[10], 1);
  EXPECT_EQ(h.evaluation[0], 1);
  EXPECT_EQ(h.evaluation[1], 1);
  const auto img = histogram_image(h);
  EXPECT_GT(img.width, 0);
}

TEST(Histogram, AllAtFloorZeroIsOneBin) {
  EvalReport r;
  for (int i = 0; i < 6; ++i) r.rows.push_back(row(Theme::ancient, 0));
  const auto h = termination_histogram({r}, {Theme::ancient}, 10);
  int nonzero = 0;
  for (int c : h.training) nonzero += c > 0;
  EXPECT_EQ(nonzero, 1);
  EXPECT_EQ(h.training[0], 6);
  EXPECT_THROW(termination_histogram({}, {Theme::ancient}, 10), UsageError);
}

TEST(Curves, ConstantPerformanceHasZeroBand) {
  std::vector<EvalReport> reps;
  for (int u : {400, 200, 600}) {
    EvalReport r;
    r.update = u;
    for (auto t : {Theme::ancient, Theme::future})
      for (int i = 0; i < 3; ++i) r.rows.push_back(row(t, 2, 50));
    reps.push_back(r);
  }
  const auto pts = curve_points(reps);
  ASSERT_EQ(pts.size(), 6u);  // intervals x themes
  EXPECT_EQ(pts.front().update, 200);
  for (const auto& p : pts) {
    EXPECT_EQ(p.mean_floor, 2.0);
    EXPECT_EQ(p.floor_dev_up, 0.0);
    EXPECT_EQ(p.floor_dev_down, 0.0);
    EXPECT_EQ(p.length_std, 0.0);
  }
  const auto dir = scratch("curves");
  write_curves_csv((dir / "c.csv").string(), pts);
  std::ifstream is(dir / "c.csv");
  int lines = 0;
  std::string l;
  while (std::getline(is, l)) ++lines;
  EXPECT_EQ(lines, 7);
  const auto img = curves_image(pts);
  write_ppm((dir / "c.ppm").string(), img);
  const auto back = read_ppm((dir / "c.ppm").string());
  EXPECT_EQ(back.rgb, img.rgb);
  fs::remove_all(dir);
}

TEST(PathRender, FixtureExactPixelSet) {
  const auto layout = path_fixture::layout();
  const auto trace = trace_recording(path_fixture::recording());
  ASSERT_EQ(trace.size(), 5u);
  EXPECT_TRUE(trace_is_adjacent(trace));
  const PathStyle st;
  const auto img = render_floor_path(layout, trace, st);
  ASSERT_EQ(img.width, 48);
  ASSERT_EQ(img.height, 40);

  for (int py = 0; py < 40; ++py)
    for (int px = 0; px < 48; ++px) ASSERT_EQ(img.at(px, py), path_fixture::expected_pixel(px, py, st)) << px << "," << py;
  // Gradient endpoints.
  EXPECT_EQ(img.at(8 + 4, 8 + 4), (Rgb{255, 0, 0}));
  EXPECT_EQ(img.at(24 + 4, 24 + 4), (Rgb{0, 0, 255}));
}

TEST(PathRender, StationaryAgentIsOneCell) {
  auto rec = path_fixture::recording();
  for (auto& s : rec.steps) s.ticks = {{0, {1, 1}}, {0, {1, 1}}};
  const auto trace = trace_recording(rec);
  ASSERT_EQ(trace.size(), 1u);
  const auto img = render_floor_path(path_fixture::layout(), trace);
  int red = 0;
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) red += img.at(x, y) == Rgb{255, 0, 0};
  EXPECT_EQ(red, 16);
}

TEST(PathRender, RecordedEpisodesAreAdjacentAndRender) {
  auto m = small_agent(6);
  const std::vector<EpisodeSpec> s{{Theme::ancient, 3000, 0}, {Theme::future, 3001, 0}};
  const auto cfg = small_env();
  const auto run = run_episodes(m, cfg, s, 1, false, true);
  ASSERT_EQ(run.recordings.size(), 2u);
  for (const auto& rec : run.recordings) {
    EXPECT_TRUE(trace_is_adjacent(trace_recording(rec)));
    const auto bytes = env::encode_recording(rec);
    const auto back = env::decode_recording(ByteReader(bytes));
    const auto imgs = render_recording_paths(back, cfg);
    EXPECT_FALSE(imgs.empty());
  }
  auto other = cfg;
  other.room_size = 5;
  EXPECT_THROW(render_recording_paths(run.recordings[0], other), ConfigError);
}
