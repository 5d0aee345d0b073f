#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "towerlab/config/run_config.hpp"
#include "towerlab/ppo/train.hpp"

using namespace towerlab;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("towerlab_train_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

int line_count(const fs::path& p) {
  std::ifstream is(p);
  int n = 0;
  std::string l;
  while (std::getline(is, l)) ++n;
  return n;
}

// Small enough to train a few updates in well under a second each.
config::RunConfig tiny(config::Precision prec = config::Precision::f64) {
  auto c = config::desk_preset();
  c.precision = prec;
  c.seed = 17;
  c.env.frame_height = 16;
  c.env.frame_width = 16;
  c.env.time_budget = 60;
  c.model.hidden_size = 32;
  c.model.conv_stack = {{4, 4, 2}, {8, 3, 2}};
  c.ppo.total_updates = 6;
  c.ppo.trajectory_length = 32;
  c.ppo.minibatches = 2;
  c.ppo.epochs = 2;
  c.eval_interval = 3;
  c.checkpoint_interval = 0;
  c.eval.seeds = {1000};
  c.eval.repetitions = 1;
  c.eval.themes = {env::Theme::ancient, env::Theme::future};
  return c;
}

config::Assignments parse(const std::string& text) {
  std::istringstream is(text);
  return config::parse_ini(is);
}

}  // namespace

TEST(RunConfig, PaperFidelityPresetMatchesPublishedValues) {
  const auto c = config::paper_fidelity_preset();
  EXPECT_EQ(c.ppo.gamma, 0.99);
  EXPECT_EQ(c.ppo.gae_lambda, 0.95);
  EXPECT_EQ(c.ppo.value_coef, 0.5);
  EXPECT_EQ(c.ppo.entropy_coef, 0.01);
  EXPECT_EQ(c.ppo.epochs, 4);
  EXPECT_EQ(c.ppo.num_envs, 16);
  EXPECT_EQ(c.ppo.minibatches, 4);
  EXPECT_EQ(c.ppo.learning_rate, 3.25e-4);
  EXPECT_EQ(c.ppo.clip_range, 0.2);
  EXPECT_EQ(c.ppo.trajectory_length, 8192);
  EXPECT_EQ(c.ppo.total_updates, 50000);
  EXPECT_EQ(c.env.frame_height, 84);
  EXPECT_TRUE(c.env.double_normalization);
  EXPECT_EQ(c.ppo.anneal_floor, 0.0);
  EXPECT_EQ(c.model_config().encoder_flatten_width(), 3136u);
  EXPECT_EQ(c.train_seeds.size(), 100u);
  EXPECT_EQ(c.eval.seeds.size(), 5u);
  EXPECT_NO_THROW(c.validate());
}

TEST(RunConfig, DeskPreset) {
  const auto c = config::desk_preset();
  EXPECT_EQ(c.env.frame_height, 64);
  EXPECT_EQ(c.ppo.num_envs, 2);
  EXPECT_EQ(c.ppo.horizon(), 128);
  EXPECT_EQ(c.ppo.total_updates, 2000);
  EXPECT_TRUE(c.env.double_normalization);
  EXPECT_EQ(c.model_config().encoder_flatten_width(), 1024u);
}

TEST(RunConfig, IniRoundTrip) {
  auto c = tiny();
  c.train_seeds = {0, 1, 2, 3, 9, 20, 21};
  c.eval.seeds = {500, 501};
  const auto text = config::to_ini(c);
  const auto back = config::resolve(parse(text));
  EXPECT_EQ(config::to_ini(back), text);
  EXPECT_NE(text.find("seeds = 0-3,9,20-21"), std::string::npos);
  EXPECT_NE(text.find("conv_stack = 4x4s2,8x3s2"), std::string::npos);
}

TEST(RunConfig, OverridesApplyAfterFile) {
  auto a = parse("[run]\npreset = desk\n[ppo]\ntotal_updates = 50\n");
  const auto o = config::parse_overrides({"total_updates=10", "env.room_size=5", "eval.themes=moorish,future"});
  a.insert(a.end(), o.begin(), o.end());
  const auto c = config::resolve(a);
  EXPECT_EQ(c.ppo.total_updates, 10);
  EXPECT_EQ(c.env.room_size, 5);
  ASSERT_EQ(c.eval.themes.size(), 2u);
  EXPECT_EQ(c.eval.themes[1], env::Theme::future);
  EXPECT_NE(config::to_ini(c).find("total_updates = 10"), std::string::npos);
}

TEST(RunConfig, FieldLevelErrors) {
  auto msg = [](auto fn) {
    try {
      fn();
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  EXPECT_NE(msg([] { config::resolve(parse("[ppo]\ngamma = abc\n")); }).find("ppo.gamma"), std::string::npos);
  EXPECT_NE(msg([] { config::resolve(parse("[ppo]\nbogus = 1\n")); }).find("ppo.bogus"), std::string::npos);
  EXPECT_NE(msg([] { config::resolve(parse("[ppo]\nminibatches = 3\n")); }).find("minibatches"), std::string::npos);
  EXPECT_NE(msg([] { config::parse_overrides({"seeds=1"}); }).find("ambiguous"), std::string::npos);
  EXPECT_NE(msg([] { config::parse_overrides({"nonsense"}); }).find("key=value"), std::string::npos);
  EXPECT_NE(msg([] { config::resolve(parse("[eval]\nseeds = 5\n")); }).find("training seed pool"), std::string::npos);
  EXPECT_NE(msg([] { config::resolve(parse("[run]\npreset = huge\n")); }).find("preset"), std::string::npos);
  EXPECT_NE(msg([] { config::resolve(parse("[model]\nconv_stack = 3x3\n")); }).find("model.conv_stack"),
            std::string::npos);
  EXPECT_THROW(config::load("/nonexistent/file.cfg"), ConfigError);
}

TEST(Train, EmitsRowsCheckpointsAndEvalReports) {
  const auto dir = scratch("basic");
  const auto cfg = tiny();
  std::vector<int> evals;
  ppo::TrainOptions opt;
  opt.on_eval = [&](const eval::EvalReport& r) { evals.push_back(r.update); };
  EXPECT_EQ(ppo::train(cfg, dir, opt), 6);
  EXPECT_EQ(line_count(dir / "stats.csv"), 7);
  EXPECT_EQ(evals, (std::vector<int>{3, 6}));
  EXPECT_TRUE(fs::exists(ppo::checkpoint_path(dir, 3)));
  EXPECT_TRUE(fs::exists(ppo::checkpoint_path(dir, 6)));
  EXPECT_TRUE(fs::exists(dir / "eval" / "update_000006" / "episodes.csv"));
  EXPECT_TRUE(fs::exists(dir / "eval" / "curves.csv"));
  EXPECT_TRUE(fs::exists(dir / "eval" / "histogram.ppm"));
  EXPECT_EQ(line_count(dir / "eval" / "update_000003" / "episodes.csv"), 3);
  // Resolved config is complete and reloadable.
  const auto back = config::load((dir / "config.ini").string());
  EXPECT_EQ(config::to_ini(back), config::to_ini(cfg));
  fs::remove_all(dir);
}

TEST(Train, BitIdenticalStatsAcrossRuns) {
  for (auto prec : {config::Precision::f64, config::Precision::f32}) {
    const auto a = scratch("det_a"), b = scratch("det_b");
    auto cfg = tiny(prec);
    cfg.eval_interval = 0;
    ppo::train(cfg, a);
    ppo::train(cfg, b);
    EXPECT_EQ(slurp(a / "stats.csv"), slurp(b / "stats.csv"));
    fs::remove_all(a);
    fs::remove_all(b);
  }
}

TEST(Train, DifferentSeedsDiffer) {
  const auto a = scratch("seed_a"), b = scratch("seed_b");
  auto cfg = tiny();
  cfg.eval_interval = 0;
  ppo::train(cfg, a);
  cfg.seed = 18;
  ppo::train(cfg, b);
  EXPECT_NE(slurp(a / "stats.csv"), slurp(b / "stats.csv"));
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Train, ResumeReproducesUninterruptedRun) {
  for (auto prec : {config::Precision::f64, config::Precision::f32}) {
    const auto full = scratch("full"), part = scratch("part");
    auto cfg = tiny(prec);
    cfg.eval_interval = 0;
    ppo::train(cfg, full);
    ppo::TrainOptions first;
    first.stop_after = 2;
    EXPECT_EQ(ppo::train(cfg, part, first), 2);
    // A stray row past the saved state is discarded on resume.
    {
      std::ofstream os(part / "stats.csv", std::ios::app);
      os << "3,garbage\n";
    }
    ppo::TrainOptions rest;
    rest.resume = true;
    EXPECT_EQ(ppo::train(cfg, part, rest), 6);
    EXPECT_EQ(slurp(full / "stats.csv"), slurp(part / "stats.csv"));
    fs::remove_all(full);
    fs::remove_all(part);
  }
}

TEST(Train, ResumeRejectsChangedConfig) {
  const auto dir = scratch("changed");
  auto cfg = tiny();
  cfg.eval_interval = 0;
  ppo::TrainOptions first;
  first.stop_after = 1;
  ppo::train(cfg, dir, first);
  cfg.ppo.learning_rate = 1e-3;
  ppo::TrainOptions rest;
  rest.resume = true;
  EXPECT_THROW(ppo::train(cfg, dir, rest), ConfigError);
  fs::remove_all(dir);
}

// The run directory alone reproduces its evaluation reports.
TEST(Train, CheckpointReevaluationMatches) {
  const auto dir = scratch("reeval");
  const auto cfg = tiny(config::Precision::f32);
  ppo::train(cfg, dir);
  const auto loaded = config::load((dir / "config.ini").string());
  const auto out = scratch("reeval_out");
  ppo::evaluate_checkpoint(ppo::checkpoint_path(dir, 6), loaded, out, 6);
  EXPECT_EQ(slurp(out / "episodes.csv"), slurp(dir / "eval" / "update_000006" / "episodes.csv"));
  EXPECT_EQ(slurp(out / "recordings" / "episode_000001.tlep"),
            slurp(dir / "eval" / "update_000006" / "recordings" / "episode_000001.tlep"));
  fs::remove_all(dir);
  fs::remove_all(out);
}

TEST(Train, StatsColumnsAndAnnealing) {
  const auto dir = scratch("cols");
  auto cfg = tiny();
  cfg.eval_interval = 0;
  ppo::train(cfg, dir);
  std::ifstream is(dir / "stats.csv");
  std::string header, first;
  std::getline(is, header);
  std::getline(is, first);
  EXPECT_EQ(header, ppo::kStatsHeader);
  // update 1 runs at progress 0: full learning rate
  EXPECT_EQ(first.substr(0, first.find(',', 2)), "1,0.00032499999999999999");
  fs::remove_all(dir);
}
