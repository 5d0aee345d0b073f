#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "support/small_model.hpp"
#include "towerlab/nn/gradcheck.hpp"

using namespace towerlab;
using namespace towerlab::model;

TEST(Model, EncoderWidthAtBothResolutions) {
  ModelConfig c;
  EXPECT_EQ(c.encoder_flatten_width(), 3136u);
  c.frame_height = c.frame_width = 64;
  EXPECT_EQ(c.encoder_flatten_width(), 1024u);
  AgentModel<float> m(c);
  Rng rng(0);
  m.initialize(rng);
  auto obs = small_model::random_obs<float>(c, 2, rng);
  const auto out = m.forward(obs);
  ASSERT_EQ(out.logits.size(), 3u);
  EXPECT_EQ(out.logits[0].shape(), (nn::Shape{2, 2}));
  EXPECT_EQ(out.logits[2].shape(), (nn::Shape{2, 3}));
  EXPECT_EQ(out.values.size(), 2u);
}

TEST(Model, TooSmallInputRejected) {
  ModelConfig c;
  c.frame_height = c.frame_width = 12;
  EXPECT_THROW(AgentModel<float>{c}, ConfigError);
  c = ModelConfig{};
  c.branch_sizes = {2, 1};
  EXPECT_THROW(AgentModel<float>{c}, ConfigError);
}

TEST(Model, EntropyAtInitNearUniform) {
  // Branch-mean entropy of uniform 2/2/3-way categoricals.
  const double uniform = (2 * std::log(2.0) + std::log(3.0)) / 3.0;
  EXPECT_NEAR(uniform, 0.8283, 1e-4);
  ModelConfig c;
  c.frame_height = c.frame_width = 64;
  AgentModel<float> m(c);
  Rng rng(1);
  m.initialize(rng);
  const auto obs = small_model::random_obs<float>(c, 16, rng);
  const auto ev = m.evaluate(obs, small_model::random_actions(c, 16, rng));
  for (float h : ev.entropies) EXPECT_NEAR(h, 0.8283, 1e-3);
}

TEST(Model, ActAndEvaluateAgree) {
  const auto c = small_model::reduced_config();
  AgentModel<double> m(c);
  Rng rng(2);
  m.initialize(rng);
  const auto obs = small_model::random_obs<double>(c, 8, rng);
  const auto acted = m.act(obs, rng);
  std::vector<std::vector<std::size_t>> actions;
  for (const auto& a : acted) actions.push_back(a.action);
  const auto ev = m.evaluate(obs, actions);
  for (std::size_t i = 0; i < 8; ++i) {
    EXPECT_NEAR(ev.log_probs[i], acted[i].log_prob, 1e-12);
    EXPECT_NEAR(ev.values[i], acted[i].value, 1e-12);
    double sum = 0;
    for (double l : acted[i].branch_log_probs) sum += l;
    EXPECT_NEAR(sum, acted[i].log_prob, 1e-12);
  }
}

TEST(Model, SamplingIsDeterministicGivenRng) {
  const auto c = small_model::reduced_config();
  AgentModel<float> m(c);
  Rng init(3);
  m.initialize(init);
  const auto obs = small_model::random_obs<float>(c, 4, init);
  Rng a(9), b(9);
  const auto ra = m.act(obs, a), rb = m.act(obs, b);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(ra[i].action, rb[i].action);
}

// At init the policy is near uniform; branches are drawn independently.
TEST(Model, InitialSamplesUniformAndIndependent) {
  const auto c = small_model::reduced_config();
  AgentModel<double> m(c);
  Rng rng(4);
  m.initialize(rng);
  const auto obs = small_model::random_obs<double>(c, 1, rng);
  const std::size_t n = 1 << 14;
  std::map<std::vector<std::size_t>, int> joint;
  for (std::size_t i = 0; i < n; ++i) ++joint[m.act(obs, rng)[0].action];
  ASSERT_EQ(joint.size(), 12u);
  const auto out = m.forward(obs);
  std::vector<std::vector<double>> p;
  for (const auto& l : out.logits) p.push_back(nn::softmax(std::vector<double>(l.data().begin(), l.data().end())));
  // Chi-square against the product of branch marginals, 11 dof; 0.999 quantile is 31.26.
  double chi = 0;
  for (const auto& [a, count] : joint) {
    const double e = static_cast<double>(n) * p[0][a[0]] * p[1][a[1]] * p[2][a[2]];
    chi += (count - e) * (count - e) / e;
  }
  EXPECT_LT(chi, 31.26);
}

TEST(Model, GreedyPicksArgmax) {
  const auto c = small_model::reduced_config();
  AgentModel<double> m(c);
  Rng rng(5);
  m.initialize(rng);
  const auto obs = small_model::random_obs<double>(c, 3, rng);
  const auto out = m.forward(obs);
  const auto g = m.act(obs, rng, true);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t b = 0; b < 3; ++b) {
      const auto k = c.branch_sizes[b];
      const double* row = out.logits[b].data().data() + i * k;
      EXPECT_EQ(g[i].action[b], static_cast<std::size_t>(std::max_element(row, row + k) - row));
    }
}

TEST(Model, EvaluateRejectsBadActions) {
  const auto c = small_model::reduced_config();
  AgentModel<double> m(c);
  Rng rng(6);
  m.initialize(rng);
  const auto obs = small_model::random_obs<double>(c, 2, rng);
  EXPECT_THROW(m.evaluate(obs, {{0, 0, 0}}), UsageError);
  EXPECT_THROW(m.evaluate(obs, {{0, 0, 0}, {0, 2, 0}}), UsageError);
  EXPECT_THROW(m.evaluate(obs, {{0, 0, 0}, {0, 0}}), UsageError);
  EXPECT_THROW(m.backward_evaluate({1}, {1}, {1}), UsageError);
}

TEST(Model, ValueAndPolicyTrunksAreSeparate) {
  const auto c = small_model::reduced_config();
  AgentModel<double> m(c);
  Rng rng(7);
  m.initialize(rng);
  const auto obs = small_model::random_obs<double>(c, 4, rng);
  m.evaluate(obs, small_model::random_actions(c, 4, rng));
  m.zero_grad();
  m.backward_evaluate({0, 0, 0, 0}, {0, 0, 0, 0}, {1, 1, 1, 1});
  for (auto* p : m.policy_parameters())
    for (double g : p->value.grad()) ASSERT_EQ(g, 0.0) << p->name;
  double trunk = 0;
  for (auto* p : m.trunk_parameters())
    for (double g : p->value.grad()) trunk += std::abs(g);
  EXPECT_GT(trunk, 0.0);
}

// Whole network (encoder, concat, trunks, heads) against central differences
// on a loss mixing log-probs, entropy and value.
TEST(Model, GradientMatchesFiniteDifferences) {
  const auto c = small_model::reduced_config();
  AgentModel<double> m(c);
  Rng rng(8);
  m.initialize(rng);
  for (auto* p : m.parameters())
    for (auto& v : p->value.data()) v *= 3.0;  // push heads away from near-zero logits
  const auto obs = small_model::random_obs<double>(c, 4, rng);
  const auto actions = small_model::random_actions(c, 4, rng);
  const std::vector<double> wl{0.7, -1.1, 0.4, 0.9}, we{0.3, 0.5, -0.2, 0.1}, wv{1.3, -0.6, 0.8, -0.4};
  auto loss = [&] {
    const auto ev = m.evaluate(obs, actions);
    double l = 0;
    for (std::size_t i = 0; i < 4; ++i) l += wl[i] * ev.log_probs[i] + we[i] * ev.entropies[i] + wv[i] * ev.values[i];
    return l;
  };
  nn::GradProbe<double> probe;
  probe.params = m.parameters();
  probe.loss = loss;
  probe.backward = [&] {
    m.zero_grad();
    loss();
    m.backward_evaluate(wl, we, wv);
  };
  probe.pattern = [&] { return m.activation_pattern(); };
  const auto r = nn::finite_difference_check(probe, 1e-4, 1e-5, 20000);
  EXPECT_TRUE(r.passed) << r.worst << " " << r.max_rel_error;
  EXPECT_GT(r.checked, 1000u);
}
