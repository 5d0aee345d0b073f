#pragma once

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "towerlab/core/errors.hpp"
#include "towerlab/core/rng.hpp"
#include "towerlab/nn/distributions.hpp"
#include "towerlab/nn/init.hpp"
#include "towerlab/nn/layers.hpp"

namespace towerlab::model {

using nn::Shape;
using nn::Tensor;

struct ConvSpec {
  std::size_t channels = 0;
  std::size_t kernel = 0;
  std::size_t stride = 1;
  bool operator==(const ConvSpec&) const = default;
};

inline std::vector<ConvSpec> default_conv_stack() { return {{32, 8, 4}, {64, 4, 2}, {64, 3, 1}}; }

struct ModelConfig {
  std::size_t frame_height = 84;
  std::size_t frame_width = 84;
  std::size_t stacked_frames = 3;
  std::size_t color_channels = 3;
  std::size_t game_state_dims = 2;
  std::size_t hidden_size = 512;
  std::vector<std::size_t> branch_sizes{2, 2, 3};
  std::vector<ConvSpec> conv_stack = default_conv_stack();
  double hidden_gain = std::numbers::sqrt2;
  double value_gain = 1.0;
  double policy_gain = 0.01;

  std::size_t input_channels() const { return stacked_frames * color_channels; }

  void validate() const {
    if (stacked_frames < 1) throw ConfigError("model.stacked_frames must be >= 1");
    if (color_channels != 3) throw ConfigError("model.color_channels must be 3 (RGB)");
    if (hidden_size < 1) throw ConfigError("model.hidden_size must be >= 1");
    if (branch_sizes.empty()) throw ConfigError("model.branch_sizes must not be empty");
    for (auto b : branch_sizes)
      if (b < 2) throw ConfigError("model.branch_sizes entries must be >= 2, got " + std::to_string(b));
    if (conv_stack.empty()) throw ConfigError("model.conv_stack must not be empty");
    (void)encoder_output_shape();
  }

  // [channels, height, width] after the last convolution.
  Shape encoder_output_shape() const {
    Shape s{input_channels(), frame_height, frame_width};
    for (std::size_t i = 0; i < conv_stack.size(); ++i) {
      const auto& c = conv_stack[i];
      s = nn::output_shape(nn::LayerSpec::conv2d(s[0], c.channels, c.kernel, c.stride), s,
                           "encoder.conv" + std::to_string(i));
    }
    return s;
  }

  std::size_t encoder_flatten_width() const { return nn::shape_numel(encoder_output_shape()); }
};

// Batched network input. frames: [N, stacked*3, H, W], channel index
// frame * 3 + color with frames ordered oldest to newest. game_state: [N, G].
template <class T>
struct ObsBatch {
  Tensor<T> frames;
  Tensor<T> game_state;
  std::size_t size() const { return frames.rank() ? frames.dim(0) : 0; }
};

template <class T>
struct ForwardOutput {
  std::vector<Tensor<T>> logits;  // per branch, [N, branch size]
  std::vector<T> values;          // [N]
};

template <class T>
struct ActResult {
  std::vector<std::size_t> action;  // one index per branch
  std::vector<T> branch_log_probs;
  T log_prob{};  // joint = sum over branches
  T value{};
};

template <class T>
struct EvaluateResult {
  std::vector<T> log_probs;  // joint, per sample
  std::vector<T> entropies;  // mean of branch entropies, per sample
  std::vector<T> values;
};

// Actor-critic network: convolutional encoder over stacked frames, flatten,
// concatenation with the game-state vector, one shared hidden layer, then a
// value trunk (hidden + scalar) and a policy trunk (hidden + one logit head
// per action branch).
template <class T>
class AgentModel {
 public:
  explicit AgentModel(ModelConfig config) : config_(std::move(config)), concat_("concat", config_.game_state_dims) {
    config_.validate();
    std::size_t in_ch = config_.input_channels();
    for (std::size_t i = 0; i < config_.conv_stack.size(); ++i) {
      const auto& c = config_.conv_stack[i];
      encoder_.add(nn::LayerSpec::conv2d(in_ch, c.channels, c.kernel, c.stride), "encoder.conv" + std::to_string(i));
      encoder_.add(nn::LayerSpec::relu(), "encoder.relu" + std::to_string(i));
      in_ch = c.channels;
    }
    encoder_.add(nn::LayerSpec::flatten(), "encoder.flatten");
    encoder_[0].set_input_grad(false);
    const std::size_t h = config_.hidden_size;
    shared_.add(nn::LayerSpec::dense(config_.encoder_flatten_width() + config_.game_state_dims, h), "shared.dense");
    shared_.add(nn::LayerSpec::relu(), "shared.relu");
    value_.add(nn::LayerSpec::dense(h, h), "value.dense");
    value_.add(nn::LayerSpec::relu(), "value.relu");
    value_.add(nn::LayerSpec::dense(h, 1), "value.out");
    policy_.add(nn::LayerSpec::dense(h, h), "policy.dense");
    policy_.add(nn::LayerSpec::relu(), "policy.relu");
    for (std::size_t b = 0; b < config_.branch_sizes.size(); ++b)
      heads_.emplace_back("policy.head" + std::to_string(b), h, config_.branch_sizes[b]);
  }

  const ModelConfig& config() const noexcept { return config_; }

  void initialize(Rng& rng) {
    nn::init_sequential(encoder_, config_.hidden_gain, rng);
    nn::init_sequential(shared_, config_.hidden_gain, rng);
    init_dense(value_[0], config_.hidden_gain, rng);
    init_dense(value_[2], config_.value_gain, rng);
    init_dense(policy_[0], config_.hidden_gain, rng);
    for (auto& head : heads_) init_dense(head, config_.policy_gain, rng);
  }

  std::vector<nn::Parameter<T>*> parameters() {
    std::vector<nn::Parameter<T>*> out = encoder_.parameters();
    for (auto* p : shared_.parameters()) out.push_back(p);
    for (auto* p : value_.parameters()) out.push_back(p);
    for (auto* p : policy_.parameters()) out.push_back(p);
    for (auto& head : heads_)
      for (auto* p : head.parameters()) out.push_back(p);
    return out;
  }

  // Parameters private to one branch (the value trunk, or the policy trunk
  // plus its heads).
  std::vector<nn::Parameter<T>*> value_parameters() { return value_.parameters(); }
  std::vector<nn::Parameter<T>*> policy_parameters() {
    auto out = policy_.parameters();
    for (auto& head : heads_)
      for (auto* p : head.parameters()) out.push_back(p);
    return out;
  }
  std::vector<nn::Parameter<T>*> trunk_parameters() {
    auto out = encoder_.parameters();
    for (auto* p : shared_.parameters()) out.push_back(p);
    return out;
  }

  void zero_grad() {
    for (auto* p : parameters()) p->value.zero_grad();
  }

  std::size_t parameter_count() {
    std::size_t n = 0;
    for (auto* p : parameters()) n += p->value.size();
    return n;
  }

  ForwardOutput<T> forward(const ObsBatch<T>& obs) {
    check_batch(obs);
    const auto flat = encoder_.forward(obs.frames);
    const auto joined = concat_.forward(flat, obs.game_state);
    const auto hidden = shared_.forward(joined);
    ForwardOutput<T> out;
    const auto v = value_.forward(hidden);
    out.values.assign(v.data().begin(), v.data().end());
    const auto p = policy_.forward(hidden);
    for (auto& head : heads_) out.logits.push_back(head.forward(p));
    batch_ = obs.size();
    return out;
  }

  // Backpropagates d(loss)/d(logits) per branch and d(loss)/d(value) through
  // the whole network, accumulating parameter gradients.
  void backward(const std::vector<Tensor<T>>& dlogits, const std::vector<T>& dvalues) {
    if (batch_ == 0) throw UsageError("agent model: backward called before forward");
    if (dlogits.size() != heads_.size() || dvalues.size() != batch_)
      throw UsageError("agent model: gradient batch does not match the last forward pass");
    const std::size_t h = config_.hidden_size;
    Tensor<T> dp({batch_, h});
    for (std::size_t b = 0; b < heads_.size(); ++b) {
      const auto g = heads_[b].backward(dlogits[b]);
      for (std::size_t i = 0; i < g.size(); ++i) dp[i] += g[i];
    }
    auto dhidden = policy_.backward(dp);
    const auto dv = value_.backward(Tensor<T>({batch_, 1}, dvalues));
    for (std::size_t i = 0; i < dhidden.size(); ++i) dhidden[i] += dv[i];
    const auto djoined = shared_.backward(dhidden);
    (void)encoder_.backward(concat_.backward(djoined));
  }

  // One categorical draw per branch per sample, in sample-major order.
  std::vector<ActResult<T>> act(const ObsBatch<T>& obs, Rng& rng, bool greedy = false) {
    const auto out = forward(obs);
    std::vector<ActResult<T>> results(obs.size());
    for (std::size_t i = 0; i < obs.size(); ++i) {
      auto& r = results[i];
      r.value = out.values[i];
      r.log_prob = T{0};
      for (std::size_t b = 0; b < heads_.size(); ++b) {
        const auto row = logits_row(out.logits[b], i);
        const auto probs = nn::softmax(row);
        const auto logp = nn::log_softmax(row);
        std::size_t a;
        if (greedy) {
          a = static_cast<std::size_t>(std::max_element(probs.begin(), probs.end()) - probs.begin());
        } else {
          a = nn::categorical_sample(std::span<const T>(probs), rng);
        }
        r.action.push_back(a);
        r.branch_log_probs.push_back(logp[a]);
        r.log_prob += logp[a];
      }
    }
    return results;
  }

  // Joint log-probs, branch-mean entropies and values for given actions.
  // Keeps the softmax state needed by backward_evaluate.
  EvaluateResult<T> evaluate(const ObsBatch<T>& obs, const std::vector<std::vector<std::size_t>>& actions) {
    if (actions.size() != obs.size()) throw UsageError("evaluate: action batch size does not match observations");
    for (const auto& a : actions) {
      if (a.size() != heads_.size()) throw UsageError("evaluate: action has the wrong number of branches");
      for (std::size_t b = 0; b < a.size(); ++b)
        if (a[b] >= config_.branch_sizes[b])
          throw UsageError("evaluate: action index " + std::to_string(a[b]) + " out of range for branch " +
                           std::to_string(b) + " of size " + std::to_string(config_.branch_sizes[b]));
    }
    const auto out = forward(obs);
    const std::size_t n = obs.size(), nb = heads_.size();
    EvaluateResult<T> res;
    res.values = out.values;
    res.log_probs.assign(n, T{0});
    res.entropies.assign(n, T{0});
    eval_probs_.assign(nb, {});
    eval_logp_.assign(nb, {});
    eval_entropy_.assign(nb, std::vector<T>(n));
    eval_actions_ = actions;
    for (std::size_t b = 0; b < nb; ++b) {
      for (std::size_t i = 0; i < n; ++i) {
        const auto row = logits_row(out.logits[b], i);
        auto probs = nn::softmax(row);
        auto logp = nn::log_softmax(row);
        T hb{0};
        for (std::size_t j = 0; j < probs.size(); ++j) hb -= probs[j] * logp[j];
        eval_entropy_[b][i] = hb;
        res.entropies[i] += hb / static_cast<T>(nb);
        res.log_probs[i] += logp[actions[i][b]];
        eval_probs_[b].insert(eval_probs_[b].end(), probs.begin(), probs.end());
        eval_logp_[b].insert(eval_logp_[b].end(), logp.begin(), logp.end());
      }
    }
    return res;
  }

  // Given dL/d(log_prob), dL/d(entropy) and dL/d(value) per sample from the
  // last evaluate() call, accumulates parameter gradients.
  void backward_evaluate(const std::vector<T>& dlogp, const std::vector<T>& dentropy, const std::vector<T>& dvalue) {
    const std::size_t n = eval_actions_.size(), nb = heads_.size();
    if (n == 0) throw UsageError("backward_evaluate called before evaluate");
    if (dlogp.size() != n || dentropy.size() != n || dvalue.size() != n)
      throw UsageError("backward_evaluate: gradient sizes do not match the evaluated batch");
    std::vector<Tensor<T>> dlogits;
    for (std::size_t b = 0; b < nb; ++b) {
      const std::size_t k = config_.branch_sizes[b];
      Tensor<T> g({n, k});
      for (std::size_t i = 0; i < n; ++i) {
        const T* p = eval_probs_[b].data() + i * k;
        const T* lp = eval_logp_[b].data() + i * k;
        const T hb = eval_entropy_[b][i];
        const T de = dentropy[i] / static_cast<T>(nb);
        for (std::size_t j = 0; j < k; ++j) {
          const T onehot = (j == eval_actions_[i][b]) ? T{1} : T{0};
          // d log p_a / dz_j = 1[j=a] - p_j;  dH/dz_j = -p_j (log p_j + H)
          g[i * k + j] = dlogp[i] * (onehot - p[j]) - de * p[j] * (lp[j] + hb);
        }
      }
      dlogits.push_back(std::move(g));
    }
    backward(dlogits, dvalue);
  }

  // Concatenated ReLU masks of the last forward pass (for gradient checks).
  std::vector<unsigned char> activation_pattern() const {
    auto out = encoder_.activation_pattern();
    for (const auto* s : {&shared_, &value_, &policy_}) {
      const auto m = s->activation_pattern();
      out.insert(out.end(), m.begin(), m.end());
    }
    return out;
  }

 private:
  static void init_dense(nn::Layer<T>& layer, double gain, Rng& rng) {
    auto params = layer.parameters();
    nn::orthogonal_init(params[0]->value, gain, rng);
    nn::zero_fill(params[1]->value);
  }

  static std::vector<T> logits_row(const Tensor<T>& logits, std::size_t i) {
    const std::size_t k = logits.dim(1);
    return std::vector<T>(logits.data().begin() + static_cast<std::ptrdiff_t>(i * k),
                          logits.data().begin() + static_cast<std::ptrdiff_t>((i + 1) * k));
  }

  void check_batch(const ObsBatch<T>& obs) const {
    const Shape expected_frames{config_.input_channels(), config_.frame_height, config_.frame_width};
    if (obs.frames.rank() != 4 || nn::sample_shape(obs.frames.shape()) != expected_frames)
      throw UsageError("agent model: frame batch shape " + nn::shape_str(obs.frames.shape()) + " does not match [N" +
                       "x" + std::to_string(expected_frames[0]) + "x" + std::to_string(expected_frames[1]) + "x" +
                       std::to_string(expected_frames[2]) + "]");
    if (obs.game_state.rank() != 2 || obs.game_state.dim(1) != config_.game_state_dims ||
        obs.game_state.dim(0) != obs.frames.dim(0))
      throw UsageError("agent model: game-state batch shape " + nn::shape_str(obs.game_state.shape()) + " mismatch");
  }

  ModelConfig config_;
  nn::Sequential<T> encoder_;
  nn::Concat<T> concat_;
  nn::Sequential<T> shared_;
  nn::Sequential<T> value_;
  nn::Sequential<T> policy_;
  std::vector<nn::Dense<T>> heads_;
  std::size_t batch_ = 0;

  std::vector<std::vector<T>> eval_probs_;
  std::vector<std::vector<T>> eval_logp_;
  std::vector<std::vector<T>> eval_entropy_;
  std::vector<std::vector<std::size_t>> eval_actions_;
};

}  // namespace towerlab::model
