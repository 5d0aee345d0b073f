#pragma once

// Run configuration and its text form.
//
// File grammar (INI subset, parsed with boost::property_tree):
//   file    := { line }
//   line    := section | entry | comment | blank
//   section := "[" name "]"
//   entry   := key "=" value
//   comment := (";" | "#") anything
// Sections: run, env, model, ppo, train, eval. Every key is typed (integer,
// real, bool as true/false/1/0, string, or list). Lists are comma
// separated; seed lists also accept inclusive ranges "A-B"; conv stacks are
// "CxKsS" items (channels x kernel, stride S). Unknown sections or keys are
// errors. Values not given keep the preset's value; "run.preset" picks the
// preset (default desk) and must appear before anything else is applied.

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <cstdio>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "towerlab/core/errors.hpp"
#include "towerlab/env/types.hpp"
#include "towerlab/eval/protocol.hpp"
#include "towerlab/model/agent_model.hpp"
#include "towerlab/ppo/config.hpp"

namespace towerlab::config {

enum class Precision { f32, f64 };

struct RunConfig {
  std::string preset = "desk";
  std::uint64_t seed = 0;
  Precision precision = Precision::f32;
  int eval_interval = 200;        // 0 disables periodic evaluation
  int checkpoint_interval = 200;  // eval updates always checkpoint too
  int threads = 1;                // vec-env stepping threads
  env::EnvConfig env;
  model::ModelConfig model;
  ppo::PPOConfig ppo;
  std::vector<std::uint64_t> train_seeds;
  std::vector<env::Theme> train_themes{env::Theme::ancient, env::Theme::industrial, env::Theme::modern};
  eval::EvalProtocol eval;

  // Model input dimensions follow the environment.
  model::ModelConfig model_config() const {
    auto m = model;
    m.frame_height = static_cast<std::size_t>(env.frame_height);
    m.frame_width = static_cast<std::size_t>(env.frame_width);
    m.stacked_frames = static_cast<std::size_t>(env.stacked_frames);
    return m;
  }

  void validate() const {
    if (preset != "desk" && preset != "paper-fidelity") throw ConfigError("run.preset: unknown preset '" + preset + "'");
    if (eval_interval < 0) throw ConfigError("run.eval_interval must be >= 0");
    if (checkpoint_interval < 0) throw ConfigError("run.checkpoint_interval must be >= 0");
    if (threads < 1) throw ConfigError("run.threads must be >= 1");
    env.validate();
    model_config().validate();
    ppo.validate();
    if (train_seeds.empty()) throw ConfigError("train.seeds must not be empty");
    if (train_themes.empty()) throw ConfigError("train.themes must not be empty");
    eval.validate(train_seeds);
  }
};

inline std::vector<std::uint64_t> seed_span(std::uint64_t first, std::uint64_t count) {
  std::vector<std::uint64_t> s(count);
  for (std::uint64_t i = 0; i < count; ++i) s[i] = first + i;
  return s;
}

inline RunConfig paper_fidelity_preset() {
  RunConfig c;
  c.preset = "paper-fidelity";
  c.env.frame_height = 84;
  c.env.frame_width = 84;
  c.ppo = ppo::PPOConfig{};  // the PPO defaults are the published values
  c.train_seeds = seed_span(0, 100);
  c.eval.seeds = seed_span(1000, 5);
  return c;
}

inline RunConfig desk_preset() {
  RunConfig c;
  c.preset = "desk";
  c.env.frame_height = 64;
  c.env.frame_width = 64;
  c.ppo.num_envs = 2;
  c.ppo.trajectory_length = 256;  // 2 envs x 128 steps
  c.ppo.total_updates = 2000;
  c.train_seeds = seed_span(0, 100);
  c.eval.seeds = seed_span(1000, 5);
  return c;
}

inline RunConfig preset(const std::string& name) {
  if (name == "desk") return desk_preset();
  if (name == "paper-fidelity") return paper_fidelity_preset();
  throw ConfigError("run.preset: unknown preset '" + name + "' (expected desk or paper-fidelity)");
}

namespace detail {

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

// Shortest text that reads back to the same double.
inline std::string fmt(double v) {
  char b[40];
  const auto r = std::to_chars(b, b + sizeof b, v);
  return std::string(b, r.ptr);
}

[[noreturn]] inline void bad(const std::string& key, const std::string& want, const std::string& got) {
  throw ConfigError("field '" + key + "': expected " + want + ", got '" + got + "'");
}

inline long long to_int(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const auto x = std::stoll(v, &pos);
    if (pos == v.size()) return x;
  } catch (const std::exception&) {
  }
  bad(key, "an integer", v);
}

inline std::uint64_t to_u64(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    if (!v.empty() && v[0] != '-') {
      const auto x = std::stoull(v, &pos);
      if (pos == v.size()) return x;
    }
  } catch (const std::exception&) {
  }
  bad(key, "a non-negative integer", v);
}

inline double to_real(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const auto x = std::stod(v, &pos);
    if (pos == v.size()) return x;
  } catch (const std::exception&) {
  }
  bad(key, "a number", v);
}

inline bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  bad(key, "true or false", v);
}

inline std::vector<std::uint64_t> to_seeds(const std::string& key, const std::string& v) {
  std::vector<std::uint64_t> out;
  for (const auto& item : split(v, ',')) {
    const auto dash = item.find('-', 1);
    if (dash == std::string::npos) {
      out.push_back(to_u64(key, item));
    } else {
      const auto a = to_u64(key, trim(item.substr(0, dash))), b = to_u64(key, trim(item.substr(dash + 1)));
      if (b < a) bad(key, "an increasing range", item);
      for (auto s = a; s <= b; ++s) out.push_back(s);
    }
  }
  if (out.empty()) bad(key, "at least one seed", v);
  return out;
}

inline std::string seeds_str(const std::vector<std::uint64_t>& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size();) {
    std::size_t j = i;
    while (j + 1 < s.size() && s[j + 1] == s[j] + 1) ++j;
    if (!out.empty()) out += ',';
    out += std::to_string(s[i]);
    if (j > i) out += '-' + std::to_string(s[j]);
    i = j + 1;
  }
  return out;
}

inline std::vector<env::Theme> to_themes(const std::string& key, const std::string& v) {
  std::vector<env::Theme> out;
  for (const auto& item : split(v, ',')) {
    try {
      out.push_back(env::parse_theme(item));
    } catch (const std::exception&) {
      bad(key, "theme names (ancient, industrial, modern, moorish, future)", item);
    }
  }
  if (out.empty()) bad(key, "at least one theme", v);
  return out;
}

inline std::string themes_str(const std::vector<env::Theme>& t) {
  std::string out;
  for (auto x : t) out += (out.empty() ? "" : ",") + std::string(env::theme_name(x));
  return out;
}

inline std::vector<model::ConvSpec> to_convs(const std::string& key, const std::string& v) {
  std::vector<model::ConvSpec> out;
  for (const auto& item : split(v, ',')) {
    unsigned long c = 0, k = 0, s = 0;
    char tail = 0;
    if (std::sscanf(item.c_str(), "%lux%lus%lu%c", &c, &k, &s, &tail) != 3 || c == 0 || k == 0 || s == 0)
      bad(key, "conv items like 32x8s4", item);
    out.push_back({c, k, s});
  }
  if (out.empty()) bad(key, "at least one conv layer", v);
  return out;
}

inline std::string convs_str(const std::vector<model::ConvSpec>& cs) {
  std::string out;
  for (const auto& c : cs)
    out += (out.empty() ? "" : ",") + std::to_string(c.channels) + "x" + std::to_string(c.kernel) + "s" +
           std::to_string(c.stride);
  return out;
}

// One accessor per key: how to read it into a RunConfig and how to print it.
struct Field {
  std::string key;  // section.name
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define TL_INT(k, m)                                                                                \
  Field {                                                                                           \
    k, [](RunConfig& c, const std::string& v) { c.m = static_cast<decltype(c.m)>(to_int(k, v)); }, \
        [](const RunConfig& c) { return std::to_string(c.m); }                                      \
  }
#define TL_REAL(k, m) \
  Field { k, [](RunConfig& c, const std::string& v) { c.m = to_real(k, v); }, [](const RunConfig& c) { return fmt(c.m); } }
#define TL_BOOL(k, m)                                                   \
  Field {                                                               \
    k, [](RunConfig& c, const std::string& v) { c.m = to_bool(k, v); }, \
        [](const RunConfig& c) { return std::string(c.m ? "true" : "false"); }   \
  }

inline const std::vector<Field>& fields() {
  static const std::vector<Field> table{
      {"run.preset", [](RunConfig& c, const std::string& v) { c.preset = v; }, [](const RunConfig& c) { return c.preset; }},
      {"run.seed", [](RunConfig& c, const std::string& v) { c.seed = to_u64("run.seed", v); },
       [](const RunConfig& c) { return std::to_string(c.seed); }},
      {"run.precision",
       [](RunConfig& c, const std::string& v) {
         if (v == "float") c.precision = Precision::f32;
         else if (v == "double") c.precision = Precision::f64;
         else bad("run.precision", "float or double", v);
       },
       [](const RunConfig& c) { return std::string(c.precision == Precision::f32 ? "float" : "double"); }},
      TL_INT("run.eval_interval", eval_interval),
      TL_INT("run.checkpoint_interval", checkpoint_interval),
      TL_INT("run.threads", threads),
      TL_INT("env.frame_height", env.frame_height),
      TL_INT("env.frame_width", env.frame_width),
      TL_INT("env.stacked_frames", env.stacked_frames),
      TL_INT("env.frame_skip", env.frame_skip),
      TL_INT("env.motion_ticks", env.motion_ticks),
      TL_INT("env.floor_cap", env.floor_cap),
      TL_INT("env.key_intro_floor", env.key_intro_floor),
      TL_INT("env.gap_intro_floor", env.gap_intro_floor),
      TL_INT("env.double_gap_floor", env.double_gap_floor),
      TL_INT("env.room_size", env.room_size),
      TL_INT("env.time_budget", env.time_budget),
      TL_INT("env.floor_time_bonus", env.floor_time_bonus),
      TL_INT("env.orb_time_bonus", env.orb_time_bonus),
      TL_BOOL("env.double_normalization", env.double_normalization),
      TL_INT("env.view_ahead", env.view_ahead),
      TL_INT("env.view_behind", env.view_behind),
      TL_INT("env.view_side", env.view_side),
      TL_INT("model.hidden_size", model.hidden_size),
      {"model.conv_stack", [](RunConfig& c, const std::string& v) { c.model.conv_stack = to_convs("model.conv_stack", v); },
       [](const RunConfig& c) { return convs_str(c.model.conv_stack); }},
      TL_REAL("model.hidden_gain", model.hidden_gain),
      TL_REAL("model.value_gain", model.value_gain),
      TL_REAL("model.policy_gain", model.policy_gain),
      TL_REAL("ppo.gamma", ppo.gamma),
      TL_REAL("ppo.gae_lambda", ppo.gae_lambda),
      TL_REAL("ppo.value_coef", ppo.value_coef),
      TL_REAL("ppo.entropy_coef", ppo.entropy_coef),
      TL_INT("ppo.total_updates", ppo.total_updates),
      TL_INT("ppo.epochs", ppo.epochs),
      TL_INT("ppo.num_envs", ppo.num_envs),
      TL_INT("ppo.trajectory_length", ppo.trajectory_length),
      TL_BOOL("ppo.trajectory_per_env", ppo.trajectory_per_env),
      TL_INT("ppo.minibatches", ppo.minibatches),
      TL_REAL("ppo.learning_rate", ppo.learning_rate),
      TL_REAL("ppo.clip_range", ppo.clip_range),
      TL_REAL("ppo.anneal_floor", ppo.anneal_floor),
      TL_BOOL("ppo.normalize_advantages", ppo.normalize_advantages),
      TL_REAL("ppo.max_grad_norm", ppo.max_grad_norm),
      {"train.seeds", [](RunConfig& c, const std::string& v) { c.train_seeds = to_seeds("train.seeds", v); },
       [](const RunConfig& c) { return seeds_str(c.train_seeds); }},
      {"train.themes", [](RunConfig& c, const std::string& v) { c.train_themes = to_themes("train.themes", v); },
       [](const RunConfig& c) { return themes_str(c.train_themes); }},
      {"eval.seeds", [](RunConfig& c, const std::string& v) { c.eval.seeds = to_seeds("eval.seeds", v); },
       [](const RunConfig& c) { return seeds_str(c.eval.seeds); }},
      TL_INT("eval.repetitions", eval.repetitions),
      {"eval.themes", [](RunConfig& c, const std::string& v) { c.eval.themes = to_themes("eval.themes", v); },
       [](const RunConfig& c) { return themes_str(c.eval.themes); }},
      TL_BOOL("eval.greedy", eval.greedy),
      {"eval.rng_seed", [](RunConfig& c, const std::string& v) { c.eval.rng_seed = to_u64("eval.rng_seed", v); },
       [](const RunConfig& c) { return std::to_string(c.eval.rng_seed); }},
      TL_BOOL("eval.record_paths", eval.record_paths),
  };
  return table;
}

#undef TL_INT
#undef TL_REAL
#undef TL_BOOL

inline const Field& field(const std::string& key) {
  for (const auto& f : fields())
    if (f.key == key) return f;
  throw ConfigError("unknown config key '" + key + "'");
}

// "name" without a section resolves when exactly one section has it.
inline std::string qualify(const std::string& key) {
  if (key.find('.') != std::string::npos) return field(key).key;
  std::string hit;
  for (const auto& f : fields())
    if (f.key.substr(f.key.find('.') + 1) == key) {
      if (!hit.empty()) throw ConfigError("config key '" + key + "' is ambiguous; qualify it with a section");
      hit = f.key;
    }
  if (hit.empty()) throw ConfigError("unknown config key '" + key + "'");
  return hit;
}

}  // namespace detail

using Assignments = std::vector<std::pair<std::string, std::string>>;

// key=value entries in file order, keys fully qualified.
inline Assignments parse_ini(std::istream& is, const std::string& source = "config") {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(is, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(source + ": " + e.message() + " (line " + std::to_string(e.line()) + ")");
  }
  Assignments out;
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty())
      throw ConfigError(source + ": entry '" + section + "' must be inside a section");
    for (const auto& [name, value] : body) {
      const auto key = section + "." + name;
      (void)detail::field(key);
      out.emplace_back(key, detail::trim(value.data()));
    }
  }
  return out;
}

inline Assignments parse_overrides(const std::vector<std::string>& items) {
  Assignments out;
  for (const auto& s : items) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + s + "' is not key=value");
    out.emplace_back(detail::qualify(detail::trim(s.substr(0, eq))), detail::trim(s.substr(eq + 1)));
  }
  return out;
}

// Preset (run.preset from the assignments, default desk), then the
// assignments in order, then validation.
inline RunConfig resolve(const Assignments& assignments) {
  std::string name = "desk";
  for (const auto& [k, v] : assignments)
    if (k == "run.preset") name = v;
  RunConfig c = preset(name);
  for (const auto& [k, v] : assignments) detail::field(k).set(c, v);
  c.validate();
  return c;
}

inline RunConfig load(const std::string& path, const std::vector<std::string>& overrides = {}) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config file '" + path + "'");
  auto a = parse_ini(is, path);
  const auto o = parse_overrides(overrides);
  a.insert(a.end(), o.begin(), o.end());
  return resolve(a);
}

// Every key, grouped by section, in table order.
inline std::string to_ini(const RunConfig& c) {
  std::ostringstream os;
  std::string section;
  for (const auto& f : detail::fields()) {
    const auto dot = f.key.find('.');
    const auto s = f.key.substr(0, dot);
    if (s != section) {
      os << (section.empty() ? "" : "\n") << '[' << s << "]\n";
      section = s;
    }
    os << f.key.substr(dot + 1) << " = " << f.get(c) << '\n';
  }
  return os.str();
}

inline void save(const std::string& path, const RunConfig& c) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  os << to_ini(c);
  if (!os) throw IoError("write to '" + path + "' failed");
}

}  // namespace towerlab::config
