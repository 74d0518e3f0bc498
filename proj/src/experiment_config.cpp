#include "wmg/experiment_config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "wmg/baselines.hpp"
#include "wmg/text.hpp"
#include "wmg/wmg_agent.hpp"

namespace wmg {

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::Wmg: return "wmg";
    case ModelKind::NrWmg: return "nr-wmg";
    case ModelKind::Gru: return "gru";
  }
  return "?";
}

ModelKind parse_model_kind(const std::string& text) {
  std::string t = trim(text);
  std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return std::tolower(c); });
  if (t == "wmg") return ModelKind::Wmg;
  if (t == "nr-wmg" || t == "nrwmg") return ModelKind::NrWmg;
  if (t == "gru") return ModelKind::Gru;
  throw std::invalid_argument("Model: expected wmg, nr-wmg or gru, got '" + text + "'");
}

ExperimentConfig::ExperimentConfig() {
  train.t_max = 16;
  train.gamma = 0.5;
  train.entropy_beta = 0.01;
  train.learning_rate = 1.6e-4;
  train.adam_eps = 1e-6;
  train.grad_clip = 16.0;
  train.reward_scale = 2.0;
  train.total_steps = 1000000;
}

namespace {

enum Applies : unsigned { kAll = 7, kWmg = 1, kNr = 2, kGru = 4, kWmgBoth = 3 };

unsigned bit(ModelKind m) {
  switch (m) {
    case ModelKind::Wmg: return kWmg;
    case ModelKind::NrWmg: return kNr;
    case ModelKind::Gru: return kGru;
  }
  return 0;
}

// Shortest of %.15g..%.17g that reads back exactly.
std::string fmt(double v) {
  char buf[40];
  for (int precision = 15; precision <= 17; ++precision) {
    std::snprintf(buf, sizeof buf, "%.*g", precision, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

struct Field {
  std::string name;
  std::vector<std::string> aliases;
  unsigned applies;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<void(ExperimentConfig&)> unset;
  std::function<std::string(const ExperimentConfig&)> get;
};

std::size_t size_value(const std::string& v, const std::string& key) {
  return static_cast<std::size_t>(parse_unsigned(v, key));
}

Field size_field(std::string name, unsigned applies, std::size_t ExperimentConfig::*member,
                 std::vector<std::string> aliases = {}) {
  const std::string key = name;
  return Field{std::move(name), std::move(aliases), applies,
               [member, key](ExperimentConfig& c, const std::string& v) { c.*member = size_value(v, key); },
               nullptr,
               [member](const ExperimentConfig& c) { return std::to_string(c.*member); }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    f.push_back({"Model", {}, kAll,
                 [](ExperimentConfig& c, const std::string& v) { c.model = parse_model_kind(v); }, nullptr,
                 [](const ExperimentConfig& c) { return to_string(c.model); }});
    f.push_back(size_field("Pattern size", kAll, &ExperimentConfig::pattern_size, {"D"}));
    f.push_back(size_field("Max graph size", kAll, &ExperimentConfig::max_graph_size, {"N"}));
    f.push_back({"Total steps", {}, kAll,
                 [](ExperimentConfig& c, const std::string& v) { c.train.total_steps = parse_unsigned(v, "Total steps"); },
                 nullptr, [](const ExperimentConfig& c) { return std::to_string(c.train.total_steps); }});
    f.push_back({"Seed", {}, kAll,
                 [](ExperimentConfig& c, const std::string& v) { c.train.seed = parse_unsigned(v, "Seed"); },
                 nullptr, [](const ExperimentConfig& c) { return std::to_string(c.train.seed); }});
    f.push_back({"Metrics interval", {}, kAll,
                 [](ExperimentConfig& c, const std::string& v) {
                   c.train.metrics_interval = parse_unsigned(v, "Metrics interval");
                 },
                 nullptr, [](const ExperimentConfig& c) { return std::to_string(c.train.metrics_interval); }});
    f.push_back({"Checkpoint interval", {}, kAll,
                 [](ExperimentConfig& c, const std::string& v) {
                   c.train.checkpoint_interval = parse_unsigned(v, "Checkpoint interval");
                 },
                 [](ExperimentConfig& c) { c.train.checkpoint_interval = 0; },
                 [](const ExperimentConfig& c) { return std::to_string(c.train.checkpoint_interval); }});
    f.push_back({"Output directory", {}, kAll,
                 [](ExperimentConfig& c, const std::string& v) { c.output_dir = v; },
                 [](ExperimentConfig& c) { c.output_dir.clear(); },
                 [](const ExperimentConfig& c) { return c.output_dir.empty() ? std::string("-") : c.output_dir; }});

    f.push_back({"A3C t_max", {}, kAll,
                 [](ExperimentConfig& c, const std::string& v) { c.train.t_max = size_value(v, "A3C t_max"); },
                 nullptr, [](const ExperimentConfig& c) { return std::to_string(c.train.t_max); }});
    f.push_back({"Discount factor gamma", {}, kAll,
                 [](ExperimentConfig& c, const std::string& v) {
                   c.train.gamma = parse_double(v, "Discount factor gamma");
                 },
                 nullptr, [](const ExperimentConfig& c) { return fmt(c.train.gamma); }});
    f.push_back({"Entropy term strength beta", {}, kAll,
                 [](ExperimentConfig& c, const std::string& v) {
                   c.train.entropy_beta = parse_double(v, "Entropy term strength beta");
                 },
                 nullptr, [](const ExperimentConfig& c) { return fmt(c.train.entropy_beta); }});
    f.push_back({"Learning rate", {}, kAll,
                 [](ExperimentConfig& c, const std::string& v) {
                   c.train.learning_rate = parse_double(v, "Learning rate");
                 },
                 nullptr, [](const ExperimentConfig& c) { return fmt(c.train.learning_rate); }});
    f.push_back({"Adam eps", {}, kAll,
                 [](ExperimentConfig& c, const std::string& v) { c.train.adam_eps = parse_double(v, "Adam eps"); },
                 nullptr, [](const ExperimentConfig& c) { return fmt(c.train.adam_eps); }});
    f.push_back({"Gradient clipping threshold", {}, kAll,
                 [](ExperimentConfig& c, const std::string& v) {
                   c.train.grad_clip = parse_double(v, "Gradient clipping threshold");
                 },
                 nullptr, [](const ExperimentConfig& c) { return fmt(c.train.grad_clip); }});
    f.push_back({"Reward scale factor", {}, kAll,
                 [](ExperimentConfig& c, const std::string& v) {
                   c.train.reward_scale = parse_double(v, "Reward scale factor");
                 },
                 nullptr, [](const ExperimentConfig& c) { return fmt(c.train.reward_scale); }});
    f.push_back({"Learning rate annealing gamma", {}, kAll,
                 [](ExperimentConfig& c, const std::string& v) {
                   c.train.anneal_gamma = parse_double(v, "Learning rate annealing gamma");
                 },
                 [](ExperimentConfig& c) { c.train.anneal_gamma.reset(); },
                 [](const ExperimentConfig& c) {
                   return c.train.anneal_gamma ? fmt(*c.train.anneal_gamma) : std::string("-");
                 }});
    f.push_back({"Learning rate annealing interval", {}, kAll,
                 [](ExperimentConfig& c, const std::string& v) {
                   c.train.anneal_interval = parse_unsigned(v, "Learning rate annealing interval");
                 },
                 nullptr, [](const ExperimentConfig& c) { return std::to_string(c.train.anneal_interval); }});

    f.push_back(size_field("Actor-critic hidden layer size", kAll, &ExperimentConfig::ac_hidden));
    f.push_back(size_field("WMG attention head size", kWmgBoth, &ExperimentConfig::head_size));
    f.push_back(size_field("WMG attention heads", kWmgBoth, &ExperimentConfig::heads));
    f.push_back(size_field("WMG Memos", kWmgBoth, &ExperimentConfig::memo_count));
    f.push_back(size_field("WMG Memo size", kWmg, &ExperimentConfig::memo_size));
    f.push_back(size_field("WMG hidden layer size", kWmgBoth, &ExperimentConfig::ff_hidden));
    f.push_back(size_field("WMG layers", kWmgBoth, &ExperimentConfig::layers));
    f.push_back({"nr-WMG history", {}, kNr,
                 [](ExperimentConfig& c, const std::string& v) {
                   if (trim(v) == "all") {
                     c.nr_history.reset();
                   } else {
                     c.nr_history = size_value(v, "nr-WMG history");
                   }
                 },
                 [](ExperimentConfig& c) { c.nr_history.reset(); },
                 [](const ExperimentConfig& c) {
                   return c.nr_history ? std::to_string(*c.nr_history) : std::string("all");
                 }});
    f.push_back({"nr-WMG age slots", {}, kNr,
                 [](ExperimentConfig& c, const std::string& v) {
                   c.nr_age_slots = size_value(v, "nr-WMG age slots");
                 },
                 [](ExperimentConfig& c) { c.nr_age_slots.reset(); },
                 [](const ExperimentConfig& c) {
                   return c.nr_age_slots ? std::to_string(*c.nr_age_slots) : std::string("-");
                 }});
    f.push_back(size_field("GRU observation embed size", kGru, &ExperimentConfig::gru_embed,
                           {"GRU observation embedding size"}));
    f.push_back(size_field("GRU size", kGru, &ExperimentConfig::gru_size));
    return f;
  }();
  return table;
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

const Field* find_field(const std::string& key) {
  const std::string k = lower(canonical_name(key));
  for (const auto& f : fields()) {
    if (lower(f.name) == k) return &f;
    for (const auto& a : f.aliases) {
      if (lower(a) == k) return &f;
    }
  }
  return nullptr;
}

}  // namespace

void apply_setting(ExperimentConfig& config, const std::string& key, const std::string& value) {
  const Field* f = find_field(key);
  if (!f) throw std::invalid_argument("unknown config key '" + trim(key) + "'");
  const std::string v = trim(value);
  if (v == "-") {
    if (f->unset) f->unset(config);
    config.assigned.erase(f->name);
    return;
  }
  f->set(config, v);
  config.assigned.insert(f->name);
}

void ExperimentConfig::validate() const {
  if (pattern_size == 0) throw std::invalid_argument("Pattern size: must be >= 1");
  if (max_graph_size < 2) throw std::invalid_argument("Max graph size: must be >= 2");
  train.validate();
  if (ac_hidden == 0) throw std::invalid_argument("Actor-critic hidden layer size: must be >= 1");
  for (const auto& f : fields()) {
    if (!(f.applies & bit(model)) && assigned.count(f.name)) {
      throw std::invalid_argument(f.name + ": does not apply to model " + to_string(model));
    }
  }
  if (model == ModelKind::Wmg || model == ModelKind::NrWmg) {
    if (heads == 0) throw std::invalid_argument("WMG attention heads: must be >= 1");
    if (head_size == 0) throw std::invalid_argument("WMG attention head size: must be >= 1");
    if (layers == 0) throw std::invalid_argument("WMG layers: must be >= 1");
    if (ff_hidden == 0) throw std::invalid_argument("WMG hidden layer size: must be >= 1");
  }
  if (model == ModelKind::Wmg && memo_count > 0 && memo_size == 0) {
    throw std::invalid_argument("WMG Memo size: must be >= 1 when WMG Memos > 0");
  }
  if (model == ModelKind::NrWmg && assigned.count("WMG Memos") && memo_count != 0) {
    throw std::invalid_argument("WMG Memos: nr-WMG has no Memos; use 0 or -");
  }
  if (model == ModelKind::Gru) {
    if (gru_embed == 0) throw std::invalid_argument("GRU observation embed size: must be >= 1");
    if (gru_size == 0) throw std::invalid_argument("GRU size: must be >= 1");
  }
}

ExperimentConfig parse_experiment_config(std::istream& in) {
  ExperimentConfig config;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = trim(raw);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    try {
      apply_setting(config, line.substr(0, eq), line.substr(eq + 1));
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("config line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  config.validate();
  return config;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot open config " + file.string());
  return parse_experiment_config(in);
}

std::string format_experiment_config(const ExperimentConfig& config) {
  std::ostringstream out;
  for (const auto& f : fields()) {
    if (!(f.applies & bit(config.model))) continue;
    if (config.model == ModelKind::NrWmg && f.name == "WMG Memos") continue;
    out << f.name << " = " << f.get(config) << '\n';
  }
  return out.str();
}

std::unique_ptr<Agent> make_agent(const ExperimentConfig& config) {
  config.validate();
  Rng rng = Rng::substream(config.train.seed, 0x1417);
  TransformerConfig tc;
  tc.layers = config.layers;
  tc.heads = config.heads;
  tc.head_size = config.head_size;
  tc.ff_hidden = config.ff_hidden;
  switch (config.model) {
    case ModelKind::Wmg: {
      WmgConfig c;
      c.core_size = config.observation_size();
      c.memo_count = config.memo_count;
      c.memo_size = config.memo_count > 0 ? config.memo_size : 0;
      c.transformer = tc;
      c.ac_hidden = config.ac_hidden;
      return std::make_unique<WmgAgent>(c, rng);
    }
    case ModelKind::NrWmg: {
      NrWmgConfig c;
      c.observation_size = config.observation_size();
      c.history_cap = config.nr_history;
      c.age_slots = config.nr_age_slots.value_or(config.nr_history.value_or(config.episode_steps()));
      c.transformer = tc;
      c.ac_hidden = config.ac_hidden;
      return std::make_unique<NrWmgAgent>(c, rng);
    }
    case ModelKind::Gru: {
      GruConfig c;
      c.observation_size = config.observation_size();
      c.embed_size = config.gru_embed;
      c.hidden_size = config.gru_size;
      c.ac_hidden = config.ac_hidden;
      return std::make_unique<GruAgent>(c, rng);
    }
  }
  throw std::logic_error("make_agent: unknown model");
}

PathfindingEnv make_environment(const ExperimentConfig& config) {
  return PathfindingEnv(config.pattern_size, config.max_graph_size,
                        Rng::substream_seed(config.train.seed, 0xE4F));
}

}  // namespace wmg
