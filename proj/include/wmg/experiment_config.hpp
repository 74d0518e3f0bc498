#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <set>
#include <string>

#include "wmg/a3c.hpp"
#include "wmg/agent.hpp"

namespace wmg {

enum class ModelKind { Wmg, NrWmg, Gru };

std::string to_string(ModelKind kind);
ModelKind parse_model_kind(const std::string& text);

/// A full training run. Unset fields take the tuned 20M-step WMG values.
///
/// Files hold `key = value` lines keyed by hyperparameter table names
/// ("WMG Memos = 16", "A3C t_max = 16"). Keys match case-insensitively after
/// canonical_name(), so LaTeX spellings such as "Discount factor $\gamma$" work
/// too. `-` leaves a field unset. `#` starts a comment line.
struct ExperimentConfig {
  ModelKind model = ModelKind::Wmg;
  std::size_t pattern_size = 7;    ///< D
  std::size_t max_graph_size = 7;  ///< N
  TrainConfig train;

  std::size_t ac_hidden = 128;
  std::size_t head_size = 12;
  std::size_t heads = 6;
  std::size_t memo_count = 16;
  std::size_t memo_size = 128;
  std::size_t ff_hidden = 12;
  std::size_t layers = 4;

  /// Past observations given to nr-WMG; nullopt keeps the whole episode.
  std::optional<std::size_t> nr_history;
  std::optional<std::size_t> nr_age_slots;

  std::size_t gru_embed = 256;
  std::size_t gru_size = 384;

  std::string output_dir;

  /// Canonical display names of keys assigned explicitly.
  std::set<std::string> assigned;

  ExperimentConfig();

  std::size_t observation_size() const { return 2 * pattern_size + 1; }
  std::size_t episode_steps() const { return 2 * (max_graph_size - 1); }
  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
};

/// Sets one field from its table name. Throws std::invalid_argument for
/// unknown keys or malformed values.
void apply_setting(ExperimentConfig& config, const std::string& key, const std::string& value);

ExperimentConfig parse_experiment_config(std::istream& in);
ExperimentConfig load_experiment_config(const std::filesystem::path& file);
/// Every field relevant to the model, in a form parse_experiment_config() reads back.
std::string format_experiment_config(const ExperimentConfig& config);

/// Fresh agent with parameters drawn from the configured seed.
std::unique_ptr<Agent> make_agent(const ExperimentConfig& config);
/// Training environment seeded from the configured seed.
PathfindingEnv make_environment(const ExperimentConfig& config);

}  // namespace wmg
