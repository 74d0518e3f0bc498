#pragma once

#include <cstddef>
#include <deque>
#include <optional>
#include <vector>

#include "wmg/agent.hpp"
#include "wmg/wmg_agent.hpp"

namespace wmg {

struct GruConfig {
  std::size_t observation_size = 0;
  std::size_t embed_size = 0;   ///< observation embedding width
  std::size_t hidden_size = 0;  ///< GRU state width
  std::size_t ac_hidden = 0;
  std::size_t action_count = 2;

  void validate() const;
};

struct GruParams {
  Tensor embed_weight, embed_bias;
  Tensor update_input, update_hidden, update_bias;
  Tensor reset_input, reset_hidden, reset_bias;
  Tensor candidate_input, candidate_hidden, candidate_bias;
};

/// Linear observation embedding with ReLU, a single GRU cell, then the
/// shared actor-critic head.
class GruNetwork {
 public:
  GruNetwork(const GruConfig& config, ParameterStore& store, Rng& rng,
             const std::string& prefix = "gru");

  /// Returns the head outputs and the next hidden state (1×hidden_size).
  std::pair<AgentOutput, Tensor> step(const Tensor& observation, const Tensor& hidden) const;
  Tensor reset_state() const { return Tensor(1, config_.hidden_size, 0.0); }

  const GruConfig& config() const { return config_; }
  const GruParams& cell() const { return params_; }

 private:
  GruConfig config_;
  GruParams params_;
  ActorCriticHead head_;
};

class GruAgent : public Agent {
 public:
  GruAgent(const GruConfig& config, Rng& rng);

  void reset_state() override;
  AgentOutput step(std::span<const double> observation) override;
  void detach_state() override;
  double peek_value(std::span<const double> observation) override;
  ParameterStore& parameters() override { return store_; }
  std::size_t observation_size() const override { return network_.config().observation_size; }
  std::size_t action_count() const override { return network_.config().action_count; }
  std::string kind() const override { return "gru"; }

  const Tensor& hidden() const { return hidden_; }
  void set_hidden(Tensor hidden) { hidden_ = std::move(hidden); }
  const GruNetwork& network() const { return network_; }

 private:
  ParameterStore store_;
  GruNetwork network_;
  Tensor hidden_;
};

/// Past observations, most recent last. An empty cap keeps the whole episode.
class HistoryState {
 public:
  explicit HistoryState(std::optional<std::size_t> cap = std::nullopt) : cap_(cap) {}

  void push(std::vector<double> observation);
  void clear() { entries_.clear(); }
  std::size_t size() const { return entries_.size(); }
  std::optional<std::size_t> cap() const { return cap_; }
  const std::deque<std::vector<double>>& entries() const { return entries_; }

 private:
  std::optional<std::size_t> cap_;
  std::deque<std::vector<double>> entries_;
};

struct NrWmgConfig {
  std::size_t observation_size = 0;
  /// Observations retained as Factors; nullopt keeps the full episode history.
  std::optional<std::size_t> history_cap;
  /// Length of the one-hot age tag appended to each Factor. Ages past the last
  /// slot share it. Defaults to the cap when one is set.
  std::size_t age_slots = 0;
  TransformerConfig transformer;
  std::size_t ac_hidden = 0;
  std::size_t action_count = 2;

  std::size_t factor_size() const;
  WmgConfig network_config() const;
};

/// Non-recurrent WMG: no Memos; past observations enter as age-tagged Factors.
class NrWmgAgent : public Agent {
 public:
  NrWmgAgent(const NrWmgConfig& config, Rng& rng);

  void reset_state() override;
  AgentOutput step(std::span<const double> observation) override;
  void detach_state() override {}
  double peek_value(std::span<const double> observation) override;
  ParameterStore& parameters() override { return store_; }
  std::size_t observation_size() const override { return config_.observation_size; }
  std::size_t action_count() const override { return config_.action_count; }
  std::string kind() const override { return "nr-wmg"; }

  /// n_F×d_F Factor matrix for the current history (age 0 = previous step).
  Tensor factor_matrix() const;
  const HistoryState& history() const { return history_; }
  const WmgNetwork& network() const { return network_; }

 private:
  NrWmgConfig config_;
  ParameterStore store_;
  WmgNetwork network_;
  HistoryState history_;
};

}  // namespace wmg
