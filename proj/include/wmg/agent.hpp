#pragma once

#include <cstddef>
#include <span>
#include <string>

#include "wmg/parameter_store.hpp"
#include "wmg/rng.hpp"
#include "wmg/tensor.hpp"

namespace wmg {

struct AgentOutput {
  Tensor logits;  ///< 1×d_π pre-softmax scores
  Tensor policy;  ///< 1×d_π action probabilities
  Tensor value;   ///< 1×1 state-value estimate
};

/// A recurrent actor-critic network together with its per-episode state.
class Agent {
 public:
  virtual ~Agent() = default;

  /// Clears recurrent state at an episode boundary.
  virtual void reset_state() = 0;
  /// Forward pass on one observation; advances the recurrent state.
  virtual AgentOutput step(std::span<const double> observation) = 0;
  /// Cuts gradient flow into the current recurrent state (window boundary).
  virtual void detach_state() = 0;
  /// Value estimate for `observation` without advancing state or recording history.
  virtual double peek_value(std::span<const double> observation) = 0;

  virtual ParameterStore& parameters() = 0;
  virtual std::size_t observation_size() const = 0;
  virtual std::size_t action_count() const = 0;
  virtual std::string kind() const = 0;
};

/// Shared ReLU layer followed by separate policy and value maps.
class ActorCriticHead {
 public:
  ActorCriticHead(std::size_t input_size, std::size_t hidden_size, std::size_t action_count,
                  ParameterStore& store, Rng& rng, const std::string& prefix);

  AgentOutput forward(const Tensor& h) const;

  const Tensor& shared_weight() const { return shared_weight_; }

 private:
  Tensor shared_weight_, shared_bias_;
  Tensor policy_weight_, policy_bias_;
  Tensor value_weight_, value_bias_;
};

}  // namespace wmg
