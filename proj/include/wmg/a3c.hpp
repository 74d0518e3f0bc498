#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wmg/agent.hpp"
#include "wmg/depth_oracle.hpp"
#include "wmg/pathfinding.hpp"

namespace wmg {

struct TrainConfig {
  std::size_t t_max = 16;
  double gamma = 0.5;
  double entropy_beta = 0.01;
  double learning_rate = 1.6e-4;
  double adam_eps = 1e-6;
  double grad_clip = 16.0;
  double reward_scale = 1.0;
  /// Multiplicative learning-rate decay applied once per `anneal_interval` steps.
  std::optional<double> anneal_gamma;
  std::uint64_t anneal_interval = 100000;
  std::uint64_t total_steps = 0;
  std::uint64_t seed = 0;
  std::uint64_t metrics_interval = 10000;
  /// Zero disables periodic checkpoints.
  std::uint64_t checkpoint_interval = 0;
  /// When false the wall_secs column is written as 0 so metric files are
  /// byte-comparable across runs.
  bool record_wall_time = true;

  void validate() const;
  double learning_rate_at(std::uint64_t env_steps) const;
};

struct RolloutStep {
  Tensor log_prob;  ///< 1×1 log π(a_t)
  Tensor entropy;   ///< 1×1 H(π_t)
  Tensor value;     ///< 1×1 V(h_t)
  double reward = 0.0;  ///< already multiplied by the reward scale
  bool done = false;
};

struct Rollout {
  std::vector<RolloutStep> steps;
  /// V(h_{t+k}) when the window ends mid-episode; ignored after a terminal step.
  double bootstrap = 0.0;
};

struct ReturnsAndAdvantages {
  std::vector<double> returns;
  std::vector<double> advantages;
};

/// k-step discounted returns to the end of the window (or the terminal step)
/// and advantages return - V. Values are read as constants.
ReturnsAndAdvantages compute_returns_and_advantages(std::span<const double> rewards,
                                                    std::span<const double> values,
                                                    const std::vector<bool>& dones,
                                                    double bootstrap, double gamma);
ReturnsAndAdvantages compute_returns_and_advantages(const Rollout& rollout, double gamma);

struct WindowLoss {
  Tensor total;  ///< differentiable scalar
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;  ///< summed over the window
};

/// -Σ [log π(a_t) A_t + β H_t] + 0.5 Σ (R_t - V_t)², with A_t and R_t constants.
WindowLoss window_loss(const Rollout& rollout, double gamma, double entropy_beta);

struct MetricsRow {
  std::uint64_t env_steps = 0;
  double quiz_reward_pct = 0.0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double learning_rate = 0.0;
  double wall_secs = 0.0;
};

inline constexpr const char* kMetricsHeader =
    "env_steps,quiz_reward_pct,policy_loss,value_loss,entropy,lr,wall_secs";
std::string format_metrics_row(const MetricsRow& row);

/// Everything besides parameters needed to continue a run exactly.
struct TrainerState {
  std::uint64_t env_steps = 0;
  std::uint64_t episodes = 0;
  std::string action_rng;
  // Open metrics window.
  std::uint64_t window_quiz_steps = 0;
  std::uint64_t window_quiz_reward = 0;
  double window_policy_loss = 0.0;
  double window_value_loss = 0.0;
  double window_entropy = 0.0;
  std::uint64_t window_updates = 0;  ///< steps whose losses are in the sums
  // Tail window used for the tuning metric.
  std::uint64_t tail_quiz_steps = 0;
  std::uint64_t tail_quiz_reward = 0;
  double elapsed_secs = 0.0;
};

void save_trainer_state(const TrainerState& state, const std::filesystem::path& file);
TrainerState load_trainer_state(const std::filesystem::path& file);

class Trainer {
 public:
  using MetricsSink = std::function<void(const MetricsRow&)>;
  /// Called with the step count at episode boundaries once a checkpoint is due.
  using CheckpointHook = std::function<void(std::uint64_t env_steps)>;

  Trainer(Agent& agent, PathfindingEnv& env, TrainConfig config);

  /// Runs until config.total_steps environment steps have been taken and the
  /// current episode has ended.
  void run(const MetricsSink& on_metrics, const CheckpointHook& on_checkpoint = {});

  const TrainerState& state() const;
  void restore(const TrainerState& state);

  /// Fraction of quiz reward over the last 10% of total steps.
  double tail_quiz_fraction() const;

  /// One window: collect up to t_max steps, one backward and Adam update.
  /// Returns the number of environment steps taken.
  std::size_t train_window();

 private:
  void start_episode();
  MetricsRow flush_metrics();

  Agent& agent_;
  PathfindingEnv& env_;
  TrainConfig config_;
  Rng action_rng_;
  mutable TrainerState state_;
  std::vector<double> observation_;
  bool episode_active_ = false;
  bool checkpoint_due_ = false;
  double wall_origin_ = 0.0;
  const MetricsSink* sink_ = nullptr;
};

// ---------------------------------------------------------------------------
// Evaluation

/// Anything that can play Pathfinding episodes.
class Actor {
 public:
  virtual ~Actor() = default;
  virtual void begin_episode() = 0;
  virtual int act(std::span<const double> observation) = 0;
};

/// Wraps an agent; greedy picks the argmax action, otherwise samples.
class AgentActor : public Actor {
 public:
  AgentActor(Agent& agent, bool greedy, std::uint64_t seed = 0);
  void begin_episode() override;
  int act(std::span<const double> observation) override;

 private:
  Agent& agent_;
  bool greedy_;
  Rng rng_;
};

class OracleActor : public Actor {
 public:
  OracleActor(std::size_t depth, std::size_t pattern_size) : oracle_(depth, pattern_size) {}
  void begin_episode() override { oracle_.reset(); }
  int act(std::span<const double> observation) override { return oracle_.act(observation); }

 private:
  DepthOracle oracle_;
};

struct EvalResult {
  std::uint64_t quiz_steps = 0;
  std::uint64_t quiz_reward = 0;
  double fraction() const {
    return quiz_steps == 0 ? 0.0 : static_cast<double>(quiz_reward) / static_cast<double>(quiz_steps);
  }
  /// Binomial standard error of fraction().
  double standard_error() const;
};

EvalResult evaluate(Actor& actor, std::span<const EpisodeScript> scripts);
/// Plays `episodes` freshly sampled episodes from `env`.
EvalResult evaluate_live(Actor& actor, PathfindingEnv& env, std::size_t episodes);

/// Samples from a probability row.
int sample_action(std::span<const double> policy, Rng& rng);
int greedy_action(std::span<const double> policy);

}  // namespace wmg
