#include "wmg/a3c.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace wmg {

void TrainConfig::validate() const {
  if (t_max == 0) throw std::invalid_argument("A3C t_max must be >= 1");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw std::invalid_argument("discount factor must be in (0, 1]");
  if (entropy_beta < 0.0) throw std::invalid_argument("entropy strength must be non-negative");
  if (!(learning_rate >= 0.0)) throw std::invalid_argument("learning rate must be non-negative");
  if (!(adam_eps > 0.0)) throw std::invalid_argument("Adam eps must be positive");
  if (!(reward_scale > 0.0)) throw std::invalid_argument("reward scale must be positive");
  if (anneal_gamma && !(*anneal_gamma > 0.0 && *anneal_gamma <= 1.0)) {
    throw std::invalid_argument("learning rate annealing factor must be in (0, 1]");
  }
  if (anneal_interval == 0) throw std::invalid_argument("annealing interval must be positive");
  if (metrics_interval == 0) throw std::invalid_argument("metrics interval must be positive");
}

double TrainConfig::learning_rate_at(std::uint64_t env_steps) const {
  if (!anneal_gamma) return learning_rate;
  const auto periods = static_cast<double>(env_steps / anneal_interval);
  return learning_rate * std::pow(*anneal_gamma, periods);
}

// ---------------------------------------------------------------------------

ReturnsAndAdvantages compute_returns_and_advantages(std::span<const double> rewards,
                                                    std::span<const double> values,
                                                    const std::vector<bool>& dones,
                                                    double bootstrap, double gamma) {
  const std::size_t k = rewards.size();
  if (values.size() != k || dones.size() != k) {
    throw std::invalid_argument("compute_returns_and_advantages: ragged rollout");
  }
  ReturnsAndAdvantages out;
  out.returns.resize(k);
  out.advantages.resize(k);
  double ret = bootstrap;
  for (std::size_t i = k; i-- > 0;) {
    ret = dones[i] ? rewards[i] : rewards[i] + gamma * ret;
    out.returns[i] = ret;
    out.advantages[i] = ret - values[i];
  }
  return out;
}

ReturnsAndAdvantages compute_returns_and_advantages(const Rollout& rollout, double gamma) {
  if (rollout.steps.empty()) throw std::invalid_argument("compute_returns_and_advantages: empty rollout");
  std::vector<double> rewards, values;
  std::vector<bool> dones;
  for (const auto& s : rollout.steps) {
    rewards.push_back(s.reward);
    values.push_back(s.value.item());
    dones.push_back(s.done);
  }
  return compute_returns_and_advantages(rewards, values, dones, rollout.bootstrap, gamma);
}

WindowLoss window_loss(const Rollout& rollout, double gamma, double entropy_beta) {
  const ReturnsAndAdvantages ra = compute_returns_and_advantages(rollout, gamma);
  std::vector<Tensor> terms;
  terms.reserve(2 * rollout.steps.size());
  WindowLoss out;
  for (std::size_t t = 0; t < rollout.steps.size(); ++t) {
    const RolloutStep& s = rollout.steps[t];
    const double adv = ra.advantages[t];
    // Policy term: -(log π(a) A + β H)
    terms.push_back(scale(add(scale(s.log_prob, adv), scale(s.entropy, entropy_beta)), -1.0));
    // Value term: 0.5 (R - V)²
    const Tensor diff = sub(s.value, Tensor::scalar(ra.returns[t]));
    terms.push_back(scale(mul(diff, diff), 0.5));

    out.policy_loss += -s.log_prob.item() * adv;
    out.value_loss += 0.5 * (ra.returns[t] - s.value.item()) * (ra.returns[t] - s.value.item());
    out.entropy += s.entropy.item();
  }
  out.total = sum(concat_rows(terms));
  return out;
}

std::string format_metrics_row(const MetricsRow& row) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%llu,%.6f,%.9g,%.9g,%.9g,%.9g,%.3f",
                static_cast<unsigned long long>(row.env_steps), row.quiz_reward_pct, row.policy_loss,
                row.value_loss, row.entropy, row.learning_rate, row.wall_secs);
  return buf;
}

// ---------------------------------------------------------------------------
// Trainer state persistence

namespace {

std::string hex(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

double now_secs() {
  using namespace std::chrono;
  return duration<double>(steady_clock::now().time_since_epoch()).count();
}

}  // namespace

void save_trainer_state(const TrainerState& s, const std::filesystem::path& file) {
  const std::filesystem::path tmp = file.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << "wmg-trainer-state 1\n";
    out << "env_steps " << s.env_steps << '\n';
    out << "episodes " << s.episodes << '\n';
    out << "window_quiz_steps " << s.window_quiz_steps << '\n';
    out << "window_quiz_reward " << s.window_quiz_reward << '\n';
    out << "window_policy_loss " << hex(s.window_policy_loss) << '\n';
    out << "window_value_loss " << hex(s.window_value_loss) << '\n';
    out << "window_entropy " << hex(s.window_entropy) << '\n';
    out << "window_loss_steps " << s.window_updates << '\n';
    out << "tail_quiz_steps " << s.tail_quiz_steps << '\n';
    out << "tail_quiz_reward " << s.tail_quiz_reward << '\n';
    out << "elapsed_secs " << hex(s.elapsed_secs) << '\n';
    out << "action_rng " << s.action_rng << '\n';
    if (!out) throw std::runtime_error("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, file);
}

TrainerState load_trainer_state(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot read trainer state " + file.string());
  std::string line;
  if (!std::getline(in, line) || line != "wmg-trainer-state 1") {
    throw std::runtime_error("unrecognized trainer state header in " + file.string());
  }
  TrainerState s;
  while (std::getline(in, line)) {
    const auto space = line.find(' ');
    if (space == std::string::npos) continue;
    const std::string key = line.substr(0, space);
    const std::string value = line.substr(space + 1);
    auto u = [&] { return std::stoull(value); };
    auto d = [&] { return std::strtod(value.c_str(), nullptr); };
    if (key == "env_steps") s.env_steps = u();
    else if (key == "episodes") s.episodes = u();
    else if (key == "window_quiz_steps") s.window_quiz_steps = u();
    else if (key == "window_quiz_reward") s.window_quiz_reward = u();
    else if (key == "window_policy_loss") s.window_policy_loss = d();
    else if (key == "window_value_loss") s.window_value_loss = d();
    else if (key == "window_entropy") s.window_entropy = d();
    else if (key == "window_loss_steps") s.window_updates = u();
    else if (key == "tail_quiz_steps") s.tail_quiz_steps = u();
    else if (key == "tail_quiz_reward") s.tail_quiz_reward = u();
    else if (key == "elapsed_secs") s.elapsed_secs = d();
    else if (key == "action_rng") s.action_rng = value;
    else throw std::runtime_error("unknown trainer state field: " + key);
  }
  return s;
}

// ---------------------------------------------------------------------------
// Trainer

Trainer::Trainer(Agent& agent, PathfindingEnv& env, TrainConfig config)
    : agent_(agent), env_(env), config_(std::move(config)),
      action_rng_(Rng::substream(config_.seed, 0xAC7104)) {
  config_.validate();
  if (agent.observation_size() != env.observation_size()) {
    throw std::invalid_argument("agent observation size " + std::to_string(agent.observation_size()) +
                                " does not match environment (" +
                                std::to_string(env.observation_size()) + ")");
  }
}

const TrainerState& Trainer::state() const {
  state_.action_rng = action_rng_.serialize();
  return state_;
}

void Trainer::restore(const TrainerState& state) {
  state_ = state;
  action_rng_.deserialize(state.action_rng);
  env_.set_episodes_started(state.episodes);
  episode_active_ = false;
  checkpoint_due_ = false;
}

double Trainer::tail_quiz_fraction() const {
  if (state_.tail_quiz_steps == 0) return 0.0;
  return static_cast<double>(state_.tail_quiz_reward) / static_cast<double>(state_.tail_quiz_steps);
}

void Trainer::start_episode() {
  observation_ = env_.reset();
  state_.episodes = env_.episodes_started();
  agent_.reset_state();
  episode_active_ = true;
}

MetricsRow Trainer::flush_metrics() {
  MetricsRow row;
  row.env_steps = state_.env_steps;
  row.quiz_reward_pct = state_.window_quiz_steps == 0
                            ? 0.0
                            : 100.0 * static_cast<double>(state_.window_quiz_reward) /
                                  static_cast<double>(state_.window_quiz_steps);
  if (state_.window_updates > 0) {
    const double n = static_cast<double>(state_.window_updates);
    row.policy_loss = state_.window_policy_loss / n;
    row.value_loss = state_.window_value_loss / n;
    row.entropy = state_.window_entropy / n;
  }
  row.learning_rate = config_.learning_rate_at(state_.env_steps);
  row.wall_secs = config_.record_wall_time ? now_secs() - wall_origin_ : 0.0;
  state_.window_quiz_steps = 0;
  state_.window_quiz_reward = 0;
  state_.window_policy_loss = 0.0;
  state_.window_value_loss = 0.0;
  state_.window_entropy = 0.0;
  state_.window_updates = 0;
  return row;
}

std::size_t Trainer::train_window() {
  if (!episode_active_) start_episode();
  agent_.detach_state();

  const std::uint64_t tail_start = config_.total_steps - config_.total_steps / 10;
  Rollout rollout;
  std::vector<MetricsRow> rows;
  bool ended = false;
  while (rollout.steps.size() < config_.t_max) {
    const AgentOutput out = agent_.step(observation_);
    const int action = sample_action(out.policy.values(), action_rng_);
    const Tensor log_policy = log_softmax_rows(out.logits);

    RolloutStep step;
    step.log_prob = pick(log_policy, 0, static_cast<std::size_t>(action));
    step.entropy = scale(sum(mul(out.policy, log_policy)), -1.0);
    step.value = out.value;

    const bool quiz = observation_.back() == 1.0;
    StepResult result = env_.step(action);
    step.reward = result.reward * config_.reward_scale;
    step.done = result.done;
    rollout.steps.push_back(std::move(step));

    if (quiz) {
      const bool correct = result.reward > 0.0;
      ++state_.window_quiz_steps;
      state_.window_quiz_reward += correct ? 1 : 0;
      if (state_.env_steps >= tail_start) {
        ++state_.tail_quiz_steps;
        state_.tail_quiz_reward += correct ? 1 : 0;
      }
    }
    ++state_.env_steps;
    if (config_.checkpoint_interval > 0 && state_.env_steps % config_.checkpoint_interval == 0) {
      checkpoint_due_ = true;
    }
    if (state_.env_steps % config_.metrics_interval == 0) rows.push_back(flush_metrics());

    if (result.done) {
      episode_active_ = false;
      ended = true;
      break;
    }
    observation_ = std::move(result.observation);
  }
  if (!ended) rollout.bootstrap = agent_.peek_value(observation_);

  const WindowLoss loss = window_loss(rollout, config_.gamma, config_.entropy_beta);
  if (!std::isfinite(loss.total.item())) {
    throw std::runtime_error("non-finite loss at env step " + std::to_string(state_.env_steps) +
                             " (policy " + std::to_string(loss.policy_loss) + ", value " +
                             std::to_string(loss.value_loss) + ")");
  }
  backward(loss.total);
  AdamOptions adam;
  adam.learning_rate = config_.learning_rate_at(state_.env_steps);
  adam.eps = config_.adam_eps;
  adam.clip = config_.grad_clip;
  const double norm = adam_step(agent_.parameters(), adam);
  if (!std::isfinite(norm)) {
    throw std::runtime_error("non-finite gradient norm at env step " + std::to_string(state_.env_steps));
  }

  // Rows flushed inside the window carry the losses of earlier updates only.
  state_.window_policy_loss += loss.policy_loss;
  state_.window_value_loss += loss.value_loss;
  state_.window_entropy += loss.entropy;
  state_.window_updates += rollout.steps.size();

  if (sink_ && *sink_) {
    for (const auto& row : rows) (*sink_)(row);
  }
  return rollout.steps.size();
}

void Trainer::run(const MetricsSink& on_metrics, const CheckpointHook& on_checkpoint) {
  wall_origin_ = now_secs() - state_.elapsed_secs;
  sink_ = &on_metrics;
  try {
    // The episode in progress is finished past total_steps so the final state
    // can be checkpointed and resumed exactly.
    while (state_.env_steps < config_.total_steps || episode_active_) {
      train_window();
      if (!episode_active_ && checkpoint_due_) {
        checkpoint_due_ = false;
        state_.elapsed_secs = config_.record_wall_time ? now_secs() - wall_origin_ : 0.0;
        if (on_checkpoint) on_checkpoint(state_.env_steps);
      }
    }
  } catch (...) {
    sink_ = nullptr;
    throw;
  }
  sink_ = nullptr;
  state_.elapsed_secs = config_.record_wall_time ? now_secs() - wall_origin_ : 0.0;
}

// ---------------------------------------------------------------------------
// Evaluation

int sample_action(std::span<const double> policy, Rng& rng) {
  return static_cast<int>(rng.categorical(policy));
}

int greedy_action(std::span<const double> policy) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < policy.size(); ++i) {
    if (policy[i] > policy[best]) best = i;
  }
  return static_cast<int>(best);
}

AgentActor::AgentActor(Agent& agent, bool greedy, std::uint64_t seed)
    : agent_(agent), greedy_(greedy), rng_(seed) {}

void AgentActor::begin_episode() { agent_.reset_state(); }

int AgentActor::act(std::span<const double> observation) {
  NoGradGuard no_grad;
  const AgentOutput out = agent_.step(observation);
  return greedy_ ? greedy_action(out.policy.values()) : sample_action(out.policy.values(), rng_);
}

double EvalResult::standard_error() const {
  if (quiz_steps == 0) return 0.0;
  const double p = fraction();
  return std::sqrt(p * (1.0 - p) / static_cast<double>(quiz_steps));
}

namespace {

void play(Actor& actor, PathfindingEnv& env, std::vector<double> obs, EvalResult& result) {
  actor.begin_episode();
  while (true) {
    const bool quiz = obs.back() == 1.0;
    const int action = actor.act(obs);
    StepResult r = env.step(action);
    if (quiz) {
      ++result.quiz_steps;
      result.quiz_reward += r.reward > 0.0 ? 1 : 0;
    }
    if (r.done) break;
    obs = std::move(r.observation);
  }
}

}  // namespace

EvalResult evaluate(Actor& actor, std::span<const EpisodeScript> scripts) {
  EvalResult result;
  for (const EpisodeScript& script : scripts) {
    PathfindingEnv env(script.pattern_size, script.max_graph_size, 0);
    play(actor, env, env.reset(script), result);
  }
  return result;
}

EvalResult evaluate_live(Actor& actor, PathfindingEnv& env, std::size_t episodes) {
  EvalResult result;
  for (std::size_t i = 0; i < episodes; ++i) play(actor, env, env.reset(), result);
  return result;
}

}  // namespace wmg
