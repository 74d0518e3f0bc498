#include "wmg/baselines.hpp"

#include <algorithm>

namespace wmg {

void GruConfig::validate() const {
  if (observation_size == 0 || embed_size == 0 || hidden_size == 0 || ac_hidden == 0 ||
      action_count == 0) {
    throw std::invalid_argument("GruConfig: all sizes must be positive");
  }
}

namespace {

const GruConfig& checked(const GruConfig& c) {
  c.validate();
  return c;
}

}  // namespace

GruNetwork::GruNetwork(const GruConfig& config, ParameterStore& store, Rng& rng,
                       const std::string& prefix)
    : config_(checked(config)),
      params_{
          store.add_weight(prefix + ".embed.w", config.observation_size, config.embed_size, rng),
          store.add_bias(prefix + ".embed.b", config.embed_size),
          store.add_weight(prefix + ".update.wx", config.embed_size, config.hidden_size, rng),
          store.add_weight(prefix + ".update.wh", config.hidden_size, config.hidden_size, rng),
          store.add_bias(prefix + ".update.b", config.hidden_size),
          store.add_weight(prefix + ".reset.wx", config.embed_size, config.hidden_size, rng),
          store.add_weight(prefix + ".reset.wh", config.hidden_size, config.hidden_size, rng),
          store.add_bias(prefix + ".reset.b", config.hidden_size),
          store.add_weight(prefix + ".candidate.wx", config.embed_size, config.hidden_size, rng),
          store.add_weight(prefix + ".candidate.wh", config.hidden_size, config.hidden_size, rng),
          store.add_bias(prefix + ".candidate.b", config.hidden_size),
      },
      head_(config.hidden_size, config.ac_hidden, config.action_count, store, rng,
            prefix + ".head") {}

std::pair<AgentOutput, Tensor> GruNetwork::step(const Tensor& observation,
                                                const Tensor& hidden) const {
  if (observation.rows() != 1 || observation.cols() != config_.observation_size) {
    throw DimensionError("gru step: observation " + observation.shape_string() + " expected [1x" +
                         std::to_string(config_.observation_size) + "]");
  }
  if (hidden.rows() != 1 || hidden.cols() != config_.hidden_size) {
    throw DimensionError("gru step: hidden " + hidden.shape_string() + " expected [1x" +
                         std::to_string(config_.hidden_size) + "]");
  }
  const GruParams& p = params_;
  const Tensor x = relu(add(matmul(observation, p.embed_weight), p.embed_bias));
  const Tensor z =
      sigmoid(add(add(matmul(x, p.update_input), matmul(hidden, p.update_hidden)), p.update_bias));
  const Tensor r =
      sigmoid(add(add(matmul(x, p.reset_input), matmul(hidden, p.reset_hidden)), p.reset_bias));
  const Tensor candidate = tanh(add(
      add(matmul(x, p.candidate_input), matmul(mul(r, hidden), p.candidate_hidden)),
      p.candidate_bias));
  // (1 - z) * h + z * candidate
  const Tensor next = add(hidden, mul(z, sub(candidate, hidden)));
  return {head_.forward(next), next};
}

GruAgent::GruAgent(const GruConfig& config, Rng& rng)
    : network_(config, store_, rng), hidden_(network_.reset_state()) {}

void GruAgent::reset_state() { hidden_ = network_.reset_state(); }

AgentOutput GruAgent::step(std::span<const double> observation) {
  auto [out, next] = network_.step(Tensor::row(observation), hidden_);
  hidden_ = std::move(next);
  return out;
}

void GruAgent::detach_state() { hidden_ = hidden_.detach(); }

double GruAgent::peek_value(std::span<const double> observation) {
  NoGradGuard no_grad;
  return network_.step(Tensor::row(observation), hidden_).first.value.item();
}

// ---------------------------------------------------------------------------

void HistoryState::push(std::vector<double> observation) {
  if (cap_ && *cap_ == 0) return;
  entries_.push_back(std::move(observation));
  while (cap_ && entries_.size() > *cap_) entries_.pop_front();
}

std::size_t NrWmgConfig::factor_size() const {
  if (history_cap && *history_cap == 0) return 0;
  return observation_size + age_slots;
}

WmgConfig NrWmgConfig::network_config() const {
  WmgConfig c;
  c.core_size = observation_size;
  c.factor_size = factor_size();
  c.memo_count = 0;
  c.memo_size = 0;
  c.transformer = transformer;
  c.ac_hidden = ac_hidden;
  c.action_count = action_count;
  return c;
}

namespace {

NrWmgConfig with_default_slots(NrWmgConfig c) {
  if (c.age_slots == 0 && c.history_cap) c.age_slots = *c.history_cap;
  if (c.factor_size() > 0 && c.age_slots == 0) {
    throw std::invalid_argument("NrWmgConfig: full-history mode needs an explicit age slot count");
  }
  return c;
}

}  // namespace

NrWmgAgent::NrWmgAgent(const NrWmgConfig& config, Rng& rng)
    : config_(with_default_slots(config)),
      network_(config_.network_config(), store_, rng),
      history_(config_.history_cap) {}

void NrWmgAgent::reset_state() { history_.clear(); }

Tensor NrWmgAgent::factor_matrix() const {
  const std::size_t n = history_.size();
  const std::size_t width = config_.factor_size();
  Tensor factors(n, width, 0.0);
  auto v = factors.mutable_values();
  const auto& entries = history_.entries();
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t age = n - 1 - i;  // entries are oldest first
    const auto& obs = entries[i];
    std::copy(obs.begin(), obs.end(), v.begin() + i * width);
    const std::size_t slot = std::min(age, config_.age_slots - 1);
    v[i * width + config_.observation_size + slot] = 1.0;
  }
  return factors;
}

AgentOutput NrWmgAgent::step(std::span<const double> observation) {
  const WmgOutput out =
      network_.forward(Tensor::row(observation), factor_matrix(), network_.reset_state());
  history_.push(std::vector<double>(observation.begin(), observation.end()));
  return AgentOutput{out.logits, out.policy, out.value};
}

double NrWmgAgent::peek_value(std::span<const double> observation) {
  NoGradGuard no_grad;
  return network_.forward(Tensor::row(observation), factor_matrix(), network_.reset_state())
      .value.item();
}

}  // namespace wmg
