#include "wmg/wmg_agent.hpp"

namespace wmg {

ActorCriticHead::ActorCriticHead(std::size_t input_size, std::size_t hidden_size,
                                 std::size_t action_count, ParameterStore& store, Rng& rng,
                                 const std::string& prefix)
    : shared_weight_(store.add_weight(prefix + ".shared.w", input_size, hidden_size, rng)),
      shared_bias_(store.add_bias(prefix + ".shared.b", hidden_size)),
      policy_weight_(store.add_weight(prefix + ".policy.w", hidden_size, action_count, rng)),
      policy_bias_(store.add_bias(prefix + ".policy.b", action_count)),
      value_weight_(store.add_weight(prefix + ".value.w", hidden_size, 1, rng)),
      value_bias_(store.add_bias(prefix + ".value.b", 1)) {}

AgentOutput ActorCriticHead::forward(const Tensor& h) const {
  const Tensor s_ac = relu(add(matmul(h, shared_weight_), shared_bias_));
  AgentOutput out;
  out.logits = add(matmul(s_ac, policy_weight_), policy_bias_);
  out.policy = softmax_rows(out.logits);
  out.value = add(matmul(s_ac, value_weight_), value_bias_);
  return out;
}

void WmgConfig::validate() const {
  if (core_size == 0) throw std::invalid_argument("WmgConfig: core size must be positive");
  if (memo_count > 0 && memo_size == 0) {
    throw std::invalid_argument("WmgConfig: Memo size must be positive when Memos are used");
  }
  if (ac_hidden == 0) throw std::invalid_argument("WmgConfig: actor-critic hidden size must be positive");
  if (action_count == 0) throw std::invalid_argument("WmgConfig: need at least one action");
  transformer.validate();
}

namespace {

Tensor identity(std::size_t n) {
  Tensor eye(n, n, 0.0);
  auto v = eye.mutable_values();
  for (std::size_t i = 0; i < n; ++i) v[i * n + i] = 1.0;
  return eye;
}

const WmgConfig& checked(const WmgConfig& c) {
  c.validate();
  return c;
}

}  // namespace

WmgNetwork::WmgNetwork(const WmgConfig& config, ParameterStore& store, Rng& rng,
                       const std::string& prefix)
    : config_(checked(config)),
      core_weight_(store.add_weight(prefix + ".core.w", config.core_size,
                                    config.transformer.model_size(), rng)),
      core_bias_(store.add_bias(prefix + ".core.b", config.transformer.model_size())),
      factor_weight_(config.factor_size > 0
                         ? store.add_weight(prefix + ".factor.w", config.factor_size,
                                            config.transformer.model_size(), rng)
                         : Tensor()),
      factor_bias_(config.factor_size > 0
                       ? store.add_bias(prefix + ".factor.b", config.transformer.model_size())
                       : Tensor()),
      memo_weight_(config.memo_count > 0
                       ? store.add_weight(prefix + ".memo_embed.w",
                                          config.memo_size + config.memo_count,
                                          config.transformer.model_size(), rng)
                       : Tensor()),
      memo_bias_(config.memo_count > 0
                     ? store.add_bias(prefix + ".memo_embed.b", config.transformer.model_size())
                     : Tensor()),
      age_identity_(identity(config.memo_count)),
      encoder_(config.transformer, store, rng, prefix + ".tfm"),
      create_weight_(config.memo_count > 0
                         ? store.add_weight(prefix + ".memo_create.w",
                                            config.transformer.model_size(), config.memo_size, rng)
                         : Tensor()),
      create_bias_(config.memo_count > 0
                       ? store.add_bias(prefix + ".memo_create.b", config.memo_size)
                       : Tensor()),
      head_(config.transformer.model_size(), config.ac_hidden, config.action_count, store, rng,
            prefix + ".head") {}

Tensor WmgNetwork::build_input(const Tensor& core, const Tensor& factors,
                               const MemoMatrix& memos) const {
  if (core.rows() != 1 || core.cols() != config_.core_size) {
    throw DimensionError("build_input: Core " + core.shape_string() + " expected [1x" +
                         std::to_string(config_.core_size) + "]");
  }
  std::vector<Tensor> rows;
  rows.push_back(add(matmul(core, core_weight_), core_bias_));
  if (factors.defined() && factors.rows() > 0) {
    if (config_.factor_size == 0 || factors.cols() != config_.factor_size) {
      throw DimensionError("build_input: Factors " + factors.shape_string() +
                           " do not match d_F = " + std::to_string(config_.factor_size));
    }
    rows.push_back(add(matmul(factors, factor_weight_), factor_bias_));
  }
  if (memos.memos.defined() && memos.count() != config_.memo_count) {
    throw DimensionError("build_input: Memo matrix " + memos.memos.shape_string() +
                         " expected " + std::to_string(config_.memo_count) + " rows");
  }
  if (config_.memo_count > 0) {
    if (memos.memos.cols() != config_.memo_size) {
      throw DimensionError("build_input: Memo matrix " + memos.memos.shape_string() +
                           " expected d_M = " + std::to_string(config_.memo_size));
    }
    const Tensor tagged = concat_cols(std::vector<Tensor>{memos.memos, age_identity_});
    rows.push_back(add(matmul(tagged, memo_weight_), memo_bias_));
  }
  return rows.size() == 1 ? rows[0] : concat_rows(rows);
}

WmgOutput WmgNetwork::forward(const Tensor& core, const Tensor& factors,
                              const MemoMatrix& memos) const {
  const Tensor input = build_input(core, factors, memos);
  WmgOutput out;
  out.h = encoder_.encode_first_row(input);
  if (config_.memo_count > 0) out.new_memo = tanh(add(matmul(out.h, create_weight_), create_bias_));
  AgentOutput ac = head_.forward(out.h);
  out.logits = ac.logits;
  out.policy = ac.policy;
  out.value = ac.value;
  return out;
}

std::pair<WmgOutput, MemoMatrix> WmgNetwork::step(const Tensor& core, const Tensor& factors,
                                                  const MemoMatrix& memos) const {
  WmgOutput out = forward(core, factors, memos);
  MemoMatrix next = config_.memo_count > 0 ? push_memo(memos, out.new_memo) : memos;
  return {std::move(out), std::move(next)};
}

MemoMatrix WmgNetwork::reset_state() const {
  return MemoMatrix{Tensor(config_.memo_count, config_.memo_size, 0.0)};
}

Tensor WmgNetwork::empty_factors() const { return Tensor(0, config_.factor_size); }

MemoMatrix WmgNetwork::push_memo(const MemoMatrix& memos, const Tensor& new_memo) {
  const std::size_t n = memos.count();
  if (n == 0) return memos;
  if (new_memo.rows() != 1 || new_memo.cols() != memos.memos.cols()) {
    throw DimensionError("push_memo: new Memo " + new_memo.shape_string() +
                         " does not fit Memo matrix " + memos.memos.shape_string());
  }
  if (n == 1) return MemoMatrix{new_memo};
  return MemoMatrix{concat_rows({new_memo, slice_rows(memos.memos, 0, n - 1)})};
}

// ---------------------------------------------------------------------------

WmgAgent::WmgAgent(const WmgConfig& config, Rng& rng)
    : network_(config, store_, rng), memos_(network_.reset_state()) {}

void WmgAgent::reset_state() { memos_ = network_.reset_state(); }

AgentOutput WmgAgent::step(std::span<const double> observation) {
  auto [out, next] = network_.step(Tensor::row(observation), network_.empty_factors(), memos_);
  memos_ = std::move(next);
  last_ = out;
  return AgentOutput{out.logits, out.policy, out.value};
}

void WmgAgent::detach_state() { memos_.memos = memos_.memos.detach(); }

double WmgAgent::peek_value(std::span<const double> observation) {
  NoGradGuard no_grad;
  return network_.forward(Tensor::row(observation), network_.empty_factors(), memos_).value.item();
}

}  // namespace wmg
