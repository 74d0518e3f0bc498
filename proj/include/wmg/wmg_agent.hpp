#pragma once

#include <cstddef>
#include <optional>
#include <string>

#include "wmg/agent.hpp"
#include "wmg/transformer.hpp"

namespace wmg {

struct WmgConfig {
  std::size_t core_size = 0;    ///< d_c
  std::size_t factor_size = 0;  ///< d_F; zero when the model takes no Factors
  std::size_t memo_count = 0;   ///< n_M; zero disables recurrence
  std::size_t memo_size = 0;    ///< d_M
  TransformerConfig transformer;
  std::size_t ac_hidden = 0;  ///< d_ac
  std::size_t action_count = 2;

  void validate() const;
};

/// Rolling buffer of Memos, one per row; row 0 is the newest.
struct MemoMatrix {
  Tensor memos;  ///< n_M×d_M
  std::size_t count() const { return memos.rows(); }
};

struct WmgOutput {
  Tensor logits;
  Tensor policy;
  Tensor value;
  Tensor h;         ///< 1×d_T, Core row of the encoder output
  Tensor new_memo;  ///< 1×d_M; undefined when n_M == 0
};

class WmgNetwork {
 public:
  WmgNetwork(const WmgConfig& config, ParameterStore& store, Rng& rng,
             const std::string& prefix = "wmg");

  /// Stacks embedded Core (row 0), Factors, then age-tagged Memos.
  /// `factors` is n_F×d_F and may have zero rows.
  Tensor build_input(const Tensor& core, const Tensor& factors, const MemoMatrix& memos) const;
  WmgOutput forward(const Tensor& core, const Tensor& factors, const MemoMatrix& memos) const;
  /// Forward pass plus the rolled Memo matrix (new Memo pushed at row 0).
  std::pair<WmgOutput, MemoMatrix> step(const Tensor& core, const Tensor& factors,
                                        const MemoMatrix& memos) const;
  MemoMatrix reset_state() const;
  Tensor empty_factors() const;

  static MemoMatrix push_memo(const MemoMatrix& memos, const Tensor& new_memo);

  const WmgConfig& config() const { return config_; }
  const TransformerEncoder& encoder() const { return encoder_; }
  const ActorCriticHead& head() const { return head_; }
  /// (d_M + n_M)×d_T; undefined when n_M == 0.
  const Tensor& memo_embedding_weight() const { return memo_weight_; }

 private:
  WmgConfig config_;
  Tensor core_weight_, core_bias_;
  Tensor factor_weight_, factor_bias_;
  Tensor memo_weight_, memo_bias_;
  Tensor age_identity_;
  TransformerEncoder encoder_;
  Tensor create_weight_, create_bias_;
  ActorCriticHead head_;
};

/// WMG on Pathfinding: the whole observation is the Core; no Factors.
class WmgAgent : public Agent {
 public:
  WmgAgent(const WmgConfig& config, Rng& rng);

  void reset_state() override;
  AgentOutput step(std::span<const double> observation) override;
  void detach_state() override;
  double peek_value(std::span<const double> observation) override;
  ParameterStore& parameters() override { return store_; }
  std::size_t observation_size() const override { return network_.config().core_size; }
  std::size_t action_count() const override { return network_.config().action_count; }
  std::string kind() const override { return "wmg"; }

  const WmgNetwork& network() const { return network_; }
  const MemoMatrix& memos() const { return memos_; }
  const WmgOutput& last_output() const { return last_; }

 private:
  ParameterStore store_;
  WmgNetwork network_;
  MemoMatrix memos_;
  WmgOutput last_;
};

}  // namespace wmg
