#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "support/gradcheck.hpp"
#include "wmg/transformer.hpp"
#include "wmg/wmg_agent.hpp"

using namespace wmg;
using namespace wmg::testing;

namespace {

WmgConfig tiny_config(std::size_t memos = 3) {
  WmgConfig c;
  c.core_size = 7;  // D=3 observation
  c.memo_count = memos;
  c.memo_size = 4;
  c.transformer = TransformerConfig{2, 2, 4, 6};
  c.ac_hidden = 5;
  return c;
}

Tensor random_row(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform_range(-1, 1);
  return Tensor::row(v);
}

MemoMatrix random_memos(std::size_t n, std::size_t d, Rng& rng) {
  std::vector<double> v(n * d);
  for (double& x : v) x = rng.uniform_range(-0.9, 0.9);
  return MemoMatrix{Tensor(n, d, v)};
}

std::vector<std::vector<double>> sorted_rows(const Tensor& t) {
  std::vector<std::vector<double>> rows;
  for (std::size_t r = 0; r < t.rows(); ++r) {
    std::vector<double> row;
    for (std::size_t c = 0; c < t.cols(); ++c) row.push_back(t(r, c));
    rows.push_back(row);
  }
  std::sort(rows.begin(), rows.end());
  return rows;
}

}  // namespace

TEST(TransformerTests, EncodeKeepsShape) {
  ParameterStore store;
  Rng rng(1);
  TransformerEncoder enc(TransformerConfig{2, 3, 4, 5}, store, rng, "t");
  Tensor x(5, 12, 0.1);
  Tensor y = enc.encode(x);
  EXPECT_EQ(y.rows(), 5u);
  EXPECT_EQ(y.cols(), 12u);
}

TEST(TransformerTests, FirstRowShortcutMatchesFullEncode) {
  ParameterStore store;
  Rng rng(2);
  TransformerEncoder enc(TransformerConfig{3, 2, 4, 6}, store, rng, "t");
  Tensor x = random_parameter(4, 8, rng).detach();
  Tensor full = enc.encode(x);
  Tensor first = enc.encode_first_row(x);
  for (std::size_t c = 0; c < 8; ++c) EXPECT_NEAR(first(0, c), full(0, c), 1e-12);
}

TEST(TransformerTests, PermutingInputRowsPermutesOutputRows) {
  ParameterStore store;
  Rng rng(3);
  TransformerEncoder enc(TransformerConfig{2, 2, 3, 4}, store, rng, "t");
  Tensor x = random_parameter(3, 6, rng).detach();
  Tensor swapped = concat_rows({slice_row(x, 2), slice_row(x, 1), slice_row(x, 0)});
  Tensor a = enc.encode(x), b = enc.encode(swapped);
  for (std::size_t c = 0; c < 6; ++c) {
    EXPECT_NEAR(a(0, c), b(2, c), 1e-12);
    EXPECT_NEAR(a(1, c), b(1, c), 1e-12);
  }
}

TEST(TransformerTests, AttentionRowsAreDistributions) {
  ParameterStore store;
  Rng rng(4);
  TransformerEncoder enc(TransformerConfig{2, 3, 2, 4}, store, rng, "t");
  Tensor x = random_parameter(5, 6, rng).detach();
  const AttentionMaps maps = enc.attention_probe(x);
  ASSERT_EQ(maps.size(), 2u);
  ASSERT_EQ(maps[0].size(), 3u);
  for (const auto& layer : maps) {
    for (const auto& head : layer) {
      for (std::size_t r = 0; r < 5; ++r) {
        double s = 0;
        for (std::size_t c = 0; c < 5; ++c) s += head(r, c);
        EXPECT_NEAR(s, 1.0, 1e-12);
      }
    }
  }
}

TEST(TransformerTests, EncoderGradientsMatchFiniteDifferences) {
  ParameterStore store;
  Rng rng(5);
  TransformerEncoder enc(TransformerConfig{2, 2, 3, 4}, store, rng, "t");
  Tensor x = random_parameter(3, 6, rng);
  std::vector<Tensor> inputs = all_parameters(store);
  inputs.push_back(x);
  const GradCheck r = check_gradients([&] { return weighted_sum(enc.encode(x)); }, inputs);
  EXPECT_LT(r.max_rel_error, kCompositeTolerance) << r.worst;
}

TEST(TransformerTests, InvalidConfigThrows) {
  EXPECT_THROW((TransformerConfig{0, 1, 1, 1}.validate()), std::invalid_argument);
  EXPECT_THROW((TransformerConfig{1, 0, 1, 1}.validate()), std::invalid_argument);
}

TEST(WmgTests, ResetStateIsZeroMemoMatrix) {
  ParameterStore store;
  Rng rng(6);
  WmgConfig c = tiny_config();
  c.memo_count = 16;
  c.memo_size = 128;
  WmgNetwork net(c, store, rng);
  MemoMatrix m = net.reset_state();
  EXPECT_EQ(m.memos.rows(), 16u);
  EXPECT_EQ(m.memos.cols(), 128u);
  for (double v : m.memos.values()) EXPECT_EQ(v, 0.0);

  ParameterStore store0;
  WmgNetwork none(tiny_config(0), store0, rng);
  EXPECT_EQ(none.reset_state().count(), 0u);
}

TEST(WmgTests, InputMatrixStacksCoreFactorsMemos) {
  ParameterStore store;
  Rng rng(7);
  WmgConfig c = tiny_config();
  c.factor_size = 2;
  WmgNetwork net(c, store, rng);
  Tensor factors(4, 2, 0.5);
  Tensor in = net.build_input(random_row(7, rng), factors, net.reset_state());
  EXPECT_EQ(in.rows(), 1u + 4u + 3u);
  EXPECT_EQ(in.cols(), c.transformer.model_size());
}

TEST(WmgTests, InputRejectsWrongCoreWidth) {
  ParameterStore store;
  Rng rng(8);
  WmgNetwork net(tiny_config(), store, rng);
  EXPECT_THROW(net.build_input(Tensor(1, 6), net.empty_factors(), net.reset_state()), DimensionError);
}

TEST(WmgTests, MemoShiftKeepsOlderRowsBitwise) {
  ParameterStore store;
  Rng rng(9);
  WmgNetwork net(tiny_config(4), store, rng);
  MemoMatrix before = random_memos(4, 4, rng);
  auto [out, after] = net.step(random_row(7, rng), net.empty_factors(), before);
  ASSERT_EQ(after.count(), 4u);
  for (std::size_t r = 1; r < 4; ++r) {
    for (std::size_t c = 0; c < 4; ++c) EXPECT_EQ(after.memos(r, c), before.memos(r - 1, c));
  }
  for (std::size_t c = 0; c < 4; ++c) {
    EXPECT_EQ(after.memos(0, c), out.new_memo(0, c));
    EXPECT_LT(std::abs(out.new_memo(0, c)), 1.0);
  }
}

TEST(WmgTests, AgeTagsDistinguishEqualMemos) {
  ParameterStore store;
  Rng rng(10);
  WmgNetwork net(tiny_config(3), store, rng);
  MemoMatrix same{Tensor(3, 4, 0.25)};
  Tensor in = net.build_input(random_row(7, rng), net.empty_factors(), same);
  for (std::size_t a = 1; a < 4; ++a) {
    for (std::size_t b = a + 1; b < 4; ++b) {
      double diff = 0;
      for (std::size_t c = 0; c < in.cols(); ++c) diff += std::abs(in(a, c) - in(b, c));
      EXPECT_GT(diff, 1e-6) << "Memo rows " << a << " and " << b << " embed identically";
    }
  }
}

TEST(WmgTests, AgesBreakMemoPermutationSymmetry) {
  ParameterStore store;
  Rng rng(11);
  WmgNetwork net(tiny_config(3), store, rng);
  const Tensor core = random_row(7, rng);
  MemoMatrix m = random_memos(3, 4, rng);
  MemoMatrix swapped{concat_rows({slice_row(m.memos, 2), slice_row(m.memos, 1), slice_row(m.memos, 0)})};
  EXPECT_NE(sorted_rows(net.build_input(core, net.empty_factors(), m)),
            sorted_rows(net.build_input(core, net.empty_factors(), swapped)));

  // With the age rows of the Memo embedding zeroed, a permutation of Memos
  // only permutes input rows.
  Tensor w = store.get("wmg.memo_embed.w");
  auto v = w.mutable_values();
  const std::size_t width = w.cols();
  for (std::size_t r = 4; r < 7; ++r) std::fill_n(v.begin() + r * width, width, 0.0);
  const auto a = sorted_rows(net.build_input(core, net.empty_factors(), m));
  const auto b = sorted_rows(net.build_input(core, net.empty_factors(), swapped));
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t r = 0; r < a.size(); ++r) {
    for (std::size_t c = 0; c < a[r].size(); ++c) EXPECT_NEAR(a[r][c], b[r][c], 1e-12);
  }
}

TEST(WmgTests, HeadsShareHiddenLayer) {
  ParameterStore store;
  Rng rng(12);
  WmgNetwork net(tiny_config(), store, rng);
  const Tensor core = random_row(7, rng);
  const MemoMatrix m = random_memos(3, 4, rng);
  const WmgOutput before = net.forward(core, net.empty_factors(), m);
  Tensor w = net.head().shared_weight();
  for (double& x : w.mutable_values()) x += 0.05;
  const WmgOutput after = net.forward(core, net.empty_factors(), m);
  EXPECT_NE(before.value.item(), after.value.item());
  EXPECT_NE(before.logits(0, 0), after.logits(0, 0));
}

TEST(WmgTests, OutputsAreWellFormed) {
  ParameterStore store;
  Rng rng(13);
  WmgNetwork net(tiny_config(), store, rng);
  const WmgOutput out = net.forward(random_row(7, rng), net.empty_factors(), net.reset_state());
  EXPECT_EQ(out.policy.cols(), 2u);
  EXPECT_NEAR(out.policy(0, 0) + out.policy(0, 1), 1.0, 1e-12);
  EXPECT_EQ(out.value.size(), 1u);
  EXPECT_EQ(out.h.rows(), 1u);
}

TEST(WmgTests, StepLossGradientsMatchFiniteDifferences) {
  ParameterStore store;
  Rng rng(14);
  WmgNetwork net(tiny_config(2), store, rng);
  const Tensor core = random_row(7, rng);
  const MemoMatrix m = random_memos(2, 4, rng);
  auto loss = [&] {
    const WmgOutput out = net.forward(core, net.empty_factors(), m);
    return add(add(pick(log_softmax_rows(out.logits), 0, 1), mul(out.value, out.value)),
               weighted_sum(out.new_memo));
  };
  const GradCheck r = check_gradients(loss, all_parameters(store));
  EXPECT_LT(r.max_rel_error, kCompositeTolerance) << r.worst;
}

TEST(WmgTests, GradientFlowsThroughMemosAcrossSteps) {
  ParameterStore store;
  Rng rng(15);
  WmgNetwork net(tiny_config(2), store, rng);
  const Tensor o1 = random_row(7, rng), o2 = random_row(7, rng);
  const Tensor create = store.get("wmg.memo_create.w");
  auto loss = [&] {
    auto [first, memos] = net.step(o1, net.empty_factors(), net.reset_state());
    return net.forward(o2, net.empty_factors(), memos).value;
  };
  const GradCheck r = check_gradients(loss, {create});
  EXPECT_LT(r.max_rel_error, kCompositeTolerance) << r.worst;
  double norm = 0;
  for (double g : create.grad()) norm += g * g;
  EXPECT_GT(norm, 0.0);
}

TEST(WmgTests, DetachedMemosStopGradientFlow) {
  Rng rng(16);
  WmgAgent agent(tiny_config(2), rng);
  const Tensor create = agent.parameters().get("wmg.memo_create.w");
  agent.reset_state();
  agent.step(random_row(7, rng).values());
  agent.detach_state();
  const AgentOutput out = agent.step(random_row(7, rng).values());
  agent.parameters().zero_grad();
  backward(out.value);
  for (double g : create.grad()) EXPECT_EQ(g, 0.0);
}

TEST(WmgTests, AgentResetClearsMemos) {
  Rng rng(17);
  WmgAgent agent(tiny_config(2), rng);
  const std::vector<double> obs{0.1, 0.2, 0.3, -0.1, -0.2, -0.3, 0.0};
  const double first = agent.step(obs).value.item();
  agent.step(obs);
  agent.reset_state();
  EXPECT_EQ(agent.step(obs).value.item(), first);
}

TEST(WmgTests, PeekValueDoesNotAdvanceState) {
  Rng rng(18);
  WmgAgent agent(tiny_config(2), rng);
  const std::vector<double> obs{0.1, 0.2, 0.3, -0.1, -0.2, -0.3, 1.0};
  agent.step(obs);
  const std::vector<double> before(agent.memos().memos.values().begin(), agent.memos().memos.values().end());
  const double peek = agent.peek_value(obs);
  const std::vector<double> after(agent.memos().memos.values().begin(), agent.memos().memos.values().end());
  EXPECT_EQ(before, after);
  EXPECT_EQ(agent.step(obs).value.item(), peek);
}

TEST(WmgTests, ParameterCountForLargeTunedConfig) {
  WmgConfig c;
  c.core_size = 15;
  c.memo_count = 16;
  c.memo_size = 128;
  c.transformer = TransformerConfig{4, 6, 12, 12};
  c.ac_hidden = 128;
  Rng rng(19);
  WmgAgent agent(c, rng);
  EXPECT_EQ(agent.parameters().scalar_count(), 123163u);
}
