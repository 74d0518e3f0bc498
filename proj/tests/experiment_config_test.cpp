#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include "wmg/checkpoint.hpp"
#include "wmg/experiment_config.hpp"
#include "wmg/text.hpp"

using namespace wmg;

namespace {

ExperimentConfig parse(const std::string& text) {
  std::istringstream in(text);
  return parse_experiment_config(in);
}

}  // namespace

TEST(TextTests, CanonicalNamesStripLatex) {
  EXPECT_EQ(canonical_name("Discount factor $\\gamma$"), "Discount factor gamma");
  EXPECT_EQ(canonical_name("A3C $t_{max}$"), "A3C t_max");
  EXPECT_EQ(canonical_name("  WMG   Memos "), "WMG Memos");
}

TEST(TextTests, NumberParsing) {
  EXPECT_EQ(parse_unsigned("1e6", "x"), 1000000u);
  EXPECT_EQ(parse_unsigned("16.0", "x"), 16u);
  EXPECT_THROW(parse_unsigned("1.5", "x"), std::invalid_argument);
  EXPECT_THROW(parse_unsigned("-3", "x"), std::invalid_argument);
  EXPECT_DOUBLE_EQ(parse_double("6.3e-5", "x"), 6.3e-5);
  EXPECT_THROW(parse_double("abc", "x"), std::invalid_argument);
}

TEST(ExperimentConfigTests, ShippedConfigsLoadAndBuild) {
  std::size_t seen = 0;
  for (const auto& e : std::filesystem::directory_iterator(WMG_CONFIG_DIR)) {
    if (e.path().extension() != ".cfg") continue;
    ++seen;
    const ExperimentConfig c = load_experiment_config(e.path());
    const auto agent = make_agent(c);
    EXPECT_EQ(agent->observation_size(), c.observation_size()) << e.path();
    EXPECT_EQ(agent->kind(), to_string(c.model)) << e.path();
  }
  EXPECT_GE(seen, 6u);
}

TEST(ExperimentConfigTests, LatexKeysAndAliases) {
  const auto c = parse(
      "Model = gru\n"
      "# comment\n"
      "Discount factor $\\gamma$ = 0.75\n"
      "A3C $t_{max}$ = 8\n"
      "D = 5\n"
      "n = 4\n"
      "GRU observation embedding size = 32\n"
      "Learning rate annealing gamma = -\n");
  EXPECT_EQ(c.model, ModelKind::Gru);
  EXPECT_DOUBLE_EQ(c.train.gamma, 0.75);
  EXPECT_EQ(c.train.t_max, 8u);
  EXPECT_EQ(c.pattern_size, 5u);
  EXPECT_EQ(c.max_graph_size, 4u);
  EXPECT_EQ(c.gru_embed, 32u);
  EXPECT_FALSE(c.train.anneal_gamma);
}

TEST(ExperimentConfigTests, BadInputNamesTheProblem) {
  try {
    parse("Model = wmg\nWMG Memoz = 4\n");
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
  EXPECT_THROW(parse("Learning rate = fast\n"), std::invalid_argument);
  EXPECT_THROW(parse("Model = lstm\n"), std::invalid_argument);
  EXPECT_THROW(parse("Model = gru\nWMG Memos = 4\n"), std::invalid_argument);
  EXPECT_THROW(parse("Model = nr-wmg\nWMG Memos = 4\n"), std::invalid_argument);
  EXPECT_THROW(parse("Max graph size = 1\n"), std::invalid_argument);
}

TEST(ExperimentConfigTests, FormatRoundTrips) {
  for (const char* name : {"wmg_20m.cfg", "nr_wmg_1m.cfg", "gru_1m.cfg", "nr_wmg_20m.cfg"}) {
    const ExperimentConfig a = load_experiment_config(std::filesystem::path(WMG_CONFIG_DIR) / name);
    const std::string text = format_experiment_config(a);
    const ExperimentConfig b = parse(text);
    EXPECT_EQ(format_experiment_config(b), text) << name;
    EXPECT_EQ(b.train.learning_rate, a.train.learning_rate) << name;
    EXPECT_EQ(b.nr_history, a.nr_history) << name;
  }
}

TEST(ExperimentConfigTests, SameSeedSameAgent) {
  const ExperimentConfig c = parse("WMG layers = 1\nWMG Memos = 2\nActor-critic hidden layer size = 8\n");
  auto a = make_agent(c), b = make_agent(c);
  const auto& ea = a->parameters().entries();
  const auto& eb = b->parameters().entries();
  ASSERT_EQ(ea.size(), eb.size());
  for (std::size_t i = 0; i < ea.size(); ++i) {
    const auto va = ea[i].value.values(), vb = eb[i].value.values();
    EXPECT_TRUE(std::equal(va.begin(), va.end(), vb.begin(), vb.end())) << ea[i].name;
  }
}

TEST(CheckpointTests, RoundTripRestoresValuesAndMoments) {
  const auto dir = std::filesystem::temp_directory_path() / "wmg_ckpt_roundtrip";
  std::filesystem::remove_all(dir);
  const ExperimentConfig c = parse("WMG layers = 1\nWMG Memos = 2\nActor-critic hidden layer size = 8\n");
  auto a = make_agent(c);
  a->parameters().entries()[0].first_moment[0] = 0.125;
  a->parameters().set_adam_steps(17);
  save_parameters(a->parameters(), dir);

  ExperimentConfig other = c;
  other.train.seed = 99;
  auto b = make_agent(other);
  load_parameters(b->parameters(), dir);
  EXPECT_EQ(b->parameters().adam_steps(), 17u);
  EXPECT_EQ(b->parameters().entries()[0].first_moment[0], 0.125);
  const auto obs = std::vector<double>(c.observation_size(), 0.5);
  EXPECT_EQ(a->step(obs).value.item(), b->step(obs).value.item());

  const CheckpointContents contents = read_checkpoint(dir);
  EXPECT_EQ(contents.records.size(), 3 * a->parameters().size());
  std::filesystem::remove_all(dir);
}

TEST(CheckpointTests, ShapeMismatchIsRejected) {
  const auto dir = std::filesystem::temp_directory_path() / "wmg_ckpt_mismatch";
  std::filesystem::remove_all(dir);
  auto a = make_agent(parse("WMG layers = 1\nWMG Memos = 2\n"));
  save_parameters(a->parameters(), dir);
  auto b = make_agent(parse("WMG layers = 1\nWMG Memos = 3\n"));
  EXPECT_THROW(load_parameters(b->parameters(), dir), CheckpointError);
  EXPECT_THROW(read_checkpoint(dir / "missing"), CheckpointError);
  std::filesystem::remove_all(dir);
}

TEST(RngTests, SerializeResumesTheStream) {
  Rng a(5);
  for (int i = 0; i < 10; ++i) a.next_u64();
  Rng b(0);
  b.deserialize(a.serialize());
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
}

TEST(RngTests, SubstreamsDifferAndRepeat) {
  EXPECT_EQ(Rng::substream(1, 2).next_u64(), Rng::substream(1, 2).next_u64());
  EXPECT_NE(Rng::substream(1, 2).next_u64(), Rng::substream(1, 3).next_u64());
  EXPECT_NE(Rng::substream(1, 2).next_u64(), Rng::substream(2, 2).next_u64());
}

TEST(RngTests, DrawsStayInRange) {
  Rng r(9);
  for (int i = 0; i < 10000; ++i) {
    const double u = r.uniform();
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
    const double o = r.uniform_open(-1.0, 1.0);
    EXPECT_GT(o, -1.0);
    EXPECT_LT(o, 1.0);
    EXPECT_LT(r.index(7), 7u);
  }
  const std::vector<double> w{0.0, 1.0, 0.0};
  EXPECT_EQ(r.categorical(w), 1u);
}
