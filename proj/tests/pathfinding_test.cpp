#include <gtest/gtest.h>

#include <sstream>

#include "support/closure_oracle.hpp"
#include "wmg/depth_oracle.hpp"
#include "wmg/pathfinding.hpp"

using namespace wmg;
using namespace wmg::testing;

namespace {

// Plays one live episode answering `action` throughout; returns step count.
std::size_t play(PathfindingEnv& env, int action = 0) {
  env.reset();
  std::size_t steps = 0;
  while (true) {
    ++steps;
    if (env.step(action).done) return steps;
  }
}

}  // namespace

TEST(PathfindingTests, ResetGivesConstructionObservation) {
  PathfindingEnv env(7, 7, 1);
  const auto obs = env.reset();
  ASSERT_EQ(obs.size(), 15u);
  EXPECT_EQ(obs.back(), 0.0);
  EXPECT_EQ(env.graph().size(), 2u);
  EXPECT_EQ(env.graph().edges.size(), 1u);
  for (std::size_t i = 0; i + 1 < obs.size(); ++i) {
    EXPECT_GT(obs[i], -1.0);
    EXPECT_LT(obs[i], 1.0);
  }
}

TEST(PathfindingTests, ConstructionObservationIsParentThenChild) {
  PathfindingEnv env(3, 7, 2);
  auto obs = env.reset();
  for (int k = 0; k < 6; ++k) {
    const auto [parent, child] = env.graph().edges.back();
    const auto& g = env.graph();
    for (std::size_t i = 0; i < 3; ++i) {
      EXPECT_EQ(obs[i], g.patterns[parent][i]);
      EXPECT_EQ(obs[3 + i], g.patterns[child][i]);
    }
    const StepResult quiz = env.step(0);
    EXPECT_EQ(quiz.observation.back(), 1.0);
    const StepResult next = env.step(0);
    if (next.done) break;
    obs = next.observation;
  }
}

TEST(PathfindingTests, TwelveStepsWithSevenNodes) {
  PathfindingEnv env(7, 7, 3);
  EXPECT_EQ(env.episode_steps(), 12u);
  EXPECT_EQ(play(env), 12u);
  EXPECT_EQ(env.graph().size(), 7u);
  EXPECT_THROW(env.step(0), std::logic_error);
}

TEST(PathfindingTests, SmallestGraphEndsAfterTwoSteps) {
  PathfindingEnv env(2, 2, 4);
  EXPECT_EQ(play(env), 2u);
}

TEST(PathfindingTests, RejectsInvalidArguments) {
  EXPECT_THROW(PathfindingEnv(0, 7, 0), std::invalid_argument);
  EXPECT_THROW(PathfindingEnv(7, 1, 0), std::invalid_argument);
  PathfindingEnv env(7, 7, 0);
  env.reset();
  EXPECT_THROW(env.step(2), std::invalid_argument);
  EXPECT_THROW(env.step(-1), std::invalid_argument);
}

TEST(PathfindingTests, OnlyQuizAnswersAreRewarded) {
  PathfindingEnv env(5, 7, 5);
  for (int ep = 0; ep < 200; ++ep) {
    auto obs = env.reset();
    while (true) {
      const bool quiz = obs.back() == 1.0;
      const int action = quiz ? (*env.pending_target() ? 1 : 0) : 1;
      const StepResult r = env.step(action);
      EXPECT_EQ(r.reward, quiz ? 1.0 : 0.0);
      if (r.done) break;
      obs = r.observation;
    }
  }
}

TEST(PathfindingTests, QuizTargetsMatchTheGraph) {
  PathfindingEnv env(4, 7, 6);
  for (int ep = 0; ep < 300; ++ep) {
    env.reset();
    while (true) {
      const StepResult r = env.step(0);
      if (r.done) break;
      if (r.observation.back() == 1.0) {
        const auto& q = env.recorded_script().quizzes.back();
        EXPECT_NE(q.x, q.y);
        EXPECT_EQ(path_exists(env.graph(), q.x, q.y), q.target);
        EXPECT_EQ(*env.pending_target(), q.target);
      }
    }
  }
}

TEST(PathfindingTests, PolytreeInvariantsAgainstClosureOracle) {
  PathfindingEnv env(3, 9, 7);
  for (int ep = 0; ep < 500; ++ep) {
    env.reset();
    bool done = false;
    while (!done) {
      const auto& g = env.graph();
      const std::size_t n = g.size();
      ASSERT_EQ(g.edges.size(), n - 1);
      ASSERT_TRUE(weakly_connected(n, g.edges));
      const auto dist = shortest_paths(n, g.edges);
      const auto counts = path_counts(n, g.edges);
      for (std::size_t x = 0; x < n; ++x) {
        EXPECT_EQ(dist[x][x], kNoPath);
        for (std::size_t y = 0; y < n; ++y) {
          if (x == y) continue;
          EXPECT_LE(counts[x][y], 1u);
          EXPECT_EQ(path_exists(g, x, y), dist[x][y] != kNoPath);
        }
      }
      done = env.step(1).done;
    }
  }
}

TEST(PathfindingTests, SameSeedSameEpisodes) {
  PathfindingEnv a(7, 7, 42), b(7, 7, 42), c(7, 7, 43);
  for (int ep = 0; ep < 20; ++ep) {
    auto oa = a.reset(), ob = b.reset(), oc = c.reset();
    EXPECT_EQ(oa, ob);
    if (ep == 0) EXPECT_NE(oa, oc);
    while (true) {
      const StepResult ra = a.step(1), rb = b.step(1);
      c.step(1);
      EXPECT_EQ(ra.observation, rb.observation);
      EXPECT_EQ(ra.reward, rb.reward);
      if (ra.done) break;
    }
  }
}

TEST(PathfindingTests, ObservationsDoNotDependOnActions) {
  PathfindingEnv a(4, 7, 8), b(4, 7, 8);
  Rng rng(1);
  for (int ep = 0; ep < 20; ++ep) {
    EXPECT_EQ(a.reset(), b.reset());
    while (true) {
      const StepResult ra = a.step(0), rb = b.step(static_cast<int>(rng.index(2)));
      EXPECT_EQ(ra.observation, rb.observation);
      if (ra.done) break;
    }
  }
}

TEST(PathfindingTests, ScriptReplayReproducesLiveEpisode) {
  PathfindingEnv live(5, 6, 9);
  std::vector<std::vector<double>> seen{live.reset()};
  while (true) {
    StepResult r = live.step(1);
    if (r.done) break;
    seen.push_back(r.observation);
  }
  const EpisodeScript script = live.recorded_script();
  EXPECT_EQ(script.steps(), 10u);

  PathfindingEnv replay(5, 6, 12345);
  std::vector<std::vector<double>> again{replay.reset(script)};
  while (true) {
    StepResult r = replay.step(0);
    if (r.done) break;
    again.push_back(r.observation);
  }
  EXPECT_EQ(seen, again);
}

TEST(PathfindingTests, ScriptFileRoundTrip) {
  const auto scripts = generate_episode_scripts(5, 24, 7, 11);
  std::stringstream buf;
  write_episode_scripts(buf, scripts);
  const auto back = read_episode_scripts(buf);
  ASSERT_EQ(back.size(), 5u);
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_EQ(back[i].seed, scripts[i].seed);
    EXPECT_EQ(back[i].patterns, scripts[i].patterns);
    EXPECT_EQ(back[i].max_graph_size, 13u);
    for (std::size_t k = 0; k < 12; ++k) {
      EXPECT_EQ(back[i].links[k].parent, scripts[i].links[k].parent);
      EXPECT_EQ(back[i].quizzes[k].x, scripts[i].quizzes[k].x);
      EXPECT_EQ(back[i].quizzes[k].target, scripts[i].quizzes[k].target);
    }
  }
  std::stringstream again;
  write_episode_scripts(again, back);
  EXPECT_EQ(again.str(), buf.str());
}

TEST(PathfindingTests, ScriptGenerationIsDeterministic) {
  std::stringstream a, b;
  write_episode_scripts(a, generate_episode_scripts(50, 12, 7, 3));
  write_episode_scripts(b, generate_episode_scripts(50, 12, 7, 3));
  EXPECT_EQ(a.str(), b.str());
}

TEST(PathfindingTests, MalformedScriptFilesAreRejected) {
  std::stringstream bad("wmg-pathfinding-scripts 2\n");
  EXPECT_THROW(read_episode_scripts(bad), std::runtime_error);
  std::stringstream truncated("wmg-pathfinding-scripts 1\ncount 1 steps 2 pattern_size 1 max_graph_size 2\n"
                              "episode 0 seed 1\npattern 0.5\n");
  EXPECT_THROW(read_episode_scripts(truncated), std::runtime_error);
  EXPECT_THROW(generate_episode_scripts(1, 5, 7, 0), std::invalid_argument);
}

TEST(PathfindingTests, ScriptWithWrongPatternSizeIsRejected) {
  const auto scripts = generate_episode_scripts(1, 12, 5, 0);
  PathfindingEnv env(7, 7, 0);
  EXPECT_THROW(env.reset(scripts[0]), std::invalid_argument);
}

TEST(PathfindingTests, EpisodeCounterRestoresStream) {
  PathfindingEnv a(7, 7, 10), b(7, 7, 10);
  for (int i = 0; i < 5; ++i) play(a);
  b.set_episodes_started(5);
  EXPECT_EQ(a.reset(), b.reset());
}

// ---------------------------------------------------------------------------

TEST(DepthOracleTests, PathLengthsMatchFloydWarshall) {
  PathfindingEnv env(3, 10, 12);
  for (int ep = 0; ep < 300; ++ep) {
    DepthOracle oracle(100, 3);
    auto obs = env.reset();
    while (true) {
      oracle.act(obs);
      StepResult r = env.step(0);
      if (r.done) break;
      obs = r.observation;
    }
    const auto& g = env.graph();
    const auto dist = shortest_paths(g.size(), g.edges);
    for (std::size_t x = 0; x < g.size(); ++x) {
      for (std::size_t y = 0; y < g.size(); ++y) {
        const long ix = oracle.find(g.patterns[x]);
        const long iy = oracle.find(g.patterns[y]);
        ASSERT_GE(ix, 0);
        ASSERT_GE(iy, 0);
        const std::size_t len = oracle.path_length(static_cast<std::size_t>(ix), static_cast<std::size_t>(iy));
        EXPECT_EQ(len, dist[x][y] == kNoPath ? 0u : dist[x][y]);
      }
    }
  }
}

TEST(DepthOracleTests, AnswersByDepth) {
  // Chain a -> b -> c.
  const std::vector<double> a{0.1}, b{0.2}, c{0.3};
  auto construction = [](const std::vector<double>& p, const std::vector<double>& q) {
    return std::vector<double>{p[0], q[0], 0.0};
  };
  auto quiz = [](const std::vector<double>& p, const std::vector<double>& q) {
    return std::vector<double>{p[0], q[0], 1.0};
  };
  DepthOracle d1(1, 1), d2(2, 1);
  for (DepthOracle* o : {&d1, &d2}) {
    o->observe(construction(a, b));
    o->observe(construction(b, c));
  }
  EXPECT_EQ(d1.answer(quiz(a, b)), 1);
  EXPECT_EQ(d1.answer(quiz(a, c)), 0);
  EXPECT_EQ(d2.answer(quiz(a, c)), 1);
  EXPECT_EQ(d2.answer(quiz(c, a)), 0);
  EXPECT_EQ(d2.answer(quiz(a, std::vector<double>{0.9})), 0);
  EXPECT_EQ(d2.act(quiz(a, c)), 1);
  EXPECT_EQ(d2.pattern_count(), 3u);
}

TEST(DepthOracleTests, RejectsBadArguments) {
  EXPECT_THROW(DepthOracle(0, 7), std::invalid_argument);
  DepthOracle o(1, 2);
  EXPECT_THROW(o.observe(std::vector<double>{0, 0, 0}), std::invalid_argument);
  EXPECT_THROW(o.observe(std::vector<double>{0, 0, 0, 0, 1}), std::invalid_argument);
}

TEST(DepthOracleTests, FullDepthOracleIsPerfectOnLiveEpisodes) {
  PathfindingEnv env(7, 7, 13);
  DepthOracle oracle(6, 7);
  for (int ep = 0; ep < 2000; ++ep) {
    oracle.reset();
    auto obs = env.reset();
    while (true) {
      const bool quiz = obs.back() == 1.0;
      const int a = oracle.act(obs);
      StepResult r = env.step(a);
      if (quiz) EXPECT_EQ(r.reward, 1.0);
      if (r.done) break;
      obs = r.observation;
    }
  }
}
