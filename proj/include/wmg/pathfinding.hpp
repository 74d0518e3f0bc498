#pragma once

// Pathfinding: a polytree is grown one edge at a time. Construction steps show
// the two patterns of a new edge (parent first, then child); quiz steps show
// two patterns and ask whether a directed path runs from the first to the
// second. Observations are 2D+1 floats: pattern, pattern, quiz flag.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <vector>

#include "wmg/rng.hpp"

namespace wmg {

enum class Answer : int { no = 0, yes = 1 };

struct EpisodeGraph {
  std::size_t pattern_size = 0;
  std::vector<std::vector<double>> patterns;  ///< node id = creation order
  std::vector<std::pair<std::size_t, std::size_t>> edges;  ///< (parent, child)
  std::vector<std::vector<std::size_t>> children;

  std::size_t size() const { return patterns.size(); }
  std::size_t add_node(std::vector<double> pattern);
  void add_edge(std::size_t parent, std::size_t child);
};

/// True iff a directed path of length ≥ 1 runs from x to y (forward traversal).
bool path_exists(const EpisodeGraph& graph, std::size_t x, std::size_t y);

/// Everything random about one episode, pre-rolled. Quiz choices do not depend
/// on the agent's actions, so a script fixes the full observation stream.
struct EpisodeScript {
  struct Link {
    std::size_t parent;
    std::size_t child;
  };
  struct Quiz {
    std::size_t x;
    std::size_t y;
    bool target;
  };

  std::uint64_t seed = 0;
  std::size_t pattern_size = 0;
  std::size_t max_graph_size = 0;
  std::vector<std::vector<double>> patterns;
  std::vector<Link> links;  ///< links[i] attaches node i + 1
  std::vector<Quiz> quizzes;

  std::size_t steps() const { return links.size() + quizzes.size(); }
};

struct StepResult {
  double reward = 0.0;
  std::vector<double> observation;  ///< empty when done
  bool done = false;
};

class PathfindingEnv {
 public:
  /// Episode k of this environment draws from Rng::substream(seed, k).
  PathfindingEnv(std::size_t pattern_size, std::size_t max_graph_size, std::uint64_t seed);

  /// Starts the next live episode; returns the first (construction) observation.
  std::vector<double> reset();
  /// Replays a pre-rolled episode.
  std::vector<double> reset(const EpisodeScript& script);
  StepResult step(int action);

  std::size_t observation_size() const { return 2 * pattern_size_ + 1; }
  std::size_t pattern_size() const { return pattern_size_; }
  std::size_t max_graph_size() const { return max_graph_size_; }
  /// Agent actions per episode: 2(N - 1).
  std::size_t episode_steps() const { return 2 * (max_graph_size_ - 1); }

  const EpisodeGraph& graph() const { return graph_; }
  bool done() const { return done_; }
  bool quiz_pending() const { return pending_.has_value(); }
  /// Target of the quiz currently awaiting an answer.
  std::optional<bool> pending_target() const;
  const EpisodeScript& recorded_script() const { return recorded_; }

  std::uint64_t episodes_started() const { return next_episode_; }
  void set_episodes_started(std::uint64_t count) { next_episode_ = count; }

 private:
  std::vector<double> begin_episode(std::uint64_t seed, const EpisodeScript* script);
  std::vector<double> construct();
  std::vector<double> quiz();
  std::vector<double> observation(std::size_t a, std::size_t b, bool is_quiz) const;

  std::size_t pattern_size_;
  std::size_t max_graph_size_;
  std::uint64_t seed_;
  std::uint64_t next_episode_ = 0;

  Rng rng_;
  const EpisodeScript* script_ = nullptr;
  std::size_t script_link_ = 0;
  std::size_t script_quiz_ = 0;
  EpisodeScript recorded_;
  EpisodeGraph graph_;
  bool add_pattern_ = true;
  bool done_ = true;
  std::optional<EpisodeScript::Quiz> pending_;
};

/// Fixed evaluation episodes of `steps` agent actions each (N = steps/2 + 1).
/// Episode i is seeded from Rng::substream(seed, i).
std::vector<EpisodeScript> generate_episode_scripts(std::size_t count, std::size_t steps,
                                                    std::size_t pattern_size, std::uint64_t seed);

// Script file, line oriented, whitespace separated, doubles in %.17g:
//   wmg-pathfinding-scripts 1
//   count <episodes> steps <steps> pattern_size <D> max_graph_size <N>
//   episode <index> seed <seed>
//   pattern <D values>        (N lines, node creation order)
//   link <parent> <child>     (N - 1 lines)
//   quiz <x> <y> <0|1>        (N - 1 lines)
//   end
void write_episode_scripts(std::ostream& out, const std::vector<EpisodeScript>& scripts);
std::vector<EpisodeScript> read_episode_scripts(std::istream& in);
void save_episode_scripts(const std::filesystem::path& path,
                          const std::vector<EpisodeScript>& scripts);
std::vector<EpisodeScript> load_episode_scripts(const std::filesystem::path& path);

}  // namespace wmg
