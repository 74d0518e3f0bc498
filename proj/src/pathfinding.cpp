#include "wmg/pathfinding.hpp"

#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace wmg {

std::size_t EpisodeGraph::add_node(std::vector<double> pattern) {
  patterns.push_back(std::move(pattern));
  children.emplace_back();
  return patterns.size() - 1;
}

void EpisodeGraph::add_edge(std::size_t parent, std::size_t child) {
  if (parent >= size() || child >= size()) throw std::out_of_range("add_edge: unknown node");
  edges.emplace_back(parent, child);
  children[parent].push_back(child);
}

bool path_exists(const EpisodeGraph& graph, std::size_t x, std::size_t y) {
  if (x >= graph.size() || y >= graph.size()) throw std::out_of_range("path_exists: unknown node");
  std::vector<char> seen(graph.size(), 0);
  std::vector<std::size_t> frontier(graph.children[x].begin(), graph.children[x].end());
  while (!frontier.empty()) {
    const std::size_t n = frontier.back();
    frontier.pop_back();
    if (n == y) return true;
    if (seen[n]) continue;
    seen[n] = 1;
    frontier.insert(frontier.end(), graph.children[n].begin(), graph.children[n].end());
  }
  return false;
}

// ---------------------------------------------------------------------------

PathfindingEnv::PathfindingEnv(std::size_t pattern_size, std::size_t max_graph_size,
                               std::uint64_t seed)
    : pattern_size_(pattern_size), max_graph_size_(max_graph_size), seed_(seed) {
  if (pattern_size == 0) throw std::invalid_argument("Pathfinding: pattern size D must be >= 1");
  if (max_graph_size < 2) throw std::invalid_argument("Pathfinding: max graph size N must be >= 2");
}

std::vector<double> PathfindingEnv::reset() {
  const std::uint64_t episode_seed = Rng::substream_seed(seed_, next_episode_++);
  return begin_episode(episode_seed, nullptr);
}

std::vector<double> PathfindingEnv::reset(const EpisodeScript& script) {
  if (script.pattern_size != pattern_size_) {
    throw std::invalid_argument("Pathfinding: script pattern size " +
                                std::to_string(script.pattern_size) + " != D = " +
                                std::to_string(pattern_size_));
  }
  if (script.patterns.size() != script.max_graph_size ||
      script.links.size() + 1 != script.max_graph_size ||
      script.quizzes.size() + 1 != script.max_graph_size) {
    throw std::invalid_argument("Pathfinding: malformed episode script");
  }
  return begin_episode(script.seed, &script);
}

std::vector<double> PathfindingEnv::begin_episode(std::uint64_t seed, const EpisodeScript* script) {
  rng_ = Rng(seed);
  script_ = script;
  script_link_ = 0;
  script_quiz_ = 0;
  const std::size_t n = script ? script->max_graph_size : max_graph_size_;
  recorded_ = EpisodeScript{};
  recorded_.seed = seed;
  recorded_.pattern_size = pattern_size_;
  recorded_.max_graph_size = n;
  graph_ = EpisodeGraph{};
  graph_.pattern_size = pattern_size_;
  pending_.reset();
  done_ = false;

  std::vector<double> first;
  if (script) {
    first = script->patterns[0];
  } else {
    first.resize(pattern_size_);
    for (double& v : first) v = rng_.uniform_open(-1.0, 1.0);
  }
  recorded_.patterns.push_back(first);
  graph_.add_node(std::move(first));
  add_pattern_ = true;
  // First pass of the loop: construction branch with a one-node graph, so no
  // reward is possible.
  return construct();
}

std::vector<double> PathfindingEnv::construct() {
  std::size_t parent;
  std::size_t child;
  std::vector<double> pattern;
  const std::size_t b = graph_.size();
  if (script_) {
    const auto& link = script_->links[script_link_++];
    parent = link.parent;
    child = link.child;
    pattern = script_->patterns[b];
    if (!((parent == b && child < b) || (child == b && parent < b))) {
      throw std::invalid_argument("Pathfinding: script link must attach the newest node");
    }
  } else {
    const std::size_t a = rng_.index(b);
    pattern.resize(pattern_size_);
    for (double& v : pattern) v = rng_.uniform_open(-1.0, 1.0);
    if (rng_.coin()) {
      parent = a;
      child = b;
    } else {
      parent = b;
      child = a;
    }
  }
  recorded_.patterns.push_back(pattern);
  recorded_.links.push_back({parent, child});
  graph_.add_node(std::move(pattern));
  graph_.add_edge(parent, child);
  add_pattern_ = false;
  return observation(parent, child, false);
}

std::vector<double> PathfindingEnv::quiz() {
  EpisodeScript::Quiz q{};
  if (script_) {
    q = script_->quizzes[script_quiz_++];
    if (q.x >= graph_.size() || q.y >= graph_.size() ||
        path_exists(graph_, q.x, q.y) != q.target) {
      throw std::invalid_argument("Pathfinding: script quiz inconsistent with its graph");
    }
  } else {
    q.target = rng_.coin();
    do {
      q.x = rng_.index(graph_.size());
      q.y = rng_.index(graph_.size());
    } while (q.x == q.y || path_exists(graph_, q.x, q.y) != q.target);
  }
  recorded_.quizzes.push_back(q);
  pending_ = q;
  add_pattern_ = true;
  return observation(q.x, q.y, true);
}

std::vector<double> PathfindingEnv::observation(std::size_t a, std::size_t b, bool is_quiz) const {
  std::vector<double> obs;
  obs.reserve(observation_size());
  obs.insert(obs.end(), graph_.patterns[a].begin(), graph_.patterns[a].end());
  obs.insert(obs.end(), graph_.patterns[b].begin(), graph_.patterns[b].end());
  obs.push_back(is_quiz ? 1.0 : 0.0);
  return obs;
}

std::optional<bool> PathfindingEnv::pending_target() const {
  if (!pending_) return std::nullopt;
  return pending_->target;
}

StepResult PathfindingEnv::step(int action) {
  if (done_) throw std::logic_error("Pathfinding: step() called after the episode ended");
  if (action != 0 && action != 1) throw std::invalid_argument("Pathfinding: action must be 0 or 1");
  StepResult result;
  if (add_pattern_) {
    if (graph_.size() > 1 && pending_ && (action == 1) == pending_->target) result.reward = 1.0;
    pending_.reset();
    const std::size_t n = script_ ? script_->max_graph_size : max_graph_size_;
    if (graph_.size() == n) {
      done_ = true;
      result.done = true;
    } else {
      result.observation = construct();
    }
  } else {
    result.observation = quiz();
  }
  return result;
}

// ---------------------------------------------------------------------------

std::vector<EpisodeScript> generate_episode_scripts(std::size_t count, std::size_t steps,
                                                    std::size_t pattern_size, std::uint64_t seed) {
  if (steps < 2 || steps % 2 != 0) {
    throw std::invalid_argument("episode scripts need an even, positive step count");
  }
  PathfindingEnv env(pattern_size, steps / 2 + 1, seed);
  std::vector<EpisodeScript> scripts;
  scripts.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    env.reset();
    while (!env.step(0).done) {
    }
    scripts.push_back(env.recorded_script());
  }
  return scripts;
}

void write_episode_scripts(std::ostream& out, const std::vector<EpisodeScript>& scripts) {
  const std::size_t d = scripts.empty() ? 0 : scripts.front().pattern_size;
  const std::size_t n = scripts.empty() ? 0 : scripts.front().max_graph_size;
  out << "wmg-pathfinding-scripts 1\n";
  out << "count " << scripts.size() << " steps " << (n > 0 ? 2 * (n - 1) : 0) << " pattern_size "
      << d << " max_graph_size " << n << '\n';
  char buf[32];
  for (std::size_t i = 0; i < scripts.size(); ++i) {
    const EpisodeScript& s = scripts[i];
    if (s.pattern_size != d || s.max_graph_size != n) {
      throw std::invalid_argument("write_episode_scripts: scripts must share D and N");
    }
    out << "episode " << i << " seed " << s.seed << '\n';
    for (const auto& p : s.patterns) {
      out << "pattern";
      for (double v : p) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        out << ' ' << buf;
      }
      out << '\n';
    }
    for (const auto& l : s.links) out << "link " << l.parent << ' ' << l.child << '\n';
    for (const auto& q : s.quizzes) out << "quiz " << q.x << ' ' << q.y << ' ' << (q.target ? 1 : 0) << '\n';
    out << "end\n";
  }
}

namespace {

[[noreturn]] void bad_script(const std::string& what) {
  throw std::runtime_error("episode script file: " + what);
}

std::string expect_word(std::istream& in, const char* word) {
  std::string w;
  if (!(in >> w) || w != word) bad_script(std::string("expected '") + word + "', got '" + w + "'");
  return w;
}

}  // namespace

std::vector<EpisodeScript> read_episode_scripts(std::istream& in) {
  std::string word;
  int version = 0;
  if (!(in >> word >> version) || word != "wmg-pathfinding-scripts" || version != 1) {
    bad_script("unrecognized header");
  }
  std::size_t count = 0, steps = 0, d = 0, n = 0;
  expect_word(in, "count");
  in >> count;
  expect_word(in, "steps");
  in >> steps;
  expect_word(in, "pattern_size");
  in >> d;
  expect_word(in, "max_graph_size");
  in >> n;
  if (!in) bad_script("malformed header fields");
  if (count > 0 && (n < 2 || steps != 2 * (n - 1))) bad_script("inconsistent steps and graph size");

  std::vector<EpisodeScript> scripts;
  scripts.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    EpisodeScript s;
    s.pattern_size = d;
    s.max_graph_size = n;
    std::size_t index = 0;
    expect_word(in, "episode");
    in >> index;
    expect_word(in, "seed");
    in >> s.seed;
    if (!in || index != i) bad_script("episode " + std::to_string(i) + " out of order");
    for (std::size_t k = 0; k < n; ++k) {
      expect_word(in, "pattern");
      std::vector<double> p(d);
      for (double& v : p) {
        std::string tok;
        in >> tok;
        v = std::strtod(tok.c_str(), nullptr);
      }
      s.patterns.push_back(std::move(p));
    }
    for (std::size_t k = 0; k + 1 < n; ++k) {
      expect_word(in, "link");
      EpisodeScript::Link l{};
      in >> l.parent >> l.child;
      s.links.push_back(l);
    }
    for (std::size_t k = 0; k + 1 < n; ++k) {
      expect_word(in, "quiz");
      EpisodeScript::Quiz q{};
      int target = 0;
      in >> q.x >> q.y >> target;
      q.target = target != 0;
      s.quizzes.push_back(q);
    }
    expect_word(in, "end");
    if (!in) bad_script("truncated episode " + std::to_string(i));
    scripts.push_back(std::move(s));
  }
  return scripts;
}

void save_episode_scripts(const std::filesystem::path& path,
                          const std::vector<EpisodeScript>& scripts) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write_episode_scripts(out, scripts);
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

std::vector<EpisodeScript> load_episode_scripts(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return read_episode_scripts(in);
}

}  // namespace wmg
