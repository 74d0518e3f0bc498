// Command-line driver: training, evaluation, oracle baselines, fixed episode
// sets and distributed hyperparameter search.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 runtime failure,
// 3 tune-report found no results.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "wmg/a3c.hpp"
#include "wmg/checkpoint.hpp"
#include "wmg/dgd.hpp"
#include "wmg/experiment_config.hpp"
#include "wmg/pathfinding.hpp"
#include "wmg/text.hpp"

namespace fs = std::filesystem;
using namespace wmg;

namespace {

constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kRuntime = 2;
constexpr int kNoResults = 3;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string pct(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", 100.0 * fraction);
  return buf;
}

void apply_overrides(ExperimentConfig& cfg, const std::vector<std::string>& sets) {
  for (const auto& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw UsageError("--set expects 'key=value', got '" + s + "'");
    try {
      apply_setting(cfg, s.substr(0, eq), s.substr(eq + 1));
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
  }
}

void validate_config(const ExperimentConfig& cfg) {
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(std::string("invalid config: ") + e.what());
  }
}

ExperimentConfig read_config(const fs::path& file) {
  try {
    return load_experiment_config(file);
  } catch (const std::invalid_argument& e) {
    throw UsageError(file.string() + ": " + e.what());
  }
}

void write_text(const fs::path& file, const std::string& text) {
  const fs::path tmp = file.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    out << text;
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
  }
  fs::rename(tmp, file);
}

void save_checkpoint(const fs::path& dir, Agent& agent, const Trainer& trainer,
                     const ExperimentConfig& cfg) {
  fs::create_directories(dir);
  save_parameters(agent.parameters(), dir);
  write_text(dir / "config.cfg", format_experiment_config(cfg));
  save_trainer_state(trainer.state(), dir / "trainer_state.txt");
}

// Drops metric rows written after the checkpoint being resumed from.
void truncate_metrics(const fs::path& file, std::uint64_t env_steps) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot read " + file.string());
  std::string out, line;
  bool header = true;
  while (std::getline(in, line)) {
    if (!header) {
      const std::uint64_t steps = std::stoull(line.substr(0, line.find(',')));
      if (steps > env_steps) break;
    }
    header = false;
    out += line + '\n';
  }
  in.close();
  write_text(file, out);
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string config;
  std::string resume;
  std::string out;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> total_steps;
  std::optional<std::uint64_t> seed;
  bool no_wall_time = false;
};

int cmd_train(const TrainArgs& a) {
  ExperimentConfig cfg;
  fs::path out_dir;
  if (!a.resume.empty()) {
    out_dir = a.resume;
    cfg = read_config(out_dir / "checkpoint" / "config.cfg");
  } else if (!a.config.empty()) {
    cfg = read_config(a.config);
  } else {
    throw UsageError("train needs --config or --resume");
  }
  apply_overrides(cfg, a.sets);
  if (a.total_steps) cfg.train.total_steps = *a.total_steps;
  if (a.seed) cfg.train.seed = *a.seed;
  if (!a.out.empty()) out_dir = a.out;
  if (out_dir.empty()) out_dir = cfg.output_dir;
  if (out_dir.empty()) throw UsageError("no output directory: pass --out or set 'Output directory'");
  cfg.output_dir = out_dir.string();
  cfg.train.record_wall_time = !a.no_wall_time;
  validate_config(cfg);

  fs::create_directories(out_dir);
  const fs::path metrics_file = out_dir / "metrics.csv";
  const fs::path ckpt = out_dir / "checkpoint";

  auto agent = make_agent(cfg);
  PathfindingEnv env = make_environment(cfg);
  Trainer trainer(*agent, env, cfg.train);

  if (!a.resume.empty()) {
    load_parameters(agent->parameters(), ckpt);
    trainer.restore(load_trainer_state(ckpt / "trainer_state.txt"));
    truncate_metrics(metrics_file, trainer.state().env_steps);
  } else {
    write_text(metrics_file, std::string(kMetricsHeader) + '\n');
  }

  std::ofstream metrics(metrics_file, std::ios::app);
  if (!metrics) throw std::runtime_error("cannot append to " + metrics_file.string());
  std::optional<MetricsRow> last;
  trainer.run(
      [&](const MetricsRow& row) {
        metrics << format_metrics_row(row) << '\n';
        metrics.flush();
        last = row;
      },
      [&](std::uint64_t) { save_checkpoint(ckpt, *agent, trainer, cfg); });
  save_checkpoint(ckpt, *agent, trainer, cfg);

  const TrainerState& s = trainer.state();
  std::cout << "summary model=" << to_string(cfg.model) << " env_steps=" << s.env_steps
            << " episodes=" << s.episodes << " final_window_quiz_reward_pct="
            << (last ? pct(last->quiz_reward_pct / 100.0) : std::string("-"))
            << " tail_quiz_reward_pct=" << pct(trainer.tail_quiz_fraction()) << " params="
            << agent->parameters().scalar_count() << '\n';
  return kOk;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string checkpoint;
  std::string scripts;
  std::optional<std::size_t> oracle_depth;
  bool sample = false;
  std::uint64_t seed = 0;
};

int cmd_eval(const EvalArgs& a) {
  const std::vector<EpisodeScript> scripts = load_episode_scripts(a.scripts);
  if (scripts.empty()) throw UsageError("script file " + a.scripts + " holds no episodes");
  const std::size_t d = scripts.front().pattern_size;

  EvalResult r;
  if (a.oracle_depth) {
    if (*a.oracle_depth < 1) throw UsageError("--oracle-depth must be >= 1");
    OracleActor oracle(*a.oracle_depth, d);
    r = evaluate(oracle, scripts);
  } else {
    if (a.checkpoint.empty()) throw UsageError("eval needs --checkpoint or --oracle-depth");
    const fs::path dir = a.checkpoint;
    ExperimentConfig cfg = read_config(dir / "config.cfg");
    if (cfg.pattern_size != d) {
      throw UsageError("checkpoint expects pattern size " + std::to_string(cfg.pattern_size) +
                       " but the scripts use " + std::to_string(d));
    }
    auto agent = make_agent(cfg);
    load_parameters(agent->parameters(), dir);
    AgentActor actor(*agent, !a.sample, a.seed);
    r = evaluate(actor, scripts);
  }
  std::cout << "eval episodes=" << scripts.size() << " quiz_steps=" << r.quiz_steps
            << " reward_pct=" << pct(r.fraction()) << " se_pct=" << pct(r.standard_error()) << '\n';
  return kOk;
}

struct OracleArgs {
  std::size_t depth = 0;
  std::size_t episodes = 100000;
  std::size_t pattern_size = 7;
  std::size_t graph_size = 7;
  std::optional<std::size_t> steps;
  std::uint64_t seed = 0;
};

int cmd_oracle(const OracleArgs& a) {
  if (a.depth < 1) throw UsageError("--depth must be >= 1");
  if (a.graph_size < 2) throw UsageError("-N must be >= 2");
  if (a.steps && *a.steps != 2 * (a.graph_size - 1)) {
    throw UsageError("--steps must equal 2(N-1) = " + std::to_string(2 * (a.graph_size - 1)));
  }
  PathfindingEnv env(a.pattern_size, a.graph_size, a.seed);
  OracleActor oracle(a.depth, a.pattern_size);
  const EvalResult r = evaluate_live(oracle, env, a.episodes);
  std::cout << "oracle depth=" << a.depth << " episodes=" << a.episodes << " quiz_steps=" << r.quiz_steps
            << " reward_pct=" << pct(r.fraction()) << " se_pct=" << pct(r.standard_error()) << '\n';
  return kOk;
}

struct GenArgs {
  std::size_t count = 1000;
  std::size_t steps = 24;
  std::size_t pattern_size = 7;
  std::uint64_t seed = 0;
  std::string out;
};

int cmd_gen_scripts(const GenArgs& a) {
  if (a.steps < 2 || a.steps % 2) throw UsageError("--steps must be even and >= 2");
  save_episode_scripts(a.out, generate_episode_scripts(a.count, a.steps, a.pattern_size, a.seed));
  std::cout << "wrote " << a.count << " episodes of " << a.steps << " steps to " << a.out << '\n';
  return kOk;
}

// ---------------------------------------------------------------------------

std::string store_dir(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("WMG_STORE_DIR"); env && *env) return env;
  throw UsageError("no store directory: pass --store or set WMG_STORE_DIR");
}

HyperGrid read_grid(const std::string& file) {
  try {
    return HyperGrid::load(file);
  } catch (const std::invalid_argument& e) {
    throw UsageError(file + ": " + e.what());
  }
}

void print_selection(const HyperGrid& grid, const Selection& s) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "count=%zu metric=%.6f score=%.6f", s.count, s.metric, s.score);
  std::cout << "best " << buf << '\n';
  for (const auto& [name, value] : grid.settings(s.config)) std::cout << "  " << name << " = " << value << '\n';
}

struct TuneArgs {
  std::string grid;
  std::string store;
  std::string config;
  std::string objective = "train";
  std::string worker_id = "worker0";
  std::uint64_t run_steps = 1000000;
  std::size_t runs = 1;
  std::size_t window = 50;
  bool stop_on_convergence = false;
  double prior_strength = kDefaultPriorStrength;
  bool median = false;
  std::uint64_t seed = 0;
};

int cmd_tune_worker(const TuneArgs& a) {
  const HyperGrid grid = read_grid(a.grid);
  ResultStore store(store_dir(a.store));

  Objective objective;
  if (a.objective == "synthetic") {
    objective = [&grid](const Configuration& c, std::uint64_t) { return synthetic_objective(grid, c); };
  } else if (a.objective == "train") {
    ExperimentConfig base = a.config.empty() ? ExperimentConfig{} : read_config(a.config);
    // Reject grids naming keys the config schema does not know before any run starts.
    for (const auto& p : grid.params()) {
      ExperimentConfig probe = base;
      try {
        apply_setting(probe, p.name, p.values.front());
      } catch (const std::invalid_argument& e) {
        throw UsageError("grid: " + std::string(e.what()));
      }
    }
    objective = [&grid, base, steps = a.run_steps](const Configuration& c, std::uint64_t run_seed) {
      ExperimentConfig cfg = base;
      for (const auto& [name, value] : grid.settings(c)) apply_setting(cfg, name, value);
      cfg.train.total_steps = steps;
      cfg.train.seed = run_seed;
      cfg.train.checkpoint_interval = 0;
      cfg.validate();
      auto agent = make_agent(cfg);
      PathfindingEnv env = make_environment(cfg);
      Trainer trainer(*agent, env, cfg.train);
      trainer.run({});
      return trainer.tail_quiz_fraction();
    };
  } else {
    throw UsageError("--objective must be 'train' or 'synthetic'");
  }

  WorkerOptions opt;
  opt.worker_id = a.worker_id;
  opt.budget = a.runs;
  opt.convergence_window = a.window;
  opt.stop_on_convergence = a.stop_on_convergence;
  opt.prior_strength = a.prior_strength;
  opt.aggregate = a.median ? Aggregate::Median : Aggregate::Mean;
  opt.seed = a.seed;
  const WorkerReport report = worker_loop(grid, store, objective, opt);
  std::cout << "worker " << a.worker_id << " runs=" << report.runs << " failures=" << report.failures
            << " stable_runs=" << report.stable_runs << " converged=" << (report.converged ? "yes" : "no")
            << '\n';
  if (report.best) print_selection(grid, *report.best);
  return kOk;
}

int cmd_tune_report(const TuneArgs& a) {
  const HyperGrid grid = read_grid(a.grid);
  const fs::path dir = store_dir(a.store);
  if (fs::exists(dir) && !fs::is_directory(dir))
    throw std::runtime_error("store " + dir.string() + " is not a directory");
  std::vector<RunResult> results;
  if (fs::exists(dir)) results = ResultStore(dir).read(grid);
  const auto best = select_best(results, a.prior_strength, a.median ? Aggregate::Median : Aggregate::Mean);
  if (!best) {
    std::cout << "no results in " << dir.string() << '\n';
    return kNoResults;
  }
  std::size_t failures = 0;
  for (const auto& r : results) failures += std::isfinite(r.metric) ? 0 : 1;
  std::cout << "runs=" << results.size() << " failures=" << failures
            << " run_sets=" << group_runs(results).size() << '\n';
  print_selection(grid, *best);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Working Memory Graph experiments on the Pathfinding task"};
  app.require_subcommand(1);

  TrainArgs train;
  auto* t = app.add_subcommand("train", "Train an agent with A3C");
  t->add_option("-c,--config", train.config, "Experiment config file");
  t->add_option("--resume", train.resume, "Continue the run stored in this output directory");
  t->add_option("-o,--out", train.out, "Output directory (metrics.csv, checkpoint/)");
  t->add_option("-s,--set", train.sets, "Override a config key: 'key=value'");
  t->add_option("--total-steps", train.total_steps, "Environment steps to train for");
  t->add_option("--seed", train.seed, "Random seed");
  t->add_flag("--no-wall-time", train.no_wall_time, "Write 0 in the wall_secs column");

  EvalArgs eval;
  auto* e = app.add_subcommand("eval", "Evaluate a checkpoint or oracle on a fixed episode set");
  e->add_option("--checkpoint", eval.checkpoint, "Checkpoint directory");
  e->add_option("--scripts", eval.scripts, "Episode script file")->required();
  e->add_option("--oracle-depth", eval.oracle_depth, "Evaluate a Depth-n oracle instead");
  e->add_flag("--sample", eval.sample, "Sample actions instead of taking the argmax");
  e->add_option("--seed", eval.seed, "Seed for sampled actions");

  OracleArgs oracle;
  auto* o = app.add_subcommand("oracle", "Score a Depth-n oracle on freshly sampled episodes");
  o->add_option("--depth", oracle.depth, "Maximum known path length answered yes")->required();
  o->add_option("--episodes", oracle.episodes, "Episodes to play");
  o->add_option("-D,--pattern-size", oracle.pattern_size, "Pattern size D");
  o->add_option("-N,--graph-size", oracle.graph_size, "Max graph size N");
  o->add_option("--steps", oracle.steps, "Episode length, must equal 2(N-1)");
  o->add_option("--seed", oracle.seed, "Environment seed");

  GenArgs gen;
  auto* g = app.add_subcommand("gen-scripts", "Write a fixed set of episodes");
  g->add_option("--count", gen.count, "Number of episodes");
  g->add_option("--steps", gen.steps, "Steps per episode (even)");
  g->add_option("-D,--pattern-size", gen.pattern_size, "Pattern size D");
  g->add_option("--seed", gen.seed, "Seed");
  g->add_option("-o,--out", gen.out, "Output file")->required();

  TuneArgs tune;
  auto* w = app.add_subcommand("tune-worker", "Run Distributed Grid Descent runs against a shared store");
  w->add_option("--grid", tune.grid, "Grid file")->required();
  w->add_option("--store", tune.store, "Store directory (default $WMG_STORE_DIR)");
  w->add_option("-c,--config", tune.config, "Base experiment config for training runs");
  w->add_option("--objective", tune.objective, "'train' or 'synthetic'");
  w->add_option("--worker-id", tune.worker_id, "Worker name, unique per store");
  w->add_option("--run-steps", tune.run_steps, "Training steps per run");
  w->add_option("--runs", tune.runs, "Runs to perform");
  w->add_option("--convergence-window", tune.window, "Runs with an unchanged best before reporting convergence");
  w->add_flag("--stop-on-convergence", tune.stop_on_convergence, "Stop once converged");
  w->add_option("--prior-strength", tune.prior_strength, "Shrinkage strength for best-run-set selection");
  w->add_flag("--median", tune.median, "Aggregate run sets by median instead of mean");
  w->add_option("--seed", tune.seed, "Worker seed");

  TuneArgs report;
  auto* r = app.add_subcommand("tune-report", "Print the best configuration in a store");
  r->add_option("--grid", report.grid, "Grid file")->required();
  r->add_option("--store", report.store, "Store directory (default $WMG_STORE_DIR)");
  r->add_option("--prior-strength", report.prior_strength, "Shrinkage strength");
  r->add_flag("--median", report.median, "Aggregate run sets by median");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*t) return cmd_train(train);
    if (*e) return cmd_eval(eval);
    if (*o) return cmd_oracle(oracle);
    if (*g) return cmd_gen_scripts(gen);
    if (*w) return cmd_tune_worker(tune);
    if (*r) return cmd_tune_report(report);
  } catch (const UsageError& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kUsage;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kRuntime;
  }
  return kUsage;
}
