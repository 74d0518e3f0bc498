#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wmg/rng.hpp"

namespace wmg {

struct HyperParameter {
  std::string name;                 ///< canonical name
  std::vector<std::string> values;  ///< ordered, as written in the grid file
};

/// One index per hyperparameter of the grid.
using Configuration = std::vector<std::size_t>;

/// Discrete ordered hyperparameter grid.
///
/// Grid files use the table syntax `Name & v1, v2, v3 \\`, one hyperparameter
/// per line. Blank lines, lines starting with `#` or `%`, and LaTeX lines
/// starting with a backslash (\hline, \begin{...}) are skipped.
class HyperGrid {
 public:
  HyperGrid() = default;
  explicit HyperGrid(std::vector<HyperParameter> params);

  static HyperGrid parse(std::istream& in);
  static HyperGrid load(const std::filesystem::path& file);
  void write(std::ostream& out) const;
  std::string to_string() const;

  std::size_t size() const { return params_.size(); }
  const HyperParameter& operator[](std::size_t i) const { return params_[i]; }
  const std::vector<HyperParameter>& params() const { return params_; }
  /// Number of grid points.
  std::size_t point_count() const;

  bool valid(const Configuration& c) const;
  Configuration random_configuration(Rng& rng) const;
  /// name=value pairs of a configuration.
  std::vector<std::pair<std::string, std::string>> settings(const Configuration& c) const;
  /// Inverse of settings(); nullopt if a name or value is not on the grid.
  std::optional<Configuration> configuration(
      std::span<const std::pair<std::string, std::string>> settings) const;
  std::string describe(const Configuration& c) const;

  friend bool operator==(const HyperGrid& a, const HyperGrid& b);

 private:
  std::vector<HyperParameter> params_;
};

struct RunResult {
  Configuration config;
  double metric = 0.0;  ///< -inf marks a failed run
  std::string run_id;
  std::string worker_id;
  std::string timestamp;
};

enum class Aggregate { Mean, Median };

struct RunSet {
  Configuration config;
  std::vector<double> metrics;  ///< finite metrics only
  std::size_t failures = 0;

  /// All runs with this configuration, failed ones included.
  std::size_t count() const { return metrics.size() + failures; }
  /// -inf when no run succeeded.
  double metric(Aggregate aggregate = Aggregate::Mean) const;
};

std::map<Configuration, RunSet> group_runs(std::span<const RunResult> results);

/// Center first, then each one-step move (down before up, parameters in grid
/// order). Moves past either end of a value list are dropped.
std::vector<Configuration> neighborhood(const HyperGrid& grid, const Configuration& center);

struct SamplingPlan {
  Configuration center;
  std::vector<Configuration> members;
  std::vector<std::size_t> counts;
  std::vector<double> weights;  ///< M - Count(x), M = max count + 1
};

/// Neighborhood of the run set with the highest Metric and its sampling
/// weights; nullopt when no run has succeeded yet.
std::optional<SamplingPlan> sampling_plan(std::span<const RunResult> results, const HyperGrid& grid,
                                          Aggregate aggregate = Aggregate::Mean);

/// Uniform over the grid without results, otherwise a draw from sampling_plan().
Configuration sample_next_config(std::span<const RunResult> results, const HyperGrid& grid, Rng& rng,
                                 Aggregate aggregate = Aggregate::Mean);

struct Selection {
  Configuration config;
  std::size_t count = 0;  ///< successful runs
  double metric = 0.0;
  double score = 0.0;
};

inline constexpr double kDefaultPriorStrength = 5.0;

/// Run set maximizing (Count·Metric + k·global_mean) / (Count + k), where the
/// global mean is over all successful runs. Ties go to the higher Count, then
/// the lexicographically smaller configuration. nullopt without successes.
std::optional<Selection> select_best(std::span<const RunResult> results,
                                     double prior_strength = kDefaultPriorStrength,
                                     Aggregate aggregate = Aggregate::Mean);

// ---------------------------------------------------------------------------
// Shared result store

/// Directory of append-only per-worker logs (`<worker>.log`). Each line is
/// tab separated: run id, worker id, ISO-8601 UTC timestamp, metric, then
/// name=value pairs. Appends rewrite the worker's file to a temporary name and
/// rename it into place, so readers see either the old or the new file.
class ResultStore {
 public:
  explicit ResultStore(std::filesystem::path dir);

  const std::filesystem::path& dir() const { return dir_; }

  void append(const std::string& worker_id, const RunResult& result,
              const HyperGrid& grid);
  /// All records whose settings lie on `grid`; unreadable or foreign lines
  /// are skipped. Results are ordered by file name, then line.
  std::vector<RunResult> read(const HyperGrid& grid) const;
  bool empty() const;

  /// Attempts for each I/O operation before giving up.
  int retries = 5;
  int backoff_ms = 20;

 private:
  std::filesystem::path dir_;
};

std::string format_record(const RunResult& result, const HyperGrid& grid);
std::optional<RunResult> parse_record(const std::string& line, const HyperGrid& grid);
std::string iso_timestamp_now();

// ---------------------------------------------------------------------------
// Worker

/// Metric of one training run. Exceptions are logged as failed runs.
using Objective = std::function<double(const Configuration& config, std::uint64_t run_seed)>;

struct WorkerOptions {
  std::string worker_id = "worker";
  std::size_t budget = 0;  ///< runs to perform
  std::size_t convergence_window = 50;
  bool stop_on_convergence = false;
  double prior_strength = kDefaultPriorStrength;
  Aggregate aggregate = Aggregate::Mean;
  std::uint64_t seed = 0;
};

struct WorkerReport {
  std::size_t runs = 0;
  std::size_t failures = 0;
  std::optional<Selection> best;
  /// Consecutive runs after which select_best returned the same configuration.
  std::size_t stable_runs = 0;
  bool converged = false;
};

WorkerReport worker_loop(const HyperGrid& grid, ResultStore& store, const Objective& objective,
                         const WorkerOptions& options, const std::atomic<bool>* stop = nullptr);

/// Deterministic unimodal test objective over any grid: 1 - Σ ((c_i - o_i) / n_i)²
/// with optimum o_i = floor(2 n_i / 3).
double synthetic_objective(const HyperGrid& grid, const Configuration& config);
Configuration synthetic_optimum(const HyperGrid& grid);

/// In-memory search with `workers` workers whose runs take random durations;
/// each worker only sees results that finished before its run started.
/// Returns every result in completion order.
std::vector<RunResult> simulate_search(const HyperGrid& grid, const Objective& objective,
                                       std::size_t workers, std::size_t runs_per_worker,
                                       std::uint64_t seed, Aggregate aggregate = Aggregate::Mean);

}  // namespace wmg
