#include "wmg/dgd.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <limits>
#include <numeric>
#include <queue>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <unistd.h>

#include "wmg/text.hpp"

namespace wmg {

namespace {

constexpr double kFailed = -std::numeric_limits<double>::infinity();

bool succeeded(double metric) { return std::isfinite(metric); }

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

// ---------------------------------------------------------------------------
// HyperGrid

HyperGrid::HyperGrid(std::vector<HyperParameter> params) : params_(std::move(params)) {
  std::set<std::string> names;
  for (const auto& p : params_) {
    if (p.name.empty()) throw std::invalid_argument("hyperparameter with an empty name");
    if (!names.insert(p.name).second) throw std::invalid_argument("duplicate hyperparameter '" + p.name + "'");
    if (p.values.empty()) throw std::invalid_argument("hyperparameter '" + p.name + "' has no values");
    std::set<std::string> seen;
    for (const auto& v : p.values) {
      if (v.empty()) throw std::invalid_argument("hyperparameter '" + p.name + "' has an empty value");
      if (!seen.insert(v).second) {
        throw std::invalid_argument("hyperparameter '" + p.name + "' lists '" + v + "' twice");
      }
    }
  }
}

HyperGrid HyperGrid::parse(std::istream& in) {
  std::vector<HyperParameter> params;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = trim(raw);
    if (line.empty() || line[0] == '#' || line[0] == '%' || line[0] == '\\') continue;
    const auto amp = line.find('&');
    if (amp == std::string::npos) {
      throw std::invalid_argument("grid line " + std::to_string(line_no) + ": expected 'name & values'");
    }
    HyperParameter p;
    p.name = canonical_name(line.substr(0, amp));
    std::string rest = trim(line.substr(amp + 1));
    if (rest.size() >= 2 && rest.compare(rest.size() - 2, 2, "\\\\") == 0) {
      rest = trim(rest.substr(0, rest.size() - 2));
    }
    for (const auto& v : split(rest, ',')) p.values.push_back(trim(v));
    params.push_back(std::move(p));
  }
  if (params.empty()) throw std::invalid_argument("grid file lists no hyperparameters");
  return HyperGrid(std::move(params));
}

HyperGrid HyperGrid::load(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot open grid file " + file.string());
  return parse(in);
}

void HyperGrid::write(std::ostream& out) const {
  for (const auto& p : params_) {
    out << p.name << " & ";
    for (std::size_t i = 0; i < p.values.size(); ++i) out << (i ? ", " : "") << p.values[i];
    out << " \\\\\n";
  }
}

std::string HyperGrid::to_string() const {
  std::ostringstream out;
  write(out);
  return out.str();
}

std::size_t HyperGrid::point_count() const {
  std::size_t n = params_.empty() ? 0 : 1;
  for (const auto& p : params_) n *= p.values.size();
  return n;
}

bool HyperGrid::valid(const Configuration& c) const {
  if (c.size() != params_.size()) return false;
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (c[i] >= params_[i].values.size()) return false;
  }
  return true;
}

Configuration HyperGrid::random_configuration(Rng& rng) const {
  Configuration c(params_.size());
  for (std::size_t i = 0; i < c.size(); ++i) c[i] = rng.index(params_[i].values.size());
  return c;
}

std::vector<std::pair<std::string, std::string>> HyperGrid::settings(const Configuration& c) const {
  if (!valid(c)) throw std::invalid_argument("configuration does not fit the grid");
  std::vector<std::pair<std::string, std::string>> out;
  for (std::size_t i = 0; i < c.size(); ++i) out.emplace_back(params_[i].name, params_[i].values[c[i]]);
  return out;
}

std::optional<Configuration> HyperGrid::configuration(
    std::span<const std::pair<std::string, std::string>> settings) const {
  if (settings.size() != params_.size()) return std::nullopt;
  Configuration c(params_.size(), 0);
  std::vector<char> assigned(params_.size(), 0);
  for (const auto& [name, value] : settings) {
    const std::string key = canonical_name(name);
    auto it = std::find_if(params_.begin(), params_.end(), [&](const auto& p) { return p.name == key; });
    if (it == params_.end()) return std::nullopt;
    const std::size_t i = static_cast<std::size_t>(it - params_.begin());
    auto v = std::find(it->values.begin(), it->values.end(), value);
    if (v == it->values.end() || assigned[i]) return std::nullopt;
    c[i] = static_cast<std::size_t>(v - it->values.begin());
    assigned[i] = 1;
  }
  return c;
}

std::string HyperGrid::describe(const Configuration& c) const {
  std::string out;
  for (const auto& [name, value] : settings(c)) {
    if (!out.empty()) out += ", ";
    out += name + "=" + value;
  }
  return out;
}

bool operator==(const HyperGrid& a, const HyperGrid& b) {
  if (a.params_.size() != b.params_.size()) return false;
  for (std::size_t i = 0; i < a.params_.size(); ++i) {
    if (a.params_[i].name != b.params_[i].name || a.params_[i].values != b.params_[i].values) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Run sets

double RunSet::metric(Aggregate aggregate) const {
  if (metrics.empty()) return kFailed;
  if (aggregate == Aggregate::Mean) {
    return std::accumulate(metrics.begin(), metrics.end(), 0.0) / static_cast<double>(metrics.size());
  }
  std::vector<double> sorted = metrics;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  return n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
}

std::map<Configuration, RunSet> group_runs(std::span<const RunResult> results) {
  std::map<Configuration, RunSet> sets;
  for (const auto& r : results) {
    RunSet& s = sets[r.config];
    s.config = r.config;
    if (succeeded(r.metric)) {
      s.metrics.push_back(r.metric);
    } else {
      ++s.failures;
    }
  }
  // Sorted so sums do not depend on the order results arrived in.
  for (auto& [config, s] : sets) std::sort(s.metrics.begin(), s.metrics.end());
  return sets;
}

std::vector<Configuration> neighborhood(const HyperGrid& grid, const Configuration& center) {
  if (!grid.valid(center)) throw std::invalid_argument("neighborhood: center does not fit the grid");
  std::vector<Configuration> out{center};
  for (std::size_t i = 0; i < center.size(); ++i) {
    if (center[i] > 0) {
      Configuration c = center;
      --c[i];
      out.push_back(std::move(c));
    }
    if (center[i] + 1 < grid[i].values.size()) {
      Configuration c = center;
      ++c[i];
      out.push_back(std::move(c));
    }
  }
  return out;
}

std::optional<SamplingPlan> sampling_plan(std::span<const RunResult> results, const HyperGrid& grid,
                                          Aggregate aggregate) {
  const auto sets = group_runs(results);
  const RunSet* best = nullptr;
  double best_metric = kFailed;
  for (const auto& [config, set] : sets) {
    const double m = set.metric(aggregate);
    if (!succeeded(m)) continue;
    // Map order is lexicographic, so strict comparisons keep the smaller
    // configuration on full ties.
    if (!best || m > best_metric || (m == best_metric && set.count() > best->count())) {
      best = &set;
      best_metric = m;
    }
  }
  if (!best) return std::nullopt;

  SamplingPlan plan;
  plan.center = best->config;
  plan.members = neighborhood(grid, best->config);
  std::size_t max_count = 0;
  for (const auto& m : plan.members) {
    auto it = sets.find(m);
    plan.counts.push_back(it == sets.end() ? 0 : it->second.count());
    max_count = std::max(max_count, plan.counts.back());
  }
  const double big_m = static_cast<double>(max_count + 1);
  for (std::size_t c : plan.counts) plan.weights.push_back(big_m - static_cast<double>(c));
  return plan;
}

Configuration sample_next_config(std::span<const RunResult> results, const HyperGrid& grid, Rng& rng,
                                 Aggregate aggregate) {
  if (grid.size() == 0) throw std::invalid_argument("sample_next_config: empty grid");
  const auto plan = sampling_plan(results, grid, aggregate);
  if (!plan) return grid.random_configuration(rng);
  return plan->members[rng.categorical(plan->weights)];
}

std::optional<Selection> select_best(std::span<const RunResult> results, double prior_strength,
                                     Aggregate aggregate) {
  if (prior_strength < 0) throw std::invalid_argument("select_best: prior strength must be >= 0");
  const auto sets = group_runs(results);
  double total = 0.0;
  std::size_t n = 0;
  for (const auto& [config, set] : sets) {
    for (double m : set.metrics) total += m;
    n += set.metrics.size();
  }
  if (n == 0) return std::nullopt;
  const double global_mean = total / static_cast<double>(n);

  std::optional<Selection> best;
  for (const auto& [config, set] : sets) {
    if (set.metrics.empty()) continue;
    Selection s;
    s.config = config;
    s.count = set.metrics.size();
    s.metric = set.metric(aggregate);
    const double count = static_cast<double>(s.count);
    s.score = (count * s.metric + prior_strength * global_mean) / (count + prior_strength);
    if (!best || s.score > best->score || (s.score == best->score && s.count > best->count)) best = s;
  }
  return best;
}

// ---------------------------------------------------------------------------
// Store

namespace {

template <typename F>
auto with_retries(int attempts, int backoff_ms, F&& f) -> decltype(f()) {
  for (int i = 1;; ++i) {
    try {
      return f();
    } catch (const std::exception&) {
      if (i >= attempts) throw;
      std::this_thread::sleep_for(std::chrono::milliseconds(backoff_ms << (i - 1)));
    }
  }
}

void check_worker_id(const std::string& id) {
  if (id.empty()) throw std::invalid_argument("worker id must not be empty");
  for (char c : id) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.')) {
      throw std::invalid_argument("worker id '" + id + "' may only contain letters, digits, '-', '_' and '.'");
    }
  }
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

std::string iso_timestamp_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string format_record(const RunResult& r, const HyperGrid& grid) {
  char metric[40];
  if (succeeded(r.metric)) {
    std::snprintf(metric, sizeof metric, "%.17g", r.metric);
  } else {
    std::snprintf(metric, sizeof metric, "-inf");
  }
  std::string line = r.run_id + '\t' + r.worker_id + '\t' + r.timestamp + '\t' + metric;
  for (const auto& [name, value] : grid.settings(r.config)) line += '\t' + name + '=' + value;
  return line;
}

std::optional<RunResult> parse_record(const std::string& line, const HyperGrid& grid) {
  const auto fields = split(line, '\t');
  if (fields.size() < 4) return std::nullopt;
  RunResult r;
  r.run_id = fields[0];
  r.worker_id = fields[1];
  r.timestamp = fields[2];
  if (fields[3] == "-inf") {
    r.metric = kFailed;
  } else {
    try {
      r.metric = parse_double(fields[3], "metric");
    } catch (const std::invalid_argument&) {
      return std::nullopt;
    }
  }
  std::vector<std::pair<std::string, std::string>> settings;
  for (std::size_t i = 4; i < fields.size(); ++i) {
    const auto eq = fields[i].find('=');
    if (eq == std::string::npos) return std::nullopt;
    settings.emplace_back(fields[i].substr(0, eq), fields[i].substr(eq + 1));
  }
  auto config = grid.configuration(settings);
  if (!config) return std::nullopt;
  r.config = std::move(*config);
  return r;
}

ResultStore::ResultStore(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::filesystem::create_directories(dir_);
}

void ResultStore::append(const std::string& worker_id, const RunResult& result, const HyperGrid& grid) {
  check_worker_id(worker_id);
  const std::string line = format_record(result, grid) + '\n';
  const std::filesystem::path file = dir_ / (worker_id + ".log");
  const std::filesystem::path tmp = dir_ / (worker_id + ".log.tmp." + std::to_string(::getpid()));
  with_retries(retries, backoff_ms, [&] {
    std::string content = std::filesystem::exists(file) ? read_file(file) : std::string();
    if (!content.empty() && content.back() != '\n') content.push_back('\n');
    content += line;
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) throw std::runtime_error("cannot write " + tmp.string());
      out << content;
      out.flush();
      if (!out) throw std::runtime_error("failed writing " + tmp.string());
    }
    std::filesystem::rename(tmp, file);
    return 0;
  });
}

std::vector<RunResult> ResultStore::read(const HyperGrid& grid) const {
  return with_retries(retries, backoff_ms, [&] {
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir_)) {
      if (entry.is_regular_file() && entry.path().extension() == ".log") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    std::vector<RunResult> results;
    for (const auto& f : files) {
      std::string content;
      try {
        content = read_file(f);
      } catch (const std::runtime_error&) {
        continue;  // renamed away between listing and opening
      }
      std::size_t start = 0;
      for (;;) {
        const std::size_t nl = content.find('\n', start);
        if (nl == std::string::npos) break;  // unterminated tail
        if (auto r = parse_record(content.substr(start, nl - start), grid)) results.push_back(std::move(*r));
        start = nl + 1;
      }
    }
    return results;
  });
}

bool ResultStore::empty() const {
  for (const auto& entry : std::filesystem::directory_iterator(dir_)) {
    if (entry.is_regular_file() && entry.path().extension() == ".log") return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Worker

WorkerReport worker_loop(const HyperGrid& grid, ResultStore& store, const Objective& objective,
                         const WorkerOptions& options, const std::atomic<bool>* stop) {
  check_worker_id(options.worker_id);
  Rng rng = Rng::substream(options.seed, fnv1a(options.worker_id));
  WorkerReport report;
  std::optional<Configuration> previous_best;
  for (std::size_t i = 0; i < options.budget; ++i) {
    if (stop && stop->load()) break;
    std::vector<RunResult> results = store.read(grid);
    const Configuration config = sample_next_config(results, grid, rng, options.aggregate);
    const std::uint64_t run_seed = rng.next_u64();

    double metric = kFailed;
    try {
      metric = objective(config, run_seed);
    } catch (const std::exception&) {
    }
    if (!succeeded(metric)) {
      metric = kFailed;
      ++report.failures;
    }

    std::size_t mine = 0;
    for (const auto& r : results) mine += r.worker_id == options.worker_id;
    RunResult result;
    result.config = config;
    result.metric = metric;
    result.worker_id = options.worker_id;
    result.run_id = options.worker_id + "-" + std::to_string(mine + 1);
    result.timestamp = iso_timestamp_now();
    store.append(options.worker_id, result, grid);
    results.push_back(result);
    ++report.runs;

    report.best = select_best(results, options.prior_strength, options.aggregate);
    if (report.best && previous_best && report.best->config == *previous_best) {
      ++report.stable_runs;
    } else {
      report.stable_runs = 0;
    }
    previous_best = report.best ? std::optional<Configuration>(report.best->config) : std::nullopt;
    report.converged = report.stable_runs >= options.convergence_window;
    if (report.converged && options.stop_on_convergence) break;
  }
  return report;
}

Configuration synthetic_optimum(const HyperGrid& grid) {
  Configuration o(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) o[i] = 2 * grid[i].values.size() / 3;
  return o;
}

double synthetic_objective(const HyperGrid& grid, const Configuration& config) {
  if (!grid.valid(config)) throw std::invalid_argument("synthetic_objective: configuration off the grid");
  const Configuration o = synthetic_optimum(grid);
  double loss = 0.0;
  for (std::size_t i = 0; i < config.size(); ++i) {
    const double d = (static_cast<double>(config[i]) - static_cast<double>(o[i])) /
                     static_cast<double>(grid[i].values.size());
    loss += d * d;
  }
  return 1.0 - loss;
}

std::vector<RunResult> simulate_search(const HyperGrid& grid, const Objective& objective,
                                       std::size_t workers, std::size_t runs_per_worker,
                                       std::uint64_t seed, Aggregate aggregate) {
  struct Pending {
    double finish;
    std::size_t worker;
    RunResult result;
  };
  auto later = [](const Pending& a, const Pending& b) {
    return a.finish != b.finish ? a.finish > b.finish : a.worker > b.worker;
  };
  std::priority_queue<Pending, std::vector<Pending>, decltype(later)> running(later);
  Rng durations = Rng::substream(seed, 0);
  std::vector<Rng> rngs;
  std::vector<std::size_t> started(workers, 0);
  for (std::size_t w = 0; w < workers; ++w) rngs.push_back(Rng::substream(seed, w + 1));

  std::vector<RunResult> done;
  auto launch = [&](std::size_t w, double now) {
    RunResult r;
    r.config = sample_next_config(done, grid, rngs[w], aggregate);
    const std::uint64_t run_seed = rngs[w].next_u64();
    try {
      r.metric = objective(r.config, run_seed);
    } catch (const std::exception&) {
      r.metric = kFailed;
    }
    if (!succeeded(r.metric)) r.metric = kFailed;
    r.worker_id = "sim" + std::to_string(w);
    r.run_id = r.worker_id + "-" + std::to_string(++started[w]);
    running.push({now + durations.uniform_range(1.0, 2.0), w, std::move(r)});
  };

  for (std::size_t w = 0; w < workers; ++w) {
    if (runs_per_worker > 0) launch(w, 0.0);
  }
  while (!running.empty()) {
    Pending p = running.top();
    running.pop();
    done.push_back(std::move(p.result));
    if (started[p.worker] < runs_per_worker) launch(p.worker, p.finish);
  }
  return done;
}

}  // namespace wmg
