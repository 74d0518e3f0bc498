#include "wmg/depth_oracle.hpp"

#include <stdexcept>

namespace wmg {

DepthOracle::DepthOracle(std::size_t depth, std::size_t pattern_size)
    : depth_(depth), pattern_size_(pattern_size) {
  if (depth == 0) throw std::invalid_argument("DepthOracle: depth must be >= 1");
  if (pattern_size == 0) throw std::invalid_argument("DepthOracle: pattern size must be >= 1");
}

void DepthOracle::reset() {
  patterns_.clear();
  ids_.clear();
  length_.clear();
}

long DepthOracle::find(std::span<const double> pattern) const {
  auto it = ids_.find(std::vector<double>(pattern.begin(), pattern.end()));
  return it == ids_.end() ? -1 : static_cast<long>(it->second);
}

std::size_t DepthOracle::intern(std::span<const double> pattern) {
  std::vector<double> key(pattern.begin(), pattern.end());
  auto [it, inserted] = ids_.emplace(key, patterns_.size());
  if (inserted) {
    patterns_.push_back(std::move(key));
    for (auto& row : length_) row.push_back(0);
    length_.emplace_back(patterns_.size(), 0);
  }
  return it->second;
}

void DepthOracle::observe(std::span<const double> obs) {
  if (obs.size() != 2 * pattern_size_ + 1) throw std::invalid_argument("DepthOracle: bad observation size");
  if (obs.back() != 0.0) throw std::invalid_argument("DepthOracle: observe() needs a construction step");
  const std::size_t parent = intern(obs.subspan(0, pattern_size_));
  const std::size_t child = intern(obs.subspan(pattern_size_, pattern_size_));
  const std::size_t n = patterns_.size();

  // Every u reaching parent (or parent itself) now reaches every v reachable
  // from child (or child itself). In a polytree these pairs had no path before.
  std::vector<std::size_t> sources{parent};
  std::vector<std::size_t> sinks{child};
  for (std::size_t u = 0; u < n; ++u) {
    if (length_[u][parent] > 0) sources.push_back(u);
    if (length_[child][u] > 0) sinks.push_back(u);
  }
  for (std::size_t u : sources) {
    const std::size_t up = u == parent ? 0 : length_[u][parent];
    for (std::size_t v : sinks) {
      const std::size_t down = v == child ? 0 : length_[child][v];
      length_[u][v] = up + 1 + down;
    }
  }
}

int DepthOracle::answer(std::span<const double> obs) const {
  if (obs.size() != 2 * pattern_size_ + 1) throw std::invalid_argument("DepthOracle: bad observation size");
  const long x = find(obs.subspan(0, pattern_size_));
  const long y = find(obs.subspan(pattern_size_, pattern_size_));
  if (x < 0 || y < 0) return 0;
  const std::size_t len = length_[static_cast<std::size_t>(x)][static_cast<std::size_t>(y)];
  return (len > 0 && len <= depth_) ? 1 : 0;
}

int DepthOracle::act(std::span<const double> obs) {
  if (!obs.empty() && obs.back() == 1.0) return answer(obs);
  observe(obs);
  return 0;
}

std::size_t DepthOracle::path_length(std::size_t from, std::size_t to) const {
  if (from >= patterns_.size() || to >= patterns_.size()) {
    throw std::out_of_range("DepthOracle::path_length: unknown pattern id");
  }
  return length_[from][to];
}

}  // namespace wmg
