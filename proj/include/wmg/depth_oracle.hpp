#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <vector>

namespace wmg {

/// Hand-coded Pathfinding agent with perfect memory. It tracks the directed
/// path length between every pair of patterns seen so far and answers yes
/// exactly when 0 < length <= depth.
class DepthOracle {
 public:
  DepthOracle(std::size_t depth, std::size_t pattern_size);

  void reset();
  /// Registers the edge revealed by a construction observation.
  void observe(std::span<const double> construction_obs);
  /// yes (1) iff 0 < len[x][y] <= depth. Unseen patterns answer no.
  int answer(std::span<const double> quiz_obs) const;
  /// Dispatches on the quiz flag; construction steps return 0.
  int act(std::span<const double> obs);

  /// Directed path length between pattern ids; 0 means no path.
  std::size_t path_length(std::size_t from, std::size_t to) const;
  std::size_t pattern_count() const { return patterns_.size(); }
  std::size_t depth() const { return depth_; }
  /// Id of a previously seen pattern, or -1.
  long find(std::span<const double> pattern) const;

 private:
  std::size_t intern(std::span<const double> pattern);

  std::size_t depth_;
  std::size_t pattern_size_;
  std::vector<std::vector<double>> patterns_;
  std::map<std::vector<double>, std::size_t> ids_;
  std::vector<std::vector<std::size_t>> length_;
};

}  // namespace wmg
