#pragma once

#include <cstddef>
#include <limits>
#include <utility>
#include <vector>

namespace wmg::testing {

inline constexpr std::size_t kNoPath = std::numeric_limits<std::size_t>::max();

/// Floyd-Warshall shortest directed path lengths; kNoPath when unreachable.
/// The diagonal is the shortest cycle through the node (kNoPath in a DAG).
inline std::vector<std::vector<std::size_t>> shortest_paths(
    std::size_t n, const std::vector<std::pair<std::size_t, std::size_t>>& edges) {
  std::vector<std::vector<std::size_t>> d(n, std::vector<std::size_t>(n, kNoPath));
  for (auto [u, v] : edges) d[u][v] = 1;
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t i = 0; i < n; ++i) {
      if (d[i][k] == kNoPath) continue;
      for (std::size_t j = 0; j < n; ++j) {
        if (d[k][j] == kNoPath) continue;
        d[i][j] = std::min(d[i][j], d[i][k] + d[k][j]);
      }
    }
  }
  return d;
}

/// Number of distinct directed paths between every ordered pair (DAG only).
inline std::vector<std::vector<std::size_t>> path_counts(
    std::size_t n, const std::vector<std::pair<std::size_t, std::size_t>>& edges) {
  std::vector<std::vector<std::size_t>> adj(n);
  std::vector<std::size_t> indegree(n, 0);
  for (auto [u, v] : edges) {
    adj[u].push_back(v);
    ++indegree[v];
  }
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < n; ++i) {
    if (indegree[i] == 0) order.push_back(i);
  }
  for (std::size_t k = 0; k < order.size(); ++k) {
    for (std::size_t v : adj[order[k]]) {
      if (--indegree[v] == 0) order.push_back(v);
    }
  }
  std::vector<std::vector<std::size_t>> count(n, std::vector<std::size_t>(n, 0));
  for (std::size_t s = 0; s < n; ++s) {
    count[s][s] = 1;
    for (std::size_t u : order) {
      if (count[s][u] == 0) continue;
      for (std::size_t v : adj[u]) count[s][v] += count[s][u];
    }
    count[s][s] = 0;
  }
  return count;
}

/// Undirected connectivity by union-find.
inline bool weakly_connected(std::size_t n,
                             const std::vector<std::pair<std::size_t, std::size_t>>& edges) {
  std::vector<std::size_t> parent(n);
  for (std::size_t i = 0; i < n; ++i) parent[i] = i;
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  std::size_t components = n;
  for (auto [u, v] : edges) {
    const std::size_t a = find(u), b = find(v);
    if (a != b) {
      parent[a] = b;
      --components;
    }
  }
  return components <= 1;
}

}  // namespace wmg::testing
