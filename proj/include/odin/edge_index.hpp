#pragma once

#include <cmath>
#include <cstddef>
#include <utility>

#include "odin/error.hpp"

namespace odin {

// Edges of an undirected hollow graph on V nodes, enumerated row-wise over
// the strict lower triangle: (1,0),(2,0),(2,1),(3,0),... in 0-based node
// numbers, i.e. (2,1),(3,1),(3,2),(4,1),... in 1-based ones.

struct NodePair {
  std::size_t u;  // larger node index
  std::size_t v;  // smaller node index
  bool operator==(const NodePair&) const = default;
};

constexpr std::size_t edge_count(std::size_t nodes) { return nodes * (nodes - 1) / 2; }

constexpr std::size_t edge_index(std::size_t u, std::size_t v) {
  if (u < v) std::swap(u, v);
  return u * (u - 1) / 2 + v;
}

inline NodePair edge_pair(std::size_t l) {
  auto u = static_cast<std::size_t>((1.0 + std::sqrt(1.0 + 8.0 * static_cast<double>(l))) / 2.0);
  // correct for floating rounding at triangular-number boundaries
  while (u * (u - 1) / 2 > l) --u;
  while ((u + 1) * u / 2 <= l) ++u;
  return {u, l - u * (u - 1) / 2};
}

/// Node count V such that V(V-1)/2 == edges.
inline std::size_t node_count_for_edges(std::size_t edges) {
  auto v = static_cast<std::size_t>((1.0 + std::sqrt(1.0 + 8.0 * static_cast<double>(edges))) / 2.0);
  require(edge_count(v) == edges, Errc::dimension_mismatch,
          "edge count " + std::to_string(edges) + " is not V(V-1)/2 for any V");
  return v;
}

}  // namespace odin
