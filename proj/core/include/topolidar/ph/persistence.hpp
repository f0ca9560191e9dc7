#pragma once

#include <cstddef>
#include <iosfwd>
#include <limits>
#include <span>
#include <vector>

#include "topolidar/num/tensor.hpp"

namespace topolidar::ph {

inline constexpr std::size_t kNoVertex = std::numeric_limits<std::size_t>::max();

struct PersistencePair {
  double birth = 0.0;
  double death = std::numeric_limits<double>::infinity();
  // Endpoints of the edge whose insertion merged this component away;
  // kNoVertex for the essential pair.
  std::size_t u = kNoVertex;
  std::size_t v = kNoVertex;

  bool essential() const { return u == kNoVertex; }
};

/// 0-dimensional diagram of a Vietoris-Rips filtration. Pairs are ordered by
/// death, longest-lived first, so pairs[0] is the essential component.
struct PersistenceDiagram {
  std::vector<PersistencePair> pairs;

  /// Sum of (death - birth) over finite pairs.
  double total_persistence() const;
};

/// Union-find with path compression and union by rank.
class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n);
  std::size_t find(std::size_t x);
  /// False when x and y were already connected.
  bool unite(std::size_t x, std::size_t y);

 private:
  std::vector<std::size_t> parent_;
  std::vector<unsigned char> rank_;
};

/// Persistence of connected components for `n` points of dimension `dim`
/// stored row-major in `coords`. Every component is born at 0; deaths are
/// the minimum-spanning-tree edge lengths found by Kruskal over all pairwise
/// Euclidean distances, ties broken by (u, v) lexicographically.
PersistenceDiagram persistence_0d(std::span<const double> coords, std::size_t n, std::size_t dim);
PersistenceDiagram persistence_0d(const num::Tensor& points);  // N x D

/// CSV rows "birth,death,u,v"; the essential pair prints death "inf" and
/// endpoints -1.
void write_diagram_csv(std::ostream& os, const PersistenceDiagram& diagram);

}  // namespace topolidar::ph
