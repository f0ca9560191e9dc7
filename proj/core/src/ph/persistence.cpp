#include "topolidar/ph/persistence.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <ostream>

#include "topolidar/common/error.hpp"

namespace topolidar::ph {

double PersistenceDiagram::total_persistence() const {
  double s = 0.0;
  for (const auto& p : pairs)
    if (!p.essential()) s += p.death - p.birth;
  return s;
}

DisjointSets::DisjointSets(std::size_t n) : parent_(n), rank_(n, 0) {
  for (std::size_t i = 0; i < n; ++i) parent_[i] = i;
}

std::size_t DisjointSets::find(std::size_t x) {
  std::size_t root = x;
  while (parent_[root] != root) root = parent_[root];
  while (parent_[x] != root) {
    const std::size_t next = parent_[x];
    parent_[x] = root;
    x = next;
  }
  return root;
}

bool DisjointSets::unite(std::size_t x, std::size_t y) {
  x = find(x);
  y = find(y);
  if (x == y) return false;
  if (rank_[x] < rank_[y]) std::swap(x, y);
  parent_[y] = x;
  if (rank_[x] == rank_[y]) ++rank_[x];
  return true;
}

PersistenceDiagram persistence_0d(std::span<const double> coords, std::size_t n, std::size_t dim) {
  if (n == 0) throw EmptyInputError("persistence_0d: empty point set");
  if (coords.size() != n * dim) throw ShapeError("persistence_0d: coordinate buffer does not hold n x dim values");
  for (double c : coords)
    if (!std::isfinite(c)) throw NumericalError("persistence_0d: non-finite coordinate");

  struct Edge {
    double len;
    std::uint32_t u, v;  // u < v
    bool operator<(const Edge& o) const {
      if (len != o.len) return len < o.len;
      if (u != o.u) return u < o.u;
      return v < o.v;
    }
  };
  auto dist = [&](std::size_t a, std::size_t b) {
    double s = 0.0;
    for (std::size_t k = 0; k < dim; ++k) {
      const double d = coords[a * dim + k] - coords[b * dim + k];
      s += d * d;
    }
    return std::sqrt(s);
  };
  auto edge = [&](std::size_t a, std::size_t b) {
    return Edge{dist(a, b), static_cast<std::uint32_t>(std::min(a, b)), static_cast<std::uint32_t>(std::max(a, b))};
  };

  // Prim under the strict (len, u, v) order: that MST is unique, so it is the
  // one a sorted union-find sweep would pick
  std::vector<Edge> finite;
  finite.reserve(n - 1);
  std::vector<Edge> best(n);
  std::vector<char> in_tree(n, 0);
  in_tree[0] = 1;
  for (std::size_t v = 1; v < n; ++v) best[v] = edge(0, v);
  for (std::size_t it = 1; it < n; ++it) {
    std::size_t pick = n;
    for (std::size_t v = 0; v < n; ++v)
      if (!in_tree[v] && (pick == n || best[v] < best[pick])) pick = v;
    in_tree[pick] = 1;
    finite.push_back(best[pick]);
    for (std::size_t v = 0; v < n; ++v)
      if (!in_tree[v]) {
        const Edge e = edge(pick, v);
        if (e < best[v]) best[v] = e;
      }
  }
  std::sort(finite.begin(), finite.end());

  PersistenceDiagram diagram;
  diagram.pairs.reserve(n);
  diagram.pairs.push_back({});
  for (auto e = finite.rbegin(); e != finite.rend(); ++e) diagram.pairs.push_back({0.0, e->len, e->u, e->v});
  return diagram;
}

PersistenceDiagram persistence_0d(const num::Tensor& points) {
  if (points.rank() != 2) throw ShapeError("persistence_0d: expected N x D points, got " + num::to_string(points.shape()));
  return persistence_0d(points.data(), points.dim(0), points.dim(1));
}

void write_diagram_csv(std::ostream& os, const PersistenceDiagram& diagram) {
  const auto prec = os.precision(17);
  os << "birth,death,u,v\n";
  for (const auto& p : diagram.pairs) {
    if (p.essential())
      os << p.birth << ",inf,-1,-1\n";
    else
      os << p.birth << ',' << p.death << ',' << p.u << ',' << p.v << '\n';
  }
  os.precision(prec);
}

}  // namespace topolidar::ph
