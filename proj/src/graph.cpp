#include "wkflow/graph.hpp"

#include <algorithm>
#include <limits>
#include <cmath>
#include <numeric>
#include <queue>
#include <set>
#include <utility>

namespace wkflow {
namespace {

using Pair = std::pair<int, int>;

struct ClassName {
  GraphClass cls;
  std::string_view name;
};

constexpr ClassName kClassNames[] = {
    {GraphClass::kComplete, "complete"},
    {GraphClass::kErdosRenyi, "erdos_renyi"},
    {GraphClass::kDRegular, "d_regular"},
    {GraphClass::kWattsStrogatz, "watts_strogatz"},
    {GraphClass::kSbm, "sbm"},
    {GraphClass::kDelaunay, "delaunay"},
    {GraphClass::kEmst, "emst"},
    {GraphClass::kKPartite, "k_partite"},
    {GraphClass::kGrid, "grid"},
    {GraphClass::kTorus, "torus"},
    {GraphClass::kApollonian, "apollonian"},
};

Pair ordered(int a, int b) { return a < b ? Pair{a, b} : Pair{b, a}; }

class UnionFind {
 public:
  explicit UnionFind(int n) : parent_(n) {
    std::iota(parent_.begin(), parent_.end(), 0);
  }
  int find(int x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  bool unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent_[std::max(a, b)] = std::min(a, b);
    return true;
  }

 private:
  std::vector<int> parent_;
};

bool pairs_connected(int n, const std::set<Pair>& pairs) {
  UnionFind uf(n);
  int components = n;
  for (auto [a, b] : pairs) {
    if (uf.unite(a, b)) --components;
  }
  return components == 1;
}

int near_square_rows(int n) {
  int r = static_cast<int>(std::floor(std::sqrt(static_cast<double>(n))));
  while (r > 1 && n % r != 0) --r;
  return std::max(r, 1);
}

void require(bool cond, const std::string& msg) {
  if (!cond) fail(ErrorKind::kParameter, msg);
}

// --- topology samplers; each consumes the given stream -----------------------

std::set<Pair> complete_topology(int n) {
  std::set<Pair> out;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) out.insert({i, j});
  return out;
}

std::set<Pair> bernoulli_topology(int n, Rng& rng, auto&& prob) {
  std::set<Pair> out;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (rng.uniform() < prob(i, j)) out.insert({i, j});
  return out;
}

std::set<Pair> d_regular_topology(int n, int d, Rng& rng) {
  // Pairing model with rejection of loops and multi-edges.
  std::vector<int> stubs;
  stubs.reserve(static_cast<std::size_t>(n) * d);
  for (int v = 0; v < n; ++v)
    for (int k = 0; k < d; ++k) stubs.push_back(v);
  for (int attempt = 0; attempt < 10000; ++attempt) {
    for (std::size_t k = stubs.size(); k > 1; --k)
      std::swap(stubs[k - 1], stubs[rng.below(k)]);
    std::set<Pair> out;
    bool ok = true;
    for (std::size_t k = 0; k + 1 < stubs.size(); k += 2) {
      int a = stubs[k], b = stubs[k + 1];
      if (a == b || !out.insert(ordered(a, b)).second) {
        ok = false;
        break;
      }
    }
    if (ok) return out;
  }
  fail(ErrorKind::kGeneration, "d_regular: pairing model did not produce a simple graph");
}

std::set<Pair> watts_strogatz_topology(int n, int ring_k, double rewire,
                                       Rng& rng) {
  int half = std::max(1, std::min(ring_k, n - 1) / 2);
  std::set<Pair> out;
  for (int i = 0; i < n; ++i)
    for (int s = 1; s <= half; ++s) out.insert(ordered(i, (i + s) % n));
  for (int s = 1; s <= half; ++s) {
    for (int i = 0; i < n; ++i) {
      Pair e = ordered(i, (i + s) % n);
      if (rng.uniform() >= rewire) continue;
      if (!out.count(e)) continue;
      std::vector<int> candidates;
      for (int w = 0; w < n; ++w)
        if (w != i && !out.count(ordered(i, w))) candidates.push_back(w);
      if (candidates.empty()) continue;
      int w = candidates[rng.below(candidates.size())];
      out.erase(e);
      out.insert(ordered(i, w));
    }
  }
  return out;
}

std::vector<std::array<double, 2>> random_points(int n, Rng& rng) {
  std::vector<std::array<double, 2>> pts(n);
  for (auto& p : pts) {
    p[0] = rng.uniform();
    p[1] = rng.uniform();
  }
  return pts;
}

// Brute-force Delaunay: a triangle belongs to the triangulation iff no other
// point lies strictly inside its circumcircle. O(n^4), fine for n <= ~60.
std::set<Pair> delaunay_topology(int n, Rng& rng) {
  auto pts = random_points(n, rng);
  std::set<Pair> out;
  if (n == 2) {
    out.insert({0, 1});
    return out;
  }
  auto orient = [&](int a, int b, int c) {
    return (pts[b][0] - pts[a][0]) * (pts[c][1] - pts[a][1]) -
           (pts[b][1] - pts[a][1]) * (pts[c][0] - pts[a][0]);
  };
  auto in_circle = [&](int a, int b, int c, int d) {
    // Positive when d is inside the circumcircle of the ccw triangle abc.
    double adx = pts[a][0] - pts[d][0], ady = pts[a][1] - pts[d][1];
    double bdx = pts[b][0] - pts[d][0], bdy = pts[b][1] - pts[d][1];
    double cdx = pts[c][0] - pts[d][0], cdy = pts[c][1] - pts[d][1];
    double ad = adx * adx + ady * ady;
    double bd = bdx * bdx + bdy * bdy;
    double cd = cdx * cdx + cdy * cdy;
    return adx * (bdy * cd - bd * cdy) - ady * (bdx * cd - bd * cdx) +
           ad * (bdx * cdy - bdy * cdx);
  };
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b)
      for (int c = b + 1; c < n; ++c) {
        double o = orient(a, b, c);
        if (std::abs(o) < 1e-14) continue;
        int x = a, y = o > 0 ? b : c, z = o > 0 ? c : b;
        bool empty = true;
        for (int d = 0; d < n && empty; ++d) {
          if (d == a || d == b || d == c) continue;
          if (in_circle(x, y, z, d) > 1e-14) empty = false;
        }
        if (empty) {
          out.insert({a, b});
          out.insert({a, c});
          out.insert({b, c});
        }
      }
  return out;
}

std::set<Pair> emst_topology(int n, Rng& rng) {
  auto pts = random_points(n, rng);
  auto dist2 = [&](int a, int b) {
    double dx = pts[a][0] - pts[b][0], dy = pts[a][1] - pts[b][1];
    return dx * dx + dy * dy;
  };
  // Prim on the complete Euclidean graph.
  std::vector<bool> in_tree(n, false);
  std::vector<double> best(n, std::numeric_limits<double>::infinity());
  std::vector<int> parent(n, -1);
  best[0] = 0.0;
  std::set<Pair> out;
  for (int it = 0; it < n; ++it) {
    int u = -1;
    for (int v = 0; v < n; ++v)
      if (!in_tree[v] && (u < 0 || best[v] < best[u])) u = v;
    in_tree[u] = true;
    if (parent[u] >= 0) out.insert(ordered(u, parent[u]));
    for (int v = 0; v < n; ++v) {
      if (in_tree[v]) continue;
      double d = dist2(u, v);
      if (d < best[v]) {
        best[v] = d;
        parent[v] = u;
      }
    }
  }
  return out;
}

std::set<Pair> lattice_topology(int n, int rows, bool wrap) {
  int cols = n / rows;
  std::set<Pair> out;
  auto id = [cols](int r, int c) { return r * cols + c; };
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      if (c + 1 < cols) out.insert(ordered(id(r, c), id(r, c + 1)));
      if (r + 1 < rows) out.insert(ordered(id(r, c), id(r + 1, c)));
      if (wrap) {
        int cw = (c + 1) % cols, rw = (r + 1) % rows;
        if (cw != c) out.insert(ordered(id(r, c), id(r, cw)));
        if (rw != r) out.insert(ordered(id(r, c), id(rw, c)));
      }
    }
  return out;
}

std::set<Pair> apollonian_topology(int n, Rng& rng) {
  std::set<Pair> out{{0, 1}, {0, 2}, {1, 2}};
  std::vector<std::array<int, 3>> faces{{0, 1, 2}};
  for (int v = 3; v < n; ++v) {
    std::size_t f = rng.below(faces.size());
    auto [a, b, c] = faces[f];
    out.insert(ordered(a, v));
    out.insert(ordered(b, v));
    out.insert(ordered(c, v));
    faces[f] = {a, b, v};
    faces.push_back({a, c, v});
    faces.push_back({b, c, v});
  }
  return out;
}

void validate_params(GraphClass cls, int n, const GraphParams& p) {
  require(n >= 2, "graph size n must be >= 2");
  require(p.weight_lo > 0.0 && p.weight_hi >= p.weight_lo,
          "edge weight range must satisfy 0 < lo <= hi");
  switch (cls) {
    case GraphClass::kErdosRenyi:
      require(p.p > 0.0 && p.p <= 1.0, "erdos_renyi: p must lie in (0, 1]");
      break;
    case GraphClass::kDRegular:
      require(p.d >= 1 && p.d < n, "d_regular: need 1 <= d < n");
      require((static_cast<long>(n) * p.d) % 2 == 0,
              "d_regular: n*d must be even (parity violation)");
      require(p.d >= 2 || n == 2, "d_regular: d = 1 is disconnected for n > 2");
      break;
    case GraphClass::kWattsStrogatz:
      require(n >= 3, "watts_strogatz: need n >= 3");
      require(p.ring_k >= 2, "watts_strogatz: ring_k must be >= 2");
      require(p.rewire >= 0.0 && p.rewire <= 1.0,
              "watts_strogatz: rewire must lie in [0, 1]");
      break;
    case GraphClass::kSbm:
      require(p.blocks >= 1 && p.blocks <= n, "sbm: need 1 <= blocks <= n");
      require(p.p_in > 0.0 && p.p_in <= 1.0 && p.p_out >= 0.0 && p.p_out <= 1.0,
              "sbm: probabilities out of range");
      break;
    case GraphClass::kKPartite:
      require(p.parts >= 2 && p.parts <= n, "k_partite: need 2 <= parts <= n");
      require(p.p_cross > 0.0 && p.p_cross <= 1.0,
              "k_partite: p_cross must lie in (0, 1]");
      break;
    case GraphClass::kGrid:
    case GraphClass::kTorus:
      if (p.rows) {
        require(*p.rows >= 1 && n % *p.rows == 0,
                "grid/torus: rows must divide n");
      }
      break;
    case GraphClass::kApollonian:
      require(n >= 3, "apollonian: need n >= 3");
      break;
    case GraphClass::kDelaunay:
    case GraphClass::kEmst:
    case GraphClass::kComplete:
      break;
  }
}

std::set<Pair> sample_topology(GraphClass cls, int n, const GraphParams& p,
                               Rng& rng) {
  switch (cls) {
    case GraphClass::kComplete:
      return complete_topology(n);
    case GraphClass::kErdosRenyi:
      return bernoulli_topology(n, rng, [&](int, int) { return p.p; });
    case GraphClass::kDRegular:
      return d_regular_topology(n, p.d, rng);
    case GraphClass::kWattsStrogatz:
      return watts_strogatz_topology(n, p.ring_k, p.rewire, rng);
    case GraphClass::kSbm: {
      auto block = [&](int v) { return v * p.blocks / n; };
      return bernoulli_topology(n, rng, [&](int i, int j) {
        return block(i) == block(j) ? p.p_in : p.p_out;
      });
    }
    case GraphClass::kDelaunay:
      return delaunay_topology(n, rng);
    case GraphClass::kEmst:
      return emst_topology(n, rng);
    case GraphClass::kKPartite:
      return bernoulli_topology(n, rng, [&](int i, int j) {
        return (i % p.parts) == (j % p.parts) ? 0.0 : p.p_cross;
      });
    case GraphClass::kGrid:
      return lattice_topology(n, p.rows.value_or(near_square_rows(n)), false);
    case GraphClass::kTorus:
      return lattice_topology(n, p.rows.value_or(near_square_rows(n)), true);
    case GraphClass::kApollonian:
      return apollonian_topology(n, rng);
  }
  fail(ErrorKind::kParameter, "unknown graph class");
}

// Joins components with random inter-component edges (a random spanning
// forest over the components).
void augment_spanning(int n, std::set<Pair>& pairs, Rng& rng) {
  UnionFind uf(n);
  for (auto [a, b] : pairs) uf.unite(a, b);
  for (;;) {
    std::vector<int> roots;
    for (int v = 0; v < n; ++v)
      if (uf.find(v) == v) roots.push_back(v);
    if (roots.size() <= 1) return;
    int r1 = roots[rng.below(roots.size())];
    int r2 = r1;
    while (r2 == r1) r2 = roots[rng.below(roots.size())];
    std::vector<int> c1, c2;
    for (int v = 0; v < n; ++v) {
      if (uf.find(v) == r1) c1.push_back(v);
      if (uf.find(v) == r2) c2.push_back(v);
    }
    int a = c1[rng.below(c1.size())];
    int b = c2[rng.below(c2.size())];
    pairs.insert(ordered(a, b));
    uf.unite(a, b);
  }
}

}  // namespace

std::string_view to_string(GraphClass c) {
  for (const auto& entry : kClassNames)
    if (entry.cls == c) return entry.name;
  return "unknown";
}

GraphClass parse_graph_class(std::string_view tag) {
  for (const auto& entry : kClassNames)
    if (entry.name == tag) return entry.cls;
  fail(ErrorKind::kParameter, "unknown graph class '" + std::string(tag) + "'");
}

Matrix WeightedGraph::adjacency() const {
  Matrix a = Matrix::Zero(n, n);
  for (const auto& e : edges) {
    a(e.i, e.j) = e.weight;
    a(e.j, e.i) = e.weight;
  }
  return a;
}

std::vector<int> WeightedGraph::degrees() const {
  std::vector<int> deg(n, 0);
  for (const auto& e : edges) {
    ++deg[e.i];
    ++deg[e.j];
  }
  return deg;
}

bool WeightedGraph::connected() const {
  std::set<Pair> pairs;
  for (const auto& e : edges) pairs.insert({e.i, e.j});
  return pairs_connected(n, pairs);
}

WeightedGraph generate_graph(GraphClass cls, int n, const GraphParams& params,
                             std::uint64_t seed) {
  validate_params(cls, n, params);
  const int attempts = std::max(1, params.max_resamples);
  std::set<Pair> pairs;
  Rng rng(derive_seed(seed, kGraphStream, 0));
  for (int attempt = 0; attempt < attempts; ++attempt) {
    rng = Rng(derive_seed(seed, kGraphStream, attempt));
    pairs = sample_topology(cls, n, params, rng);
    if (pairs_connected(n, pairs)) break;
  }
  if (!pairs_connected(n, pairs)) augment_spanning(n, pairs, rng);
  if (!pairs_connected(n, pairs))
    fail(ErrorKind::kGeneration, "graph generation failed to reach connectivity");

  WeightedGraph g;
  g.n = n;
  g.class_tag = cls;
  g.seed = seed;
  g.edges.reserve(pairs.size());
  for (auto [a, b] : pairs)
    g.edges.push_back({a, b, rng.uniform(params.weight_lo, params.weight_hi)});
  return g;
}

MarkovChain to_markov_chain(const WeightedGraph& g) {
  Matrix w = g.adjacency();
  Vector deg = w.rowwise().sum();
  for (int i = 0; i < g.n; ++i) {
    if (!(deg(i) > 0.0))
      fail(ErrorKind::kGeneration,
           "vertex " + std::to_string(i) + " is isolated; kernel undefined");
  }
  MarkovChain chain;
  chain.K = deg.cwiseInverse().asDiagonal() * w;
  chain.pi = deg / deg.sum();
  return chain;
}

Vector stationary_distribution(const Matrix& K, const StationaryOptions& opts) {
  const auto n = K.rows();
  if (K.cols() != n || n == 0)
    fail(ErrorKind::kShape, "stationary_distribution: K must be square");
  Vector pi = Vector::Constant(n, 1.0 / static_cast<double>(n));
  const Matrix lazy_t = 0.5 * (Matrix::Identity(n, n) + K).transpose();
  for (long it = 0; it < opts.max_iterations; ++it) {
    Vector next = lazy_t * pi;
    next /= next.sum();
    double change = (next - pi).cwiseAbs().maxCoeff();
    pi = std::move(next);
    if (change <= opts.tolerance) {
      double residual = (K.transpose() * pi - pi).cwiseAbs().maxCoeff();
      if (residual <= 1e-10) return pi;
    }
  }
  fail(ErrorKind::kNumerical,
       "stationary_distribution: power iteration did not converge");
}

bool strongly_connected(const Matrix& K) {
  const int n = static_cast<int>(K.rows());
  auto reach_all = [&](bool transpose) {
    std::vector<bool> seen(n, false);
    std::queue<int> q;
    q.push(0);
    seen[0] = true;
    int count = 1;
    while (!q.empty()) {
      int u = q.front();
      q.pop();
      for (int v = 0; v < n; ++v) {
        double w = transpose ? K(v, u) : K(u, v);
        if (w > 0.0 && !seen[v]) {
          seen[v] = true;
          ++count;
          q.push(v);
        }
      }
    }
    return count == n;
  };
  return n > 0 && reach_all(false) && reach_all(true);
}

ValidationReport validate_chain(const MarkovChain& chain, double tol) {
  ValidationReport r;
  const auto n = chain.K.rows();
  if (chain.K.cols() != n || chain.pi.size() != n) return r;
  r.max_row_sum_error = (chain.K.rowwise().sum().array() - 1.0).abs().maxCoeff();
  r.row_stochastic = r.max_row_sum_error <= tol && chain.K.minCoeff() >= 0.0;
  r.irreducible = strongly_connected(chain.K);
  const Matrix flow = chain.pi.asDiagonal() * chain.K;
  r.max_detailed_balance_error = (flow - flow.transpose()).cwiseAbs().maxCoeff();
  r.reversible = r.max_detailed_balance_error <= tol;
  r.min_pi = chain.pi.minCoeff();
  r.pi_sum_error = std::abs(chain.pi.sum() - 1.0);
  r.pi_positive = r.min_pi > 0.0 && r.pi_sum_error <= tol;
  return r;
}

}  // namespace wkflow
