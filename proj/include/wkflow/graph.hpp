#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "wkflow/common.hpp"

namespace wkflow {

enum class GraphClass {
  kComplete,
  kErdosRenyi,
  kDRegular,
  kWattsStrogatz,
  kSbm,
  kDelaunay,
  kEmst,
  kKPartite,
  kGrid,
  kTorus,
  kApollonian,
};

inline constexpr std::array<GraphClass, 11> kAllGraphClasses = {
    GraphClass::kComplete,  GraphClass::kErdosRenyi, GraphClass::kDRegular,
    GraphClass::kWattsStrogatz, GraphClass::kSbm,    GraphClass::kDelaunay,
    GraphClass::kEmst,      GraphClass::kKPartite,   GraphClass::kGrid,
    GraphClass::kTorus,     GraphClass::kApollonian,
};

std::string_view to_string(GraphClass c);
/// Throws Error(kParameter) for unknown tags.
GraphClass parse_graph_class(std::string_view tag);

struct Edge {
  int i = 0;
  int j = 0;
  double weight = 1.0;
  friend bool operator==(const Edge&, const Edge&) = default;
};

/// Undirected weighted graph; every edge is stored once with i < j.
struct WeightedGraph {
  int n = 0;
  std::vector<Edge> edges;
  GraphClass class_tag = GraphClass::kComplete;
  std::uint64_t seed = 0;

  /// Dense symmetric weight matrix.
  Matrix adjacency() const;
  std::vector<int> degrees() const;
  bool connected() const;
};

/// Class-specific generation knobs. Unset fields take per-class defaults.
struct GraphParams {
  double p = 0.5;             // erdos_renyi edge probability
  int d = 3;                  // d_regular degree
  int ring_k = 4;             // watts_strogatz ring neighbours (even, clipped)
  double rewire = 0.2;        // watts_strogatz rewiring probability
  int blocks = 2;             // sbm
  double p_in = 0.8;          // sbm within-block probability
  double p_out = 0.2;         // sbm across-block probability
  int parts = 3;              // k_partite
  double p_cross = 0.8;       // k_partite cross-part probability
  std::optional<int> rows;    // grid / torus; near-square factorisation if unset
  double weight_lo = 0.5;
  double weight_hi = 1.5;
  int max_resamples = 50;
};

/// Stream-discipline constants, exposed so reference samplers in tests can
/// replay the exact sequence: attempt `a` of a generation draws from
/// Rng(derive_seed(seed, kGraphStream, a)); topology first, then one weight
/// per edge in ascending (i, j) order.
inline const std::uint64_t kGraphStream = 0x6772617068ULL;  // "graph"

WeightedGraph generate_graph(GraphClass cls, int n, const GraphParams& params,
                             std::uint64_t seed);

/// Reversible Markov kernel K with its stationary distribution pi.
struct MarkovChain {
  Matrix K;
  Vector pi;

  int n() const { return static_cast<int>(pi.size()); }
};

/// Random-walk kernel K(i,j) = w(i,j)/deg(i), pi(i) = deg(i)/sum deg.
MarkovChain to_markov_chain(const WeightedGraph& g);

struct StationaryOptions {
  double tolerance = 1e-14;
  long max_iterations = 2'000'000;
};

/// Power iteration on the lazy kernel (I + K)/2 from the uniform vector.
/// The lazy kernel has the same invariant measure and is aperiodic, so
/// bipartite chains converge too.
Vector stationary_distribution(const Matrix& K,
                               const StationaryOptions& opts = {});

struct ValidationReport {
  bool row_stochastic = false;
  bool irreducible = false;
  bool reversible = false;
  bool pi_positive = false;
  double max_row_sum_error = 0.0;
  double max_detailed_balance_error = 0.0;
  double pi_sum_error = 0.0;
  double min_pi = 0.0;

  bool ok() const {
    return row_stochastic && irreducible && reversible && pi_positive;
  }
};

ValidationReport validate_chain(const MarkovChain& chain, double tol = 1e-12);

/// Strong connectivity of the digraph with an arc i->j whenever K(i,j) > 0.
bool strongly_connected(const Matrix& K);

}  // namespace wkflow
