#pragma once

// Randomized finite-difference checks of every aggregator kind and the GGRU
// cell. Each case draws its own instance, evaluates a random linear
// functional of the output and compares analytic gradients of every
// parameter tensor and both inputs against central differences.

#include "gaan/aggregators.hpp"
#include "gaan/graph.hpp"
#include "gaan/optim.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace gaan {

inline constexpr Index kGradCheckMaxNodes = 10;
inline constexpr Index kGradCheckMaxDim = 8;

struct GradSuiteOptions {
  std::uint64_t seed = 0;
  std::vector<AggregatorKind> kinds{std::begin(kAllAggregatorKinds), std::end(kAllAggregatorKinds)};
  std::vector<Index> heads{1, 2, 4};
  Index num_nodes = 5;  ///< aggregator batch size and GGRU graph size
  Index dim = 4;        ///< every feature width
  bool include_ggru = true;
  double tolerance = 1e-5;
  /// Test hook: the analytic gradient of tensors with this name is perturbed
  /// before comparison, so the suite must report them.
  std::string corrupt;

  void validate() const;
};

struct GradCase {
  std::string label;  ///< e.g. "aggregator=gaan heads=2"
  GradCheckReport report;
};

struct GradSuiteResult {
  std::vector<GradCase> cases;

  bool passed() const;
  double max_rel_error() const;
  /// "case tensor size max_rel_error status" rows.
  std::string table() const;
  std::vector<std::string> failing() const;
};

GradCheckReport gradcheck_aggregator(const AggregatorConfig& cfg, const Segments& segs, std::uint64_t seed,
                                     double tolerance, const std::string& corrupt = {});
/// Single GGRU step on `g` with loss = <W, H_t>.
GradCheckReport gradcheck_ggru_cell(const AggregatorConfig& base, const Graph& g, Index input_dim,
                                    Index state_dim, std::uint64_t seed, double tolerance,
                                    const std::string& corrupt = {});

GradSuiteResult run_gradcheck_suite(const GradSuiteOptions& opts);

/// Random connected undirected graph: a random spanning tree plus extra edges.
Graph random_connected_graph(Index n, Index extra_edges, Rng& rng);

}  // namespace gaan
