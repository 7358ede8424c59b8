#pragma once

#include "gaan/graph.hpp"
#include "gaan/ragged.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace gaan {

/// Per-step cap on sampled neighbors; `all` keeps the whole neighborhood.
struct Fanout {
  Index limit = -1;

  static Fanout all() { return Fanout{-1}; }
  static Fanout at_most(Index s);
  bool is_all() const { return limit < 0; }

  /// "all" or a positive integer.
  static Fanout parse(const std::string& text);
  std::string to_string() const;
};

struct SampleConfig {
  std::vector<Fanout> fanouts;  ///< S_1 .. S_M
  std::uint64_t seed = 0;

  Index depth() const { return static_cast<Index>(fanouts.size()); }
  void validate() const;
};

/// Links level l of a hierarchy to level l+1.
struct LevelMap {
  std::vector<Index> offsets;       ///< per node of B_l, into neighbor_pos
  std::vector<Index> neighbor_pos;  ///< rows of B_{l+1}
  std::vector<Index> self_pos;      ///< row of each B_l node inside B_{l+1}

  Segments segments() const { return Segments(offsets); }
};

/// B_0 .. B_M, each sorted and unique, with B_l contained in B_{l+1}.
struct BatchHierarchy {
  std::vector<std::vector<NodeId>> levels;
  std::vector<LevelMap> maps;

  Index depth() const { return static_cast<Index>(maps.size()); }
};

/// Uniform subset of N(node) of size min(|N(node)|, s), sorted. Consumes the
/// RNG only when the cap is binding.
std::vector<NodeId> sample_neighbors(const Graph& g, NodeId node, Fanout s, Rng& rng);

/// Nodes of each level are processed in ascending id order, which fixes the
/// RNG consumption order.
BatchHierarchy build_hierarchy(const Graph& g, std::span<const NodeId> seeds, std::span<const Fanout> fanouts,
                               Rng& rng);
BatchHierarchy build_hierarchy(const Graph& g, std::span<const NodeId> seeds, const SampleConfig& cfg);

/// Size of every level if nodes reached from different seeds were never merged:
/// the sum over seeds of that seed's own hierarchy size. Each seed's hierarchy
/// reuses the samples drawn in `h`, so merged <= unmerged holds level by level
/// and the two agree when no node is reachable from two seeds.
std::vector<double> unmerged_level_sizes(const BatchHierarchy& h);

struct HierarchyStats {
  Index repetitions = 0;
  std::vector<double> merged_mean;    ///< per level 0..M
  std::vector<double> unmerged_mean;  ///< per level 0..M

  std::string table() const;
  /// One "step=.. merged_mean=.. unmerged_mean=.. repetitions=.." line per level.
  std::string report() const;
};

/// Repetition r uses the stream derive_rng(cfg.seed, {r}).
HierarchyStats hierarchy_stats(const Graph& g, std::span<const NodeId> seeds, const SampleConfig& cfg,
                               Index repetitions);
/// Draws a fresh set of `num_seeds` distinct seed nodes for each repetition.
HierarchyStats hierarchy_stats_random_seeds(const Graph& g, Index num_seeds, const SampleConfig& cfg,
                                            Index repetitions);

}  // namespace gaan
