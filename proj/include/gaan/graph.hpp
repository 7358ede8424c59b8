#pragma once

#include "gaan/types.hpp"

#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace gaan {

/// Immutable CSR adjacency in canonical form: every neighbor slice is strictly
/// increasing, ids are in range and there are no self-loops.
class Graph {
 public:
  Graph() = default;

  /// Validates an already-canonical CSR and throws on any violation.
  static Graph from_csr(Index num_nodes, std::vector<Index> indptr, std::vector<NodeId> indices,
                        bool directed);

  /// Builds a canonical graph from arbitrary arcs: sorts, drops duplicates and
  /// self-loops. Out-of-range ids throw.
  static Graph from_edges(Index num_nodes, std::span<const std::pair<NodeId, NodeId>> arcs,
                          bool directed = true);

  /// Canonicalizes a raw CSR (sort, dedup, strip self-loops) after range checks.
  static Graph canonicalize(Index num_nodes, std::vector<Index> indptr, std::vector<NodeId> indices,
                            bool directed);

  Index num_nodes() const { return num_nodes_; }
  Index num_arcs() const { return static_cast<Index>(indices_.size()); }
  bool directed() const { return directed_; }

  std::span<const Index> indptr() const { return indptr_; }
  std::span<const NodeId> indices() const { return indices_; }

  std::span<const NodeId> neighbors(NodeId node) const {
    return std::span<const NodeId>(indices_).subspan(static_cast<std::size_t>(indptr_[node]),
                                                     static_cast<std::size_t>(degree(node)));
  }
  Index degree(NodeId node) const { return indptr_[node + 1] - indptr_[node]; }
  bool has_arc(NodeId from, NodeId to) const;

  bool is_symmetric() const;
  bool is_connected() const;

  bool operator==(const Graph& other) const = default;

 private:
  Index num_nodes_ = 0;
  std::vector<Index> indptr_{0};
  std::vector<NodeId> indices_;
  bool directed_ = false;
};

/// Symmetric closure: j in N(i) iff i in N(j) in either input direction.
Graph to_undirected(const Graph& g);

/// Subgraph induced by `nodes` (relabelled 0..n-1 in the given order).
Graph induced_subgraph(const Graph& g, std::span<const NodeId> nodes);

/// Disjoint union of `copies` replicas; copy c owns ids [c*n, (c+1)*n).
Graph replicate(const Graph& g, Index copies);

enum class LabelKind { single, multi };

struct LabelSet {
  LabelKind kind = LabelKind::single;
  Index num_classes = 0;
  std::vector<Index> classes;  ///< single-label
  Matrix indicators;           ///< multi-label, rows x num_classes of {0,1}

  Index size() const;
  void validate() const;
  LabelSet subset(std::span<const NodeId> rows) const;
};

/// Windows (J inputs, T_out targets) over a per-node signal on a fixed graph.
struct SequenceDataset {
  Graph graph;
  std::vector<Matrix> frames;  ///< T frames, each num_nodes x d_i
  Index window_in = 12;
  Index window_out = 12;
  double train_fraction = 0.7;
  double val_fraction = 0.1;
  double test_fraction = 0.2;

  Index num_timestamps() const { return static_cast<Index>(frames.size()); }
  Index signal_dim() const { return frames.empty() ? 0 : frames.front().cols(); }
  void validate() const;

  /// Timestamp ranges [begin, end) of the chronological train/val/test split.
  struct Range {
    Index begin;
    Index end;
  };
  Range split_range(int which) const;
};

}  // namespace gaan
