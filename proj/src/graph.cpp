#include "gaan/graph.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <string>
#include <unordered_map>

namespace gaan {

namespace {

void check_indptr(Index num_nodes, const std::vector<Index>& indptr, std::size_t num_indices) {
  if (num_nodes < 0) throw FormatError("negative node count");
  if (indptr.size() != static_cast<std::size_t>(num_nodes) + 1) {
    throw FormatError("indptr must have num_nodes+1 entries");
  }
  if (indptr.front() != 0) throw FormatError("indptr[0] must be 0");
  for (std::size_t i = 1; i < indptr.size(); ++i) {
    if (indptr[i] < indptr[i - 1]) throw FormatError("indptr is decreasing at " + std::to_string(i));
  }
  if (static_cast<std::size_t>(indptr.back()) != num_indices) {
    throw FormatError("offset overflow: indptr ends at " + std::to_string(indptr.back()) + " but " +
                      std::to_string(num_indices) + " indices are present");
  }
}

void check_range(Index num_nodes, NodeId id) {
  if (id < 0 || id >= num_nodes) {
    throw FormatError("node id out of range: " + std::to_string(id) + " (num_nodes " +
                      std::to_string(num_nodes) + ")");
  }
}

}  // namespace

Graph Graph::from_csr(Index num_nodes, std::vector<Index> indptr, std::vector<NodeId> indices,
                      bool directed) {
  check_indptr(num_nodes, indptr, indices.size());
  for (Index i = 0; i < num_nodes; ++i) {
    for (Index p = indptr[i]; p < indptr[i + 1]; ++p) {
      check_range(num_nodes, indices[p]);
      if (indices[p] == i) throw FormatError("self-loop at node " + std::to_string(i));
      if (p > indptr[i] && indices[p] <= indices[p - 1]) {
        throw FormatError("neighbor slice of node " + std::to_string(i) + " is not strictly increasing");
      }
    }
  }
  Graph g;
  g.num_nodes_ = num_nodes;
  g.indptr_ = std::move(indptr);
  g.indices_ = std::move(indices);
  g.directed_ = directed;
  return g;
}

Graph Graph::canonicalize(Index num_nodes, std::vector<Index> indptr, std::vector<NodeId> indices,
                          bool directed) {
  check_indptr(num_nodes, indptr, indices.size());
  std::vector<Index> out_ptr(indptr.size(), 0);
  std::vector<NodeId> out_idx;
  out_idx.reserve(indices.size());
  for (Index i = 0; i < num_nodes; ++i) {
    auto first = indices.begin() + indptr[i];
    auto last = indices.begin() + indptr[i + 1];
    for (auto it = first; it != last; ++it) check_range(num_nodes, *it);
    std::sort(first, last);
    last = std::unique(first, last);
    for (auto it = first; it != last; ++it) {
      if (*it != i) out_idx.push_back(*it);
    }
    out_ptr[i + 1] = static_cast<Index>(out_idx.size());
  }
  return from_csr(num_nodes, std::move(out_ptr), std::move(out_idx), directed);
}

Graph Graph::from_edges(Index num_nodes, std::span<const std::pair<NodeId, NodeId>> arcs, bool directed) {
  std::vector<Index> counts(static_cast<std::size_t>(num_nodes) + 1, 0);
  for (const auto& [u, v] : arcs) {
    check_range(num_nodes, u);
    check_range(num_nodes, v);
    ++counts[u + 1];
  }
  for (Index i = 0; i < num_nodes; ++i) counts[i + 1] += counts[i];
  std::vector<NodeId> indices(arcs.size());
  std::vector<Index> fill(counts.begin(), counts.end() - 1);
  for (const auto& [u, v] : arcs) indices[fill[u]++] = v;
  return canonicalize(num_nodes, std::move(counts), std::move(indices), directed);
}

bool Graph::has_arc(NodeId from, NodeId to) const {
  auto nb = neighbors(from);
  return std::binary_search(nb.begin(), nb.end(), to);
}

bool Graph::is_symmetric() const {
  for (NodeId i = 0; i < num_nodes_; ++i) {
    for (NodeId j : neighbors(i)) {
      if (!has_arc(j, i)) return false;
    }
  }
  return true;
}

bool Graph::is_connected() const {
  if (num_nodes_ == 0) return true;
  std::vector<char> seen(static_cast<std::size_t>(num_nodes_), 0);
  std::queue<NodeId> q;
  q.push(0);
  seen[0] = 1;
  Index reached = 1;
  while (!q.empty()) {
    const NodeId u = q.front();
    q.pop();
    for (NodeId v : neighbors(u)) {
      if (!seen[v]) {
        seen[v] = 1;
        ++reached;
        q.push(v);
      }
    }
  }
  return reached == num_nodes_;
}

Graph to_undirected(const Graph& g) {
  std::vector<std::pair<NodeId, NodeId>> arcs;
  arcs.reserve(static_cast<std::size_t>(2 * g.num_arcs()));
  for (NodeId i = 0; i < g.num_nodes(); ++i) {
    for (NodeId j : g.neighbors(i)) {
      arcs.emplace_back(i, j);
      arcs.emplace_back(j, i);
    }
  }
  return Graph::from_edges(g.num_nodes(), arcs, false);
}

Graph induced_subgraph(const Graph& g, std::span<const NodeId> nodes) {
  std::unordered_map<NodeId, NodeId> local;
  local.reserve(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (!local.emplace(nodes[i], static_cast<NodeId>(i)).second) throw Error("induced_subgraph: duplicate node");
  }
  std::vector<std::pair<NodeId, NodeId>> arcs;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    for (NodeId j : g.neighbors(nodes[i])) {
      if (auto it = local.find(j); it != local.end()) arcs.emplace_back(static_cast<NodeId>(i), it->second);
    }
  }
  return Graph::from_edges(static_cast<Index>(nodes.size()), arcs, g.directed());
}

Graph replicate(const Graph& g, Index copies) {
  const Index n = g.num_nodes();
  std::vector<Index> indptr(static_cast<std::size_t>(n * copies) + 1, 0);
  std::vector<NodeId> indices;
  indices.reserve(static_cast<std::size_t>(g.num_arcs() * copies));
  for (Index c = 0; c < copies; ++c) {
    for (NodeId i = 0; i < n; ++i) {
      for (NodeId j : g.neighbors(i)) indices.push_back(j + c * n);
      indptr[c * n + i + 1] = static_cast<Index>(indices.size());
    }
  }
  return Graph::from_csr(n * copies, std::move(indptr), std::move(indices), g.directed());
}

Index LabelSet::size() const {
  return kind == LabelKind::single ? static_cast<Index>(classes.size()) : indicators.rows();
}

void LabelSet::validate() const {
  if (num_classes < 1) throw FormatError("label set needs at least one class");
  if (kind == LabelKind::single) {
    for (Index c : classes) {
      if (c < 0 || c >= num_classes) {
        throw FormatError("label/class mismatch: label " + std::to_string(c) + " with " +
                          std::to_string(num_classes) + " classes");
      }
    }
  } else {
    if (indicators.cols() != num_classes) throw FormatError("label/class mismatch: indicator width");
    for (Index i = 0; i < indicators.size(); ++i) {
      const double v = indicators.data()[i];
      if (v != 0.0 && v != 1.0) throw FormatError("multi-label indicators must be 0 or 1");
    }
  }
}

LabelSet LabelSet::subset(std::span<const NodeId> rows) const {
  LabelSet out;
  out.kind = kind;
  out.num_classes = num_classes;
  if (kind == LabelKind::single) {
    out.classes.reserve(rows.size());
    for (NodeId r : rows) out.classes.push_back(classes.at(static_cast<std::size_t>(r)));
  } else {
    out.indicators.resize(static_cast<Index>(rows.size()), num_classes);
    for (std::size_t i = 0; i < rows.size(); ++i) out.indicators.row(static_cast<Index>(i)) = indicators.row(rows[i]);
  }
  return out;
}

void SequenceDataset::validate() const {
  if (window_in < 1) throw ConfigError("window_in must be >= 1");
  if (window_out < 1) throw ConfigError("window_out must be >= 1");
  if (train_fraction < 0 || val_fraction < 0 || test_fraction < 0 ||
      std::abs(train_fraction + val_fraction + test_fraction - 1.0) > 1e-9) {
    throw ConfigError("split fractions must be non-negative and sum to 1");
  }
  for (const auto& f : frames) {
    if (f.rows() != graph.num_nodes() || f.cols() != signal_dim()) throw FormatError("signal frame shape mismatch");
    if (!f.allFinite()) throw FormatError("non-finite signal value");
  }
}

SequenceDataset::Range SequenceDataset::split_range(int which) const {
  const auto t = static_cast<double>(num_timestamps());
  const Index train_end = static_cast<Index>(std::llround(t * train_fraction));
  const Index val_end = static_cast<Index>(std::llround(t * (train_fraction + val_fraction)));
  switch (which) {
    case 0: return {0, train_end};
    case 1: return {train_end, val_end};
    default: return {val_end, num_timestamps()};
  }
}

}  // namespace gaan
