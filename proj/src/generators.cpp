#include "gaan/generators.hpp"

#include <random>
#include <string>

namespace gaan {

Index sbm_block_of(Index node, Index num_nodes, Index num_blocks) {
  if (num_nodes % num_blocks == 0) return node / (num_nodes / num_blocks);
  return node % num_blocks;
}

SbmDataset generate_sbm(const SbmParams& p) {
  if (p.num_nodes < 1 || p.num_blocks < 1) throw ConfigError("sbm: num_nodes and num_blocks must be positive");
  if (!(p.p_out >= 0.0 && p.p_in <= 1.0)) throw ConfigError("sbm: probabilities must lie in [0, 1]");
  if (!(p.p_in > p.p_out)) throw ConfigError("sbm: p_in must exceed p_out");
  if (p.feat_dim < p.num_blocks) throw ConfigError("sbm: feat_dim must be at least num_blocks");
  if (!(p.noise >= 0.0)) throw ConfigError("sbm: noise must be non-negative");

  Rng rng(p.seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Index> block(static_cast<std::size_t>(p.num_nodes));
  for (Index i = 0; i < p.num_nodes; ++i) block[i] = sbm_block_of(i, p.num_nodes, p.num_blocks);

  std::vector<std::pair<NodeId, NodeId>> arcs;
  for (NodeId i = 0; i < p.num_nodes; ++i) {
    for (NodeId j = i + 1; j < p.num_nodes; ++j) {
      const double prob = block[i] == block[j] ? p.p_in : p.p_out;
      if (u(rng) < prob) {
        arcs.emplace_back(i, j);
        arcs.emplace_back(j, i);
      }
    }
  }

  SbmDataset out;
  out.graph = Graph::from_edges(p.num_nodes, arcs, false);
  std::normal_distribution<double> gauss(0.0, 1.0);
  out.features = Matrix::Zero(p.num_nodes, p.feat_dim);
  for (Index i = 0; i < p.num_nodes; ++i) {
    for (Index c = 0; c < p.feat_dim; ++c) out.features(i, c) = (c == block[i] ? 1.0 : 0.0) + p.noise * gauss(rng);
  }
  out.labels.kind = LabelKind::single;
  out.labels.num_classes = p.num_blocks;
  out.labels.classes = block;
  return out;
}

Matrix diffuse_step(const Graph& g, const Matrix& frame, double alpha) {
  Matrix next = (1.0 - alpha) * frame;
  for (NodeId i = 0; i < g.num_nodes(); ++i) {
    const auto nb = g.neighbors(i);
    if (nb.empty()) {
      next.row(i) += alpha * frame.row(i);
      continue;
    }
    Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(frame.cols());
    for (NodeId j : nb) mean += frame.row(j);
    next.row(i) += alpha * mean / static_cast<double>(nb.size());
  }
  return next;
}

SequenceDataset generate_diffusion_series(const Graph& g, const DiffusionParams& p) {
  if (g.directed() || !g.is_symmetric()) throw ConfigError("diffusion: graph must be undirected");
  if (!g.is_connected()) throw ConfigError("diffusion: graph must be connected");
  if (!(p.alpha >= 0.0 && p.alpha < 1.0)) throw ConfigError("diffusion: alpha must lie in [0, 1)");
  if (!(p.noise_corr >= 0.0 && p.noise_corr < 1.0)) throw ConfigError("diffusion: noise_corr must lie in [0, 1)");
  if (p.num_timestamps < 1) throw ConfigError("diffusion: need at least one timestamp");

  const Index n = g.num_nodes();
  Rng rng(p.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  SequenceDataset out;
  out.graph = g;
  out.window_in = p.window_in;
  out.window_out = p.window_out;
  out.frames.reserve(static_cast<std::size_t>(p.num_timestamps));

  Matrix s(n, 1);
  for (Index i = 0; i < n; ++i) s(i, 0) = p.level + gauss(rng);
  Matrix drive = Matrix::Zero(n, 1);
  for (Index t = 0; t < p.num_timestamps; ++t) {
    out.frames.push_back(s);
    Matrix eta(n, 1);
    for (Index i = 0; i < n; ++i) eta(i, 0) = p.noise * gauss(rng);
    eta.array() -= eta.mean();
    drive = p.noise_corr * drive + eta;
    s = diffuse_step(g, s, p.alpha) + drive;
  }
  out.validate();
  return out;
}

Graph ring_graph(Index n) {
  std::vector<std::pair<NodeId, NodeId>> arcs;
  for (NodeId i = 0; i < n; ++i) {
    arcs.emplace_back(i, (i + 1) % n);
    arcs.emplace_back((i + 1) % n, i);
  }
  return Graph::from_edges(n, arcs, false);
}

Graph complete_graph(Index n) {
  std::vector<std::pair<NodeId, NodeId>> arcs;
  for (NodeId i = 0; i < n; ++i) {
    for (NodeId j = 0; j < n; ++j) {
      if (i != j) arcs.emplace_back(i, j);
    }
  }
  return Graph::from_edges(n, arcs, false);
}

}  // namespace gaan
