#pragma once

#include "gaan/graph.hpp"

#include <cstdint>

namespace gaan {

struct SbmParams {
  Index num_nodes = 400;
  Index num_blocks = 4;
  double p_in = 0.1;
  double p_out = 0.005;
  Index feat_dim = 4;
  double noise = 0.5;
  std::uint64_t seed = 0;
};

struct SbmDataset {
  Graph graph;
  Matrix features;
  LabelSet labels;
};

/// Undirected stochastic block model. Blocks are contiguous when num_blocks
/// divides num_nodes and round-robin otherwise. Features are the one-hot
/// block indicator plus N(0, noise^2) per entry; labels are block ids.
SbmDataset generate_sbm(const SbmParams& params);

/// Block id of `node` under the assignment used by generate_sbm.
Index sbm_block_of(Index node, Index num_nodes, Index num_blocks);

struct DiffusionParams {
  Index num_timestamps = 2000;
  double alpha = 0.3;
  std::uint64_t seed = 0;
  /// Innovation scale of the driving noise.
  double noise = 0.01;
  /// AR(1) persistence of the driving noise; 0 gives white noise.
  double noise_corr = 0.98;
  /// Mean signal level; initial values are level + N(0, 1).
  double level = 10.0;
  Index window_in = 12;
  Index window_out = 12;
};

/// s_{t+1} = (1 - alpha) s_t + alpha * mean_{j in N(i)} s_t[j] + e_t, where
/// e_t = noise_corr * e_{t-1} + eta_t and eta_t is centred across nodes so the
/// global mean is conserved. Requires an undirected connected graph.
SequenceDataset generate_diffusion_series(const Graph& g, const DiffusionParams& params);

/// (I - alpha * L_rw) applied to a frame: one noise-free diffusion step.
Matrix diffuse_step(const Graph& g, const Matrix& frame, double alpha);

Graph ring_graph(Index n);
Graph complete_graph(Index n);

}  // namespace gaan
