#include "gaan/container.hpp"
#include "gaan/generators.hpp"
#include "gaan/graph.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

using namespace gaan;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("gaan_test_graph_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::vector<char> file_bytes(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

void check_canonical(const Graph& g) {
  for (NodeId i = 0; i < g.num_nodes(); ++i) {
    const auto nb = g.neighbors(i);
    for (std::size_t k = 0; k < nb.size(); ++k) {
      CHECK(nb[k] != i);
      CHECK(nb[k] >= 0);
      CHECK(nb[k] < g.num_nodes());
      if (k > 0) CHECK(nb[k - 1] < nb[k]);
    }
  }
}

/// Dense boolean adjacency.
std::vector<std::vector<bool>> dense(const Graph& g) {
  std::vector<std::vector<bool>> a(static_cast<std::size_t>(g.num_nodes()),
                                   std::vector<bool>(static_cast<std::size_t>(g.num_nodes()), false));
  for (NodeId i = 0; i < g.num_nodes(); ++i) {
    for (NodeId j : g.neighbors(i)) a[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = true;
  }
  return a;
}

}  // namespace

TEST_CASE("smallest directed graph loads from the container") {
  const fs::path dir = scratch_dir("two");
  io::NodeDataset d;
  d.graph = Graph::from_edges(2, std::vector<std::pair<NodeId, NodeId>>{{0, 1}}, true);
  d.features = Matrix::Zero(2, 1);
  io::save_graph(dir, d);
  const io::NodeDataset back = io::load_graph(dir);
  CHECK(std::vector<Index>(back.graph.indptr().begin(), back.graph.indptr().end()) == std::vector<Index>{0, 1, 1});
  CHECK(std::vector<NodeId>(back.graph.indices().begin(), back.graph.indices().end()) == std::vector<NodeId>{1});
  CHECK(back.graph.directed());
}

TEST_CASE("node id equal to num_nodes is rejected") {
  const fs::path dir = scratch_dir("range");
  io::NodeDataset d;
  d.graph = Graph::from_edges(2, std::vector<std::pair<NodeId, NodeId>>{{0, 1}}, true);
  d.features = Matrix::Zero(2, 1);
  io::save_graph(dir, d);
  io::write_array(dir / "indices.bin", std::vector<std::uint64_t>{2});
  try {
    io::load_graph(dir);
    FAIL("expected an error");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("node id out of range") != std::string::npos);
  }
  CHECK_THROWS_AS(Graph::from_csr(2, {0, 1, 1}, {2}, true), FormatError);
}

TEST_CASE("loading canonicalizes unsorted, duplicated and self-loop entries") {
  const Graph g = Graph::canonicalize(3, {0, 4, 5, 5}, {2, 1, 2, 0, 1}, true);
  check_canonical(g);
  CHECK(g.degree(0) == 2);
  CHECK(g.has_arc(0, 1));
  CHECK(g.has_arc(0, 2));
  CHECK(!g.has_arc(1, 1));
}

TEST_CASE("container errors: bad magic, truncation, non-finite features, label mismatch") {
  const fs::path dir = scratch_dir("errors");
  SbmParams p;
  p.num_nodes = 12;
  p.num_blocks = 3;
  p.seed = 4;
  const SbmDataset s = generate_sbm(p);
  io::save_graph(dir, io::NodeDataset{s.graph, s.features, s.labels, std::nullopt});

  SUBCASE("bad magic") {
    std::fstream f(dir / "indices.bin", std::ios::in | std::ios::out | std::ios::binary);
    f.put('X');
    f.close();
    CHECK_THROWS_AS(io::load_graph(dir), FormatError);
  }
  SUBCASE("truncated payload") {
    auto bytes = file_bytes(dir / "features.bin");
    bytes.resize(bytes.size() - 3);
    std::ofstream(dir / "features.bin", std::ios::binary).write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    CHECK_THROWS_AS(io::load_graph(dir), FormatError);
  }
  SUBCASE("non-finite feature") {
    std::vector<double> f(s.features.data(), s.features.data() + s.features.size());
    f[3] = std::nan("");
    io::write_array(dir / "features.bin", f);
    CHECK_THROWS_AS(io::load_graph(dir), FormatError);
  }
  SUBCASE("label out of class range") {
    std::vector<std::uint64_t> l(12, 0);
    l[5] = 3;
    io::write_array(dir / "labels.bin", l);
    CHECK_THROWS_AS(io::load_graph(dir), FormatError);
  }
  SUBCASE("malformed header") {
    std::ofstream(dir / "meta.json") << "{ not json";
    CHECK_THROWS_AS(io::load_graph(dir), FormatError);
  }
}

TEST_CASE("SBM save and load round-trips byte for byte") {
  SbmParams p;
  p.seed = 9;
  const SbmDataset s = generate_sbm(p);
  const fs::path a = scratch_dir("rt_a"), b = scratch_dir("rt_b");
  io::save_graph(a, io::NodeDataset{s.graph, s.features, s.labels, std::nullopt});
  const io::NodeDataset back = io::load_graph(a);
  CHECK(back.graph == s.graph);
  CHECK(back.features == s.features);
  CHECK(back.labels->classes == s.labels.classes);
  io::save_graph(b, back);
  for (const char* f : {"indptr.bin", "indices.bin", "features.bin", "labels.bin", "meta.json"}) {
    CHECK(file_bytes(a / f) == file_bytes(b / f));
  }
}

TEST_CASE("multi-label datasets and split tags round-trip") {
  const fs::path dir = scratch_dir("multi");
  LabelSet l;
  l.kind = LabelKind::multi;
  l.num_classes = 3;
  l.indicators = Matrix::Zero(4, 3);
  l.indicators(0, 2) = l.indicators(1, 0) = l.indicators(3, 1) = l.indicators(3, 2) = 1;
  const Graph g = to_undirected(Graph::from_edges(4, std::vector<std::pair<NodeId, NodeId>>{{0, 1}, {2, 3}}));
  io::save_graph(dir, io::NodeDataset{g, Matrix::Ones(4, 2), l, std::vector<std::uint8_t>{0, 1, 2, 0}});
  const io::NodeDataset back = io::load_graph(dir);
  CHECK(back.labels->kind == LabelKind::multi);
  CHECK(back.labels->indicators == l.indicators);
  CHECK(*back.split == std::vector<std::uint8_t>{0, 1, 2, 0});
}

TEST_CASE("to_undirected fixtures") {
  const Graph g = to_undirected(Graph::from_edges(2, std::vector<std::pair<NodeId, NodeId>>{{0, 1}}, true));
  CHECK(std::vector<Index>(g.indptr().begin(), g.indptr().end()) == std::vector<Index>{0, 1, 2});
  CHECK(std::vector<NodeId>(g.indices().begin(), g.indices().end()) == std::vector<NodeId>{1, 0});
  CHECK(!g.directed());
  CHECK(to_undirected(g) == g);
}

TEST_CASE("to_undirected equals the dense union with the transpose") {
  Rng rng(3);
  for (Index n : {20, 57, 200}) {
    std::uniform_int_distribution<NodeId> pick(0, n - 1);
    std::vector<std::pair<NodeId, NodeId>> arcs;
    for (Index e = 0; e < 3 * n; ++e) arcs.emplace_back(pick(rng), pick(rng));
    const Graph d = Graph::from_edges(n, arcs, true);
    const Graph u = to_undirected(d);
    const auto a = dense(d), b = dense(u);
    for (Index i = 0; i < n; ++i) {
      for (Index j = 0; j < n; ++j) {
        const bool expect = i != j && (a[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] ||
                                       a[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)]);
        CHECK(b[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] == expect);
      }
    }
    CHECK(u.is_symmetric());
    CHECK(to_undirected(u) == u);
    check_canonical(u);
  }
}

TEST_CASE("induced_subgraph and replicate") {
  const Graph ring = ring_graph(6);
  const std::vector<NodeId> keep{4, 0, 5};
  const Graph sub = induced_subgraph(ring, keep);
  // ring edges among {4,0,5}: 4-5 and 5-0, relabelled 4->0, 0->1, 5->2
  CHECK(sub.has_arc(0, 2));
  CHECK(sub.has_arc(2, 1));
  CHECK(!sub.has_arc(0, 1));
  const Graph rep = replicate(ring, 3);
  CHECK(rep.num_nodes() == 18);
  CHECK(rep.num_arcs() == 3 * ring.num_arcs());
  CHECK(rep.has_arc(12, 17));
  CHECK(!rep.has_arc(5, 6));
}

TEST_CASE("SBM extremes give disjoint cliques") {
  SbmParams p;
  p.num_nodes = 6;
  p.num_blocks = 2;
  p.p_in = 1.0;
  p.p_out = 0.0;
  p.feat_dim = 2;
  const SbmDataset s = generate_sbm(p);
  for (NodeId i = 0; i < 6; ++i) {
    CHECK(s.graph.degree(i) == 2);
    for (NodeId j : s.graph.neighbors(i)) CHECK(sbm_block_of(i, 6, 2) == sbm_block_of(j, 6, 2));
  }
  CHECK(s.labels.classes == std::vector<Index>{0, 0, 0, 1, 1, 1});
}

TEST_CASE("SBM is reproducible and rejects p_in < p_out") {
  SbmParams p;
  p.seed = 17;
  const SbmDataset a = generate_sbm(p), b = generate_sbm(p);
  CHECK(a.graph == b.graph);
  CHECK(a.features == b.features);
  p.p_in = 0.001;
  CHECK_THROWS_AS(generate_sbm(p), ConfigError);
}

TEST_CASE("SBM edge counts match binomial expectations") {
  SbmParams p;  // 400 nodes, 4 blocks, 0.1 / 0.005
  p.seed = 2;
  const SbmDataset s = generate_sbm(p);
  check_canonical(s.graph);
  CHECK(s.graph.is_symmetric());
  double intra = 0, inter = 0;
  for (NodeId i = 0; i < 400; ++i) {
    for (NodeId j : s.graph.neighbors(i)) {
      if (j < i) continue;
      (sbm_block_of(i, 400, 4) == sbm_block_of(j, 400, 4) ? intra : inter) += 1;
    }
  }
  const double pairs_in = 4 * 100.0 * 99 / 2, pairs_out = 400.0 * 399 / 2 - pairs_in;
  const double mu_in = pairs_in * 0.1, mu_out = pairs_out * 0.005;
  CHECK(std::abs(intra - mu_in) < 3 * std::sqrt(pairs_in * 0.1 * 0.9));
  CHECK(std::abs(inter - mu_out) < 3 * std::sqrt(pairs_out * 0.005 * 0.995));
  const double frac = intra / (intra + inter);
  CHECK(std::abs(frac - mu_in / (mu_in + mu_out)) < 0.03);
}

TEST_CASE("SBM features are one-hot centroids plus noise") {
  SbmParams p;
  p.noise = 0.0;
  const SbmDataset s = generate_sbm(p);
  for (NodeId i = 0; i < p.num_nodes; ++i) {
    for (Index c = 0; c < p.feat_dim; ++c) {
      CHECK(s.features(i, c) == (c == s.labels.classes[static_cast<std::size_t>(i)] ? 1.0 : 0.0));
    }
  }
}

TEST_CASE("diffusion without mixing or noise is constant") {
  DiffusionParams p;
  p.alpha = 0.0;
  p.noise = 0.0;
  p.num_timestamps = 30;
  const SequenceDataset d = generate_diffusion_series(ring_graph(8), p);
  for (const Matrix& f : d.frames) CHECK(f == d.frames.front());
}

TEST_CASE("diffusion on a complete graph contracts toward the mean") {
  DiffusionParams p;
  p.alpha = 0.4;
  p.noise = 0.0;
  p.num_timestamps = 40;
  const SequenceDataset d = generate_diffusion_series(complete_graph(7), p);
  const double mean = d.frames.front().mean();
  double prev = (d.frames.front().array() - mean).abs().maxCoeff();
  for (const Matrix& f : d.frames) {
    CHECK(std::abs(f.mean() - mean) < 1e-12);
    const double dev = (f.array() - mean).abs().maxCoeff();
    CHECK(dev <= prev + 1e-15);
    prev = dev;
  }
  CHECK(prev < 1e-6);
}

TEST_CASE("diffusion step matches the dense random-walk Laplacian") {
  DiffusionParams p;
  p.alpha = 0.5;
  p.noise = 0.0;
  p.num_timestamps = 2;
  const Graph ring = ring_graph(10);
  const SequenceDataset d = generate_diffusion_series(ring, p);
  Matrix l_rw = Matrix::Identity(10, 10);
  for (NodeId i = 0; i < 10; ++i) {
    for (NodeId j : ring.neighbors(i)) l_rw(i, j) -= 1.0 / static_cast<double>(ring.degree(i));
  }
  const Matrix expect = (Matrix::Identity(10, 10) - 0.5 * l_rw) * d.frames[0];
  CHECK((d.frames[1] - expect).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((diffuse_step(ring, d.frames[0], 0.5) - expect).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("diffusion rejects disconnected graphs and bad alpha; output reproducible and bounded") {
  const Graph two = to_undirected(Graph::from_edges(4, std::vector<std::pair<NodeId, NodeId>>{{0, 1}, {2, 3}}));
  CHECK_THROWS_AS(generate_diffusion_series(two, DiffusionParams{}), ConfigError);
  DiffusionParams bad;
  bad.alpha = 1.0;
  CHECK_THROWS_AS(generate_diffusion_series(ring_graph(5), bad), ConfigError);

  DiffusionParams p;
  p.seed = 5;
  p.num_timestamps = 500;
  const SequenceDataset a = generate_diffusion_series(ring_graph(12), p);
  const SequenceDataset b = generate_diffusion_series(ring_graph(12), p);
  CHECK(a.frames == b.frames);
  for (const Matrix& f : a.frames) CHECK(f.allFinite());
  CHECK(a.frames.back().cwiseAbs().maxCoeff() < 100.0);
}

TEST_CASE("sequence datasets validate windows and round-trip") {
  DiffusionParams p;
  p.num_timestamps = 50;
  p.window_in = 3;
  p.window_out = 2;
  SequenceDataset d = generate_diffusion_series(ring_graph(5), p);
  const fs::path dir = scratch_dir("seq");
  io::save_sequence_dataset(dir, d);
  const SequenceDataset back = io::load_sequence_dataset(dir);
  CHECK(back.frames == d.frames);
  CHECK(back.window_in == 3);
  CHECK(back.window_out == 2);
  CHECK(back.graph == d.graph);
  d.window_out = 0;
  CHECK_THROWS_AS(d.validate(), ConfigError);
  d.window_out = 1;
  d.train_fraction = 0.9;
  CHECK_THROWS_AS(d.validate(), ConfigError);

  d.train_fraction = 0.7;
  const auto tr = d.split_range(0), va = d.split_range(1), te = d.split_range(2);
  CHECK(tr.begin == 0);
  CHECK(tr.end == va.begin);
  CHECK(va.end == te.begin);
  CHECK(te.end == 50);
}

TEST_CASE("plain-text fixtures") {
  const fs::path dir = scratch_dir("text");
  std::ofstream(dir / "edges.txt") << "# tiny\n0 1\n1 2\n\n2 0  # wrap\n";
  std::ofstream(dir / "feat.csv") << "1,2\n3,4.5\n-1,0\n";
  const Graph g = io::read_edge_list(dir / "edges.txt", 3, true);
  CHECK(g.num_arcs() == 3);
  CHECK(g.has_arc(2, 0));
  const Matrix f = io::read_feature_csv(dir / "feat.csv");
  CHECK(f.rows() == 3);
  CHECK(f(1, 1) == 4.5);
  std::ofstream(dir / "bad.csv") << "1,2\n3\n";
  CHECK_THROWS_AS(io::read_feature_csv(dir / "bad.csv"), FormatError);
}
