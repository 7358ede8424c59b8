#include "gaan/generators.hpp"
#include "gaan/sampler.hpp"
#include "oracles/sampler_oracle.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

using namespace gaan;

namespace {

Graph star(Index leaves) {
  std::vector<std::pair<NodeId, NodeId>> arcs;
  for (NodeId l = 1; l <= leaves; ++l) arcs.emplace_back(0, l);
  return to_undirected(Graph::from_edges(leaves + 1, arcs));
}

/// Complete binary out-tree on n nodes (arcs point from parent to child, so
/// no walk revisits a node).
Graph binary_tree(Index n) {
  std::vector<std::pair<NodeId, NodeId>> arcs;
  for (NodeId i = 1; i < n; ++i) arcs.emplace_back((i - 1) / 2, i);
  return Graph::from_edges(n, arcs, true);
}

void check_invariants(const Graph& g, const BatchHierarchy& h, std::span<const Fanout> fanouts) {
  REQUIRE(h.levels.size() == fanouts.size() + 1);
  for (Index l = 0; l < h.depth(); ++l) {
    const auto& cur = h.levels[static_cast<std::size_t>(l)];
    const auto& next = h.levels[static_cast<std::size_t>(l + 1)];
    CHECK(std::is_sorted(cur.begin(), cur.end()));
    CHECK(std::adjacent_find(cur.begin(), cur.end()) == cur.end());
    const LevelMap& m = h.maps[static_cast<std::size_t>(l)];
    REQUIRE(m.offsets.size() == cur.size() + 1);
    for (std::size_t p = 0; p < cur.size(); ++p) {
      const NodeId node = cur[p];
      REQUIRE(m.self_pos[p] >= 0);
      REQUIRE(m.self_pos[p] < static_cast<Index>(next.size()));
      CHECK(next[static_cast<std::size_t>(m.self_pos[p])] == node);
      const Fanout s = fanouts[static_cast<std::size_t>(l)];
      const Index expect = s.is_all() ? g.degree(node) : std::min(g.degree(node), s.limit);
      CHECK(m.offsets[p + 1] - m.offsets[p] == expect);
      std::set<NodeId> seen;
      for (Index k = m.offsets[p]; k < m.offsets[p + 1]; ++k) {
        const Index pos = m.neighbor_pos[static_cast<std::size_t>(k)];
        REQUIRE(pos >= 0);
        REQUIRE(pos < static_cast<Index>(next.size()));
        const NodeId nb = next[static_cast<std::size_t>(pos)];
        CHECK(g.has_arc(node, nb));
        CHECK(seen.insert(nb).second);
      }
    }
  }
}

}  // namespace

TEST_CASE("fanout parsing") {
  CHECK(Fanout::parse("all").is_all());
  CHECK(Fanout::parse("15").limit == 15);
  CHECK(Fanout::at_most(3).to_string() == "3");
  CHECK_THROWS(Fanout::parse("0"));
  CHECK_THROWS(Fanout::parse("-2"));
  CHECK_THROWS(Fanout::parse("many"));
  SampleConfig c;
  CHECK_THROWS(c.validate());
}

TEST_CASE("sample_neighbors returns the whole neighborhood when the cap does not bind") {
  const Graph s = star(3);
  Rng rng(1);
  const auto all = sample_neighbors(s, 0, Fanout::all(), rng);
  CHECK(all == std::vector<NodeId>{1, 2, 3});
  const Rng before = rng;
  CHECK(sample_neighbors(s, 0, Fanout::at_most(5), rng) == all);
  CHECK(rng == before);  // no draw when the cap is slack
}

TEST_CASE("sample_neighbors is uniform over subsets") {
  const Graph k5 = complete_graph(5);
  Rng rng(2);
  std::map<std::vector<NodeId>, int> counts;
  const int reps = 60000;
  for (int r = 0; r < reps; ++r) {
    auto s = sample_neighbors(k5, 0, Fanout::at_most(2), rng);
    REQUIRE(s.size() == 2);
    CHECK(s[0] != s[1]);
    ++counts[s];
  }
  CHECK(counts.size() == 6);
  const double p = 1.0 / 6.0, sigma = std::sqrt(reps * p * (1 - p));
  for (const auto& [pair, c] : counts) CHECK(std::abs(c - reps * p) < 3.5 * sigma);
}

TEST_CASE("star graph expands fully and isolated seeds keep an empty row") {
  const Graph s = star(4);
  const std::vector<NodeId> seeds{0};
  const std::vector<Fanout> f{Fanout::all()};
  Rng rng(3);
  const BatchHierarchy h = build_hierarchy(s, seeds, f, rng);
  CHECK(h.levels[0] == std::vector<NodeId>{0});
  CHECK(h.levels[1] == std::vector<NodeId>{0, 1, 2, 3, 4});
  check_invariants(s, h, f);

  const Graph iso = Graph::from_edges(3, std::vector<std::pair<NodeId, NodeId>>{{0, 1}, {1, 0}}, false);
  const std::vector<NodeId> lone{2};
  const BatchHierarchy hi = build_hierarchy(iso, lone, f, rng);
  CHECK(hi.levels[1] == std::vector<NodeId>{2});
  CHECK(hi.maps[0].offsets == std::vector<Index>{0, 0});
}

TEST_CASE("hierarchy invariants and determinism on random graphs") {
  SbmParams p;
  p.num_nodes = 300;
  p.seed = 4;
  const Graph g = generate_sbm(p).graph;
  const std::vector<Fanout> f{Fanout::at_most(5), Fanout::at_most(3), Fanout::all()};
  const std::vector<NodeId> seeds{7, 3, 250, 7, 100};
  Rng a(9), b(9);
  const BatchHierarchy ha = build_hierarchy(g, seeds, f, a), hb = build_hierarchy(g, seeds, f, b);
  CHECK(ha.levels == hb.levels);
  CHECK(ha.levels[0] == std::vector<NodeId>{3, 7, 100, 250});
  check_invariants(g, ha, f);
}

TEST_CASE("merged levels equal the set-union oracle on the same stream") {
  SbmParams p;
  p.seed = 5;
  const Graph g = generate_sbm(p).graph;
  const std::vector<Fanout> f{Fanout::at_most(4), Fanout::at_most(4), Fanout::at_most(2)};
  Rng pick(6);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<NodeId> seeds;
    std::uniform_int_distribution<NodeId> u(0, g.num_nodes() - 1);
    for (int i = 0; i < 16; ++i) seeds.push_back(u(pick));
    Rng r1(static_cast<std::uint64_t>(trial)), r2(static_cast<std::uint64_t>(trial));
    const BatchHierarchy h = build_hierarchy(g, seeds, f, r1);
    const oracle::SetUnionHierarchy o = oracle::set_union_hierarchy(g, seeds, f, r2);
    for (std::size_t l = 0; l < h.levels.size(); ++l) {
      CHECK(h.levels[l] == std::vector<NodeId>(o.levels[l].begin(), o.levels[l].end()));
    }
    // same samples per node
    for (std::size_t l = 0; l < h.maps.size(); ++l) {
      const auto& m = h.maps[l];
      for (std::size_t pidx = 0; pidx < h.levels[l].size(); ++pidx) {
        std::vector<NodeId> got;
        for (Index k = m.offsets[pidx]; k < m.offsets[pidx + 1]; ++k) {
          got.push_back(h.levels[l + 1][static_cast<std::size_t>(m.neighbor_pos[static_cast<std::size_t>(k)])]);
        }
        CHECK(got == o.samples[l].at(h.levels[l][pidx]));
      }
    }
    const auto unmerged = unmerged_level_sizes(h);
    CHECK(unmerged == oracle::expanded_level_sizes(o));
    for (std::size_t l = 0; l < unmerged.size(); ++l) CHECK(static_cast<double>(h.levels[l].size()) <= unmerged[l]);
  }
}

TEST_CASE("first unmerged step is |B0| + sum min(deg, S1)") {
  SbmParams p;
  p.seed = 6;
  const Graph g = generate_sbm(p).graph;
  const std::vector<NodeId> seeds{0, 5, 17, 120, 399, 33};
  const std::vector<Fanout> f{Fanout::at_most(3), Fanout::at_most(3)};
  Rng rng(7);
  const auto sizes = unmerged_level_sizes(build_hierarchy(g, seeds, f, rng));
  double expect = 6;
  for (NodeId s : seeds) expect += static_cast<double>(std::min<Index>(g.degree(s), 3));
  CHECK(sizes[1] == expect);
}

TEST_CASE("trees have nothing to merge") {
  const Graph t = binary_tree(63);
  const std::vector<NodeId> seeds{1, 2};
  SampleConfig c;
  c.fanouts = {Fanout::at_most(2), Fanout::at_most(2), Fanout::at_most(2)};
  const HierarchyStats st = hierarchy_stats(t, seeds, c, 10);
  for (std::size_t l = 0; l < 4; ++l) CHECK(st.merged_mean[l] == st.unmerged_mean[l]);
  // each seed owns a subtree: 1, 3, 7, 15 nodes at depths 0..3
  CHECK(st.merged_mean[1] == 2 * 3);
  CHECK(st.merged_mean[3] == 2 * 15);
  CHECK(st.repetitions == 10);
}

TEST_CASE("two seeds sharing every neighbor merge maximally") {
  // seeds 0 and 1 both connect to 2..5 only
  std::vector<std::pair<NodeId, NodeId>> arcs;
  for (NodeId s : {0, 1}) {
    for (NodeId n = 2; n < 6; ++n) arcs.emplace_back(s, n);
  }
  const Graph g = to_undirected(Graph::from_edges(6, arcs));
  const std::vector<NodeId> seeds{0, 1};
  const std::vector<Fanout> f{Fanout::all()};
  Rng rng(8);
  const BatchHierarchy h = build_hierarchy(g, seeds, f, rng);
  CHECK(h.levels[1].size() == 6);
  CHECK(unmerged_level_sizes(h)[1] == 10);
}

TEST_CASE("hierarchy_stats report format and random-seed variant") {
  SbmParams p;
  p.seed = 7;
  const Graph g = generate_sbm(p).graph;
  SampleConfig c;
  c.fanouts = {Fanout::at_most(15), Fanout::at_most(15)};
  c.seed = 3;
  const HierarchyStats st = hierarchy_stats_random_seeds(g, 32, c, 10);
  CHECK(st.merged_mean[0] == 32);
  CHECK(st.merged_mean[2] <= st.unmerged_mean[2]);
  const std::string rep = st.report();
  CHECK(rep.find("step=0 merged_mean=32.000000 unmerged_mean=32.000000 repetitions=10\n") == 0);
  CHECK(st.table().find("Sample and merge") != std::string::npos);
  const HierarchyStats again = hierarchy_stats_random_seeds(g, 32, c, 10);
  CHECK(again.report() == rep);
}
