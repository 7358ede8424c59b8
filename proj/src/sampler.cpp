#include "gaan/sampler.hpp"

#include <algorithm>
#include <cstdio>
#include <functional>
#include <numeric>
#include <sstream>

namespace gaan {

Fanout Fanout::at_most(Index s) {
  if (s < 1) throw ConfigError("fanout must be positive");
  return Fanout{s};
}

Fanout Fanout::parse(const std::string& text) {
  if (text == "all") return all();
  try {
    std::size_t used = 0;
    const long long v = std::stoll(text, &used);
    if (used != text.size()) throw ConfigError("bad fanout '" + text + "'");
    return at_most(static_cast<Index>(v));
  } catch (const std::logic_error&) {
    throw ConfigError("bad fanout '" + text + "'");
  }
}

std::string Fanout::to_string() const { return is_all() ? "all" : std::to_string(limit); }

void SampleConfig::validate() const {
  if (fanouts.empty()) throw ConfigError("need at least one sampling step");
  for (const auto& f : fanouts) {
    if (!f.is_all() && f.limit < 1) throw ConfigError("fanout must be positive");
  }
}

std::vector<NodeId> sample_neighbors(const Graph& g, NodeId node, Fanout s, Rng& rng) {
  const auto nb = g.neighbors(node);
  std::vector<NodeId> pool(nb.begin(), nb.end());
  const auto n = static_cast<Index>(pool.size());
  if (s.is_all() || s.limit >= n) return pool;
  // partial Fisher-Yates: the first `limit` slots end up a uniform subset
  for (Index i = 0; i < s.limit; ++i) {
    std::uniform_int_distribution<Index> pick(i, n - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  pool.resize(static_cast<std::size_t>(s.limit));
  std::sort(pool.begin(), pool.end());
  return pool;
}

BatchHierarchy build_hierarchy(const Graph& g, std::span<const NodeId> seeds, std::span<const Fanout> fanouts,
                               Rng& rng) {
  if (seeds.empty()) throw ConfigError("build_hierarchy: no seed nodes");
  for (NodeId s : seeds) {
    if (s < 0 || s >= g.num_nodes()) throw ConfigError("build_hierarchy: seed " + std::to_string(s) + " out of range");
  }
  BatchHierarchy h;
  std::vector<NodeId> level(seeds.begin(), seeds.end());
  std::sort(level.begin(), level.end());
  level.erase(std::unique(level.begin(), level.end()), level.end());
  h.levels.push_back(level);

  for (const Fanout& f : fanouts) {
    const auto& cur = h.levels.back();
    std::vector<std::vector<NodeId>> picks;
    picks.reserve(cur.size());
    std::vector<NodeId> next(cur.begin(), cur.end());
    for (NodeId node : cur) {
      picks.push_back(sample_neighbors(g, node, f, rng));
      next.insert(next.end(), picks.back().begin(), picks.back().end());
    }
    std::sort(next.begin(), next.end());
    next.erase(std::unique(next.begin(), next.end()), next.end());

    auto pos = [&next](NodeId id) {
      return static_cast<Index>(std::lower_bound(next.begin(), next.end(), id) - next.begin());
    };
    LevelMap map;
    map.offsets.reserve(cur.size() + 1);
    map.offsets.push_back(0);
    for (std::size_t i = 0; i < cur.size(); ++i) {
      for (NodeId j : picks[i]) map.neighbor_pos.push_back(pos(j));
      map.offsets.push_back(static_cast<Index>(map.neighbor_pos.size()));
      map.self_pos.push_back(pos(cur[i]));
    }
    h.maps.push_back(std::move(map));
    h.levels.push_back(std::move(next));
  }
  return h;
}

BatchHierarchy build_hierarchy(const Graph& g, std::span<const NodeId> seeds, const SampleConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  return build_hierarchy(g, seeds, cfg.fanouts, rng);
}

std::vector<double> unmerged_level_sizes(const BatchHierarchy& h) {
  std::vector<double> sizes(h.levels.size(), 0.0);
  std::vector<std::vector<char>> mark;
  for (const auto& lv : h.levels) mark.emplace_back(lv.size(), 0);
  std::vector<Index> cur, next;
  for (std::size_t s = 0; s < h.levels.front().size(); ++s) {
    cur.assign(1, static_cast<Index>(s));
    sizes[0] += 1.0;
    for (std::size_t l = 0; l < h.maps.size(); ++l) {
      const auto& map = h.maps[l];
      auto& seen = mark[l + 1];
      next.clear();
      auto visit = [&](Index p) {
        if (!seen[static_cast<std::size_t>(p)]) {
          seen[static_cast<std::size_t>(p)] = 1;
          next.push_back(p);
        }
      };
      for (Index i : cur) {
        visit(map.self_pos[static_cast<std::size_t>(i)]);
        for (Index k = map.offsets[static_cast<std::size_t>(i)]; k < map.offsets[static_cast<std::size_t>(i) + 1]; ++k) {
          visit(map.neighbor_pos[static_cast<std::size_t>(k)]);
        }
      }
      sizes[l + 1] += static_cast<double>(next.size());
      for (Index p : next) seen[static_cast<std::size_t>(p)] = 0;
      std::swap(cur, next);
    }
  }
  return sizes;
}

namespace {

HierarchyStats accumulate_stats(const Graph& g, const SampleConfig& cfg, Index repetitions,
                                const std::function<std::vector<NodeId>(Index)>& seeds_for) {
  cfg.validate();
  if (repetitions < 1) throw ConfigError("repetitions must be >= 1");
  HierarchyStats st;
  st.repetitions = repetitions;
  st.merged_mean.assign(static_cast<std::size_t>(cfg.depth() + 1), 0.0);
  st.unmerged_mean.assign(static_cast<std::size_t>(cfg.depth() + 1), 0.0);
  for (Index r = 0; r < repetitions; ++r) {
    Rng rng = derive_rng(cfg.seed, {static_cast<std::uint64_t>(r)});
    const auto seeds = seeds_for(r);
    const auto h = build_hierarchy(g, seeds, cfg.fanouts, rng);
    const auto unmerged = unmerged_level_sizes(h);
    for (std::size_t l = 0; l < h.levels.size(); ++l) {
      st.merged_mean[l] += static_cast<double>(h.levels[l].size());
      st.unmerged_mean[l] += unmerged[l];
    }
  }
  for (auto& v : st.merged_mean) v /= static_cast<double>(repetitions);
  for (auto& v : st.unmerged_mean) v /= static_cast<double>(repetitions);
  return st;
}

}  // namespace

HierarchyStats hierarchy_stats(const Graph& g, std::span<const NodeId> seeds, const SampleConfig& cfg,
                               Index repetitions) {
  std::vector<NodeId> fixed(seeds.begin(), seeds.end());
  return accumulate_stats(g, cfg, repetitions, [&fixed](Index) { return fixed; });
}

HierarchyStats hierarchy_stats_random_seeds(const Graph& g, Index num_seeds, const SampleConfig& cfg,
                                            Index repetitions) {
  if (num_seeds < 1 || num_seeds > g.num_nodes()) throw ConfigError("num_seeds must be in [1, num_nodes]");
  return accumulate_stats(g, cfg, repetitions, [&](Index r) {
    Rng rng = derive_rng(cfg.seed, {static_cast<std::uint64_t>(r), 1});
    std::vector<NodeId> all(static_cast<std::size_t>(g.num_nodes()));
    std::iota(all.begin(), all.end(), NodeId{0});
    std::shuffle(all.begin(), all.end(), rng);
    all.resize(static_cast<std::size_t>(num_seeds));
    return all;
  });
}

std::string HierarchyStats::table() const {
  std::ostringstream os;
  char buf[128];
  os << "Strategy/Sample Step ";
  for (std::size_t l = 0; l < merged_mean.size(); ++l) {
    std::snprintf(buf, sizeof(buf), "%12s", ("|B" + std::to_string(l) + "|").c_str());
    os << buf;
  }
  os << "\n";
  auto row = [&](const char* label, const std::vector<double>& v) {
    std::snprintf(buf, sizeof(buf), "%-21s", label);
    os << buf;
    for (double x : v) {
      std::snprintf(buf, sizeof(buf), "%12.1f", x);
      os << buf;
    }
    os << "\n";
  };
  row("Sample without merge", unmerged_mean);
  row("Sample and merge", merged_mean);
  return os.str();
}

std::string HierarchyStats::report() const {
  std::ostringstream os;
  char buf[160];
  for (std::size_t l = 0; l < merged_mean.size(); ++l) {
    std::snprintf(buf, sizeof(buf), "step=%zu merged_mean=%.6f unmerged_mean=%.6f repetitions=%td\n", l,
                  merged_mean[l], unmerged_mean[l], repetitions);
    os << buf;
  }
  return os.str();
}

}  // namespace gaan
