#include "gaan/gradcheck_suite.hpp"

#include "gaan/ggru.hpp"

#include <cstdio>
#include <sstream>

namespace gaan {

void GradSuiteOptions::validate() const {
  if (num_nodes < 2 || num_nodes > kGradCheckMaxNodes) {
    throw ConfigError("gradcheck: num_nodes must be in [2, " + std::to_string(kGradCheckMaxNodes) + "]");
  }
  if (dim < 1 || dim > kGradCheckMaxDim) {
    throw ConfigError("gradcheck: dim must be in [1, " + std::to_string(kGradCheckMaxDim) + "]");
  }
  for (Index k : heads) {
    if (k < 1 || k > kGradCheckMaxDim) throw ConfigError("gradcheck: heads must be in [1, 8]");
  }
  if (kinds.empty() && !include_ggru) throw ConfigError("gradcheck: nothing to check");
  if (!(tolerance > 0.0)) throw ConfigError("gradcheck: tolerance must be positive");
}

namespace {

Matrix gaussian(Index rows, Index cols, Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

/// Shared driver: `build` records the output on a tape from the input leaves.
GradCheckReport check(ParamStore& store, std::vector<std::pair<std::string, Matrix>>& inputs, const Matrix& weights,
                      const std::function<ad::Var(ad::Tape&, const std::vector<ad::Var>&)>& build,
                      double tolerance, const std::string& corrupt) {
  auto forward = [&](ad::Tape& tape, std::vector<ad::Var>& leaves) {
    leaves.clear();
    for (auto& in : inputs) leaves.push_back(tape.variable(in.second));
    return ad::weighted_sum(build(tape, leaves), weights);
  };

  store.zero_grad();
  std::vector<GradCheckTarget> targets;
  {
    ad::Tape tape(&store);
    std::vector<ad::Var> leaves;
    tape.backward(forward(tape, leaves));
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      targets.push_back({inputs[i].first, &inputs[i].second, tape.grad(leaves[i])});
    }
  }
  for (auto& [name, t] : store.tensors()) targets.push_back({name, &t.value, t.grad});
  for (auto& t : targets) {
    if (!corrupt.empty() && t.name == corrupt && t.analytic.size() > 0) t.analytic(0, 0) += 1.0;
  }

  auto loss = [&]() {
    ad::Tape tape(&store);
    std::vector<ad::Var> leaves;
    return forward(tape, leaves).value()(0, 0);
  };
  GradCheckReport report = gradcheck(loss, std::move(targets), tolerance);
  store.zero_grad();
  return report;
}

}  // namespace

GradCheckReport gradcheck_aggregator(const AggregatorConfig& cfg, const Segments& segs, std::uint64_t seed,
                                     double tolerance, const std::string& corrupt) {
  Rng rng = derive_rng(seed, {11});
  ParamStore store;
  init_aggregator_params(cfg, "", store, rng);
  // non-zero biases so their gradients are exercised away from init
  for (auto& [name, t] : store.tensors()) {
    if (name.ends_with(".bias")) t.value = 0.1 * gaussian(t.value.rows(), t.value.cols(), rng);
  }
  std::vector<std::pair<std::string, Matrix>> inputs{{"input.x", gaussian(segs.count(), cfg.d_x, rng)},
                                                     {"input.z", gaussian(segs.total_rows(), cfg.d_z, rng)}};
  const Matrix w = gaussian(segs.count(), cfg.d_o, rng);
  return check(
      store, inputs, w,
      [&](ad::Tape&, const std::vector<ad::Var>& in) { return aggregate(cfg, "", in[0], in[1], segs); }, tolerance,
      corrupt);
}

GradCheckReport gradcheck_ggru_cell(const AggregatorConfig& base, const Graph& g, Index input_dim, Index state_dim,
                                    std::uint64_t seed, double tolerance, const std::string& corrupt) {
  Rng rng = derive_rng(seed, {12});
  const GGRUCell cell(base, input_dim, state_dim, "");
  ParamStore store;
  init_params(cell.param_specs(), store, rng);
  for (auto& [name, t] : store.tensors()) {
    if (name.ends_with(".bias")) t.value = 0.1 * gaussian(t.value.rows(), t.value.cols(), rng);
  }
  const GraphIndex gi = GraphIndex::from_graph(g);
  std::vector<std::pair<std::string, Matrix>> inputs{{"input.x", gaussian(g.num_nodes(), input_dim, rng)},
                                                     {"input.h_prev", gaussian(g.num_nodes(), state_dim, rng)}};
  const Matrix w = gaussian(g.num_nodes(), state_dim, rng);
  return check(
      store, inputs, w, [&](ad::Tape&, const std::vector<ad::Var>& in) { return cell.step(gi, in[0], in[1]); },
      tolerance, corrupt);
}

Graph random_connected_graph(Index n, Index extra_edges, Rng& rng) {
  std::vector<std::pair<NodeId, NodeId>> arcs;
  auto link = [&arcs](NodeId a, NodeId b) {
    arcs.emplace_back(a, b);
    arcs.emplace_back(b, a);
  };
  for (NodeId i = 1; i < n; ++i) link(i, std::uniform_int_distribution<NodeId>(0, i - 1)(rng));
  std::uniform_int_distribution<NodeId> pick(0, n - 1);
  for (Index e = 0; e < extra_edges; ++e) link(pick(rng), pick(rng));
  return Graph::from_edges(n, arcs, false);
}

GradSuiteResult run_gradcheck_suite(const GradSuiteOptions& opts) {
  opts.validate();
  GradSuiteResult res;
  std::uint64_t case_id = 0;
  for (AggregatorKind kind : opts.kinds) {
    for (Index heads : opts.heads) {
      Rng rng = derive_rng(opts.seed, {1, case_id});
      AggregatorConfig cfg;
      cfg.kind = kind;
      cfg.heads = heads;
      cfg.d_a = cfg.d_v = cfg.d_m = cfg.d_o = cfg.d_x = cfg.d_z = opts.dim;
      std::vector<Index> lengths;
      std::uniform_int_distribution<Index> deg(1, 4);
      for (Index i = 0; i < opts.num_nodes; ++i) lengths.push_back(deg(rng));
      const Segments segs = Segments::from_lengths(lengths);
      res.cases.push_back({"aggregator=" + std::string(to_string(kind)) + " heads=" + std::to_string(heads),
                           gradcheck_aggregator(cfg, segs, opts.seed + case_id, opts.tolerance, opts.corrupt)});
      ++case_id;
      if (cfg.is_pool()) break;  // head count does not apply
    }
  }
  if (opts.include_ggru) {
    for (AggregatorKind kind : opts.kinds) {
      Rng rng = derive_rng(opts.seed, {2, case_id});
      const Graph g = random_connected_graph(opts.num_nodes, opts.num_nodes / 2, rng);
      AggregatorConfig base;
      base.kind = kind;
      base.heads = opts.heads.empty() ? 1 : opts.heads.back();
      base.d_a = base.d_v = base.d_m = opts.dim;
      const Index d = std::min<Index>(opts.dim, 3);
      res.cases.push_back({"ggru_cell=" + std::string(to_string(kind)),
                           gradcheck_ggru_cell(base, g, d, d, opts.seed + case_id, opts.tolerance, opts.corrupt)});
      ++case_id;
    }
  }
  return res;
}

bool GradSuiteResult::passed() const {
  for (const auto& c : cases) {
    if (!c.report.passed()) return false;
  }
  return true;
}

double GradSuiteResult::max_rel_error() const {
  double m = 0.0;
  for (const auto& c : cases) m = std::max(m, c.report.max_rel_error());
  return m;
}

std::vector<std::string> GradSuiteResult::failing() const {
  std::vector<std::string> out;
  for (const auto& c : cases) {
    for (const auto& name : c.report.failing()) out.push_back(c.label + " tensor=" + name);
  }
  return out;
}

std::string GradSuiteResult::table() const {
  std::ostringstream os;
  char buf[256];
  for (const auto& c : cases) {
    for (const auto& e : c.report.entries) {
      std::snprintf(buf, sizeof(buf), "%s tensor=%s size=%td max_rel_error=%.3e status=%s\n", c.label.c_str(),
                    e.name.c_str(), e.size, e.max_rel_error, e.max_rel_error < c.report.tolerance ? "ok" : "FAIL");
      os << buf;
    }
  }
  return os.str();
}

}  // namespace gaan
