#include "gaan/aggregators.hpp"
#include "gaan/cli.hpp"
#include "gaan/gradcheck_suite.hpp"
#include "gaan/metrics.hpp"
#include "gaan/sampler.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

namespace py = pybind11;
using namespace gaan;

namespace {

py::tuple run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "gaan");
  std::ostringstream out, err;
  int code;
  {
    py::gil_scoped_release release;
    code = cli::run(args, out, err);
  }
  return py::make_tuple(code, out.str(), err.str());
}

/// Aggregates with freshly initialized parameters; returns (output, weights, gates).
py::tuple aggregate_fresh(const std::string& kind, const Matrix& x, const Matrix& z, const std::vector<Index>& lengths,
                    Index heads, Index d_a, Index d_v, Index d_m, Index d_o, std::uint64_t seed) {
  AggregatorConfig cfg;
  cfg.kind = parse_aggregator_kind(kind);
  cfg.heads = heads;
  cfg.d_a = d_a;
  cfg.d_v = d_v;
  cfg.d_m = d_m;
  cfg.d_o = d_o;
  cfg.d_x = x.cols();
  cfg.d_z = z.cols();
  cfg.validate();
  ParamStore store;
  Rng rng(seed);
  init_aggregator_params(cfg, "", store, rng);
  const RaggedMatrix rz(Segments::from_lengths(lengths), z);
  AggregateProbe probe;
  AggregateOptions opts;
  opts.probe = &probe;
  Matrix out = aggregate_eval(cfg, "", store, x, rz, opts);
  return py::make_tuple(out, probe.weights, probe.gates);
}

/// Merged and unmerged level sizes of one sampled hierarchy.
py::tuple hierarchy_sizes(Index num_nodes, std::vector<Index> indptr, std::vector<NodeId> indices,
                          const std::vector<NodeId>& seeds, const std::vector<std::string>& fanouts,
                          std::uint64_t seed) {
  const Graph g = Graph::canonicalize(num_nodes, std::move(indptr), std::move(indices), true);
  std::vector<Fanout> f;
  for (const auto& s : fanouts) f.push_back(Fanout::parse(s));
  Rng rng(seed);
  const BatchHierarchy h = build_hierarchy(g, seeds, f, rng);
  std::vector<double> merged;
  for (const auto& level : h.levels) merged.push_back(static_cast<double>(level.size()));
  return py::make_tuple(merged, unmerged_level_sizes(h));
}

double single_label_micro_f1(const Matrix& logits, const std::vector<Index>& classes) {
  LabelSet l;
  l.num_classes = logits.cols();
  l.classes = classes;
  return micro_f1(logits, l);
}

py::dict forecast(const Matrix& pred, const Matrix& truth, bool mask_zeros) {
  const ForecastMetrics m = forecast_metrics(pred, truth, mask_zeros);
  py::dict d;
  d["mae"] = m.mae;
  d["rmse"] = m.rmse;
  d["mape"] = m.mape;
  d["count"] = m.count;
  return d;
}

py::tuple gradcheck_suite(std::uint64_t seed) {
  GradSuiteOptions opts;
  opts.seed = seed;
  const GradSuiteResult r = run_gradcheck_suite(opts);
  return py::make_tuple(r.passed(), r.max_rel_error(), r.table());
}

}  // namespace

PYBIND11_MODULE(_gaan, m) {
  m.doc() = "Gated attention networks: aggregators, sampler, metrics and the gaan command line";
  py::register_exception<Error>(m, "GaanError", PyExc_ValueError);

  m.def("run_cli", &run_cli, py::arg("args"), "Run a gaan subcommand; returns (exit_code, stdout, stderr).");
  m.def("aggregate", &aggregate_fresh, py::arg("kind"), py::arg("x"), py::arg("z"), py::arg("lengths"), py::arg("heads") = 1,
        py::arg("d_a") = 8, py::arg("d_v") = 8, py::arg("d_m") = 8, py::arg("d_o") = 8, py::arg("seed") = 0);
  m.def("hierarchy_sizes", &hierarchy_sizes, py::arg("num_nodes"), py::arg("indptr"), py::arg("indices"),
        py::arg("seeds"), py::arg("fanouts"), py::arg("seed") = 0);
  m.def("micro_f1", &single_label_micro_f1, py::arg("logits"), py::arg("classes"));
  m.def("forecast_metrics", &forecast, py::arg("pred"), py::arg("truth"), py::arg("mask_zeros") = false);
  m.def("gradcheck", &gradcheck_suite, py::arg("seed") = 0, "Run the gradient-check suite; returns (passed, max_rel_error, table).");
  m.attr("aggregator_kinds") = [] {
    std::vector<std::string> names;
    for (AggregatorKind k : kAllAggregatorKinds) names.emplace_back(to_string(k));
    return names;
  }();
}
