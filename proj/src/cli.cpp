#include "gaan/cli.hpp"

#include "gaan/container.hpp"
#include "gaan/generators.hpp"
#include "gaan/gradcheck_suite.hpp"
#include "gaan/sampler.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

namespace gaan::cli {

namespace fs = std::filesystem;

namespace {

// ---------------------------------------------------------------- json helpers

const json& empty_object() {
  static const json e = json::object();
  return e;
}

const json& section(const json& j, const char* key, const std::string& path) {
  if (!j.contains(key)) return empty_object();
  const json& s = j.at(key);
  if (!s.is_object()) throw ConfigError(path + key + ": expected an object");
  return s;
}

template <class T>
void read(const json& j, const char* key, T& out, const std::string& path) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(path + key + ": wrong type (" + j.at(key).dump() + ")");
  }
}

std::vector<Fanout> read_fanouts(const json& j, const char* key, const std::string& path,
                                 std::vector<Fanout> fallback) {
  if (!j.contains(key)) return fallback;
  const json& a = j.at(key);
  if (!a.is_array()) throw ConfigError(path + key + ": expected a list of counts or \"all\"");
  std::vector<Fanout> out;
  for (const json& e : a) {
    if (e.is_string()) {
      out.push_back(Fanout::parse(e.get<std::string>()));
    } else if (e.is_number_integer()) {
      out.push_back(Fanout::at_most(e.get<Index>()));
    } else {
      throw ConfigError(path + key + ": entries must be positive integers or \"all\"");
    }
  }
  return out;
}

json fanouts_json(const std::vector<Fanout>& f) {
  json a = json::array();
  for (const auto& x : f) {
    if (x.is_all()) {
      a.push_back("all");
    } else {
      a.push_back(x.limit);
    }
  }
  return a;
}

void read_schedule(const json& j, TrainSchedule& s, const std::string& path) {
  read(j, "initial_lr", s.initial_lr, path);
  read(j, "min_lr", s.min_lr, path);
  read(j, "decay_factor", s.decay_factor, path);
  read(j, "plateau_patience", s.plateau_patience, path);
  read(j, "stop_patience", s.stop_patience, path);
  read(j, "clip_norm", s.clip_norm, path);
  read(j, "batch_size", s.batch_size, path);
  read(j, "max_epochs", s.max_epochs, path);
}

json schedule_json(const TrainSchedule& s) {
  return json{{"initial_lr", s.initial_lr},         {"min_lr", s.min_lr},
              {"decay_factor", s.decay_factor},     {"plateau_patience", s.plateau_patience},
              {"stop_patience", s.stop_patience},   {"clip_norm", s.clip_norm},
              {"batch_size", s.batch_size},         {"max_epochs", s.max_epochs}};
}

void read_aggregator(const json& j, AggregatorConfig& a, const std::string& path) {
  read(j, "heads", a.heads, path);
  read(j, "d_a", a.d_a, path);
  read(j, "d_v", a.d_v, path);
  read(j, "d_m", a.d_m, path);
  read(j, "gate_mean", a.gate_mean, path);
}

void aggregator_json(json& j, const AggregatorConfig& a) {
  j["heads"] = a.heads;
  j["d_a"] = a.d_a;
  j["d_v"] = a.d_v;
  j["d_m"] = a.d_m;
  j["gate_mean"] = a.gate_mean;
}

void check_task(const json& j, const char* expected) {
  if (j.contains("task") && j.at("task") != expected) {
    throw ConfigError("task: expected \"" + std::string(expected) + "\", got " + j.at("task").dump());
  }
}

void check_precision(const std::string& p) {
  if (p != "f64") throw ConfigError("precision: only \"f64\" is supported (got \"" + p + "\")");
}

void reject_unknown(const json& input, const json& effective) {
  const auto unknown = unknown_keys(input, effective);
  if (!unknown.empty()) {
    std::string msg = "unknown config key";
    msg += unknown.size() > 1 ? "s: " : ": ";
    for (std::size_t i = 0; i < unknown.size(); ++i) msg += (i ? ", " : "") + unknown[i];
    throw ConfigError(msg);
  }
}

void require_path(const std::string& value, const char* key) {
  if (value.empty()) throw ConfigError("missing required key '" + std::string(key) + "'");
  if (!fs::exists(value)) throw ConfigError(std::string(key) + ": path '" + value + "' does not exist");
}

// ---------------------------------------------------------------- output helpers

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot write " + path.string());
  os << text;
}

std::string join_lines(const std::vector<std::string>& lines) {
  std::string s;
  for (const auto& l : lines) s += l + "\n";
  return s;
}

std::string timing_text(const std::vector<double>& wall) {
  std::string s;
  char buf[96];
  for (std::size_t i = 0; i < wall.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "epoch=%zu wall_time=%.6f\n", i + 1, wall[i]);
    s += buf;
  }
  return s;
}

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
};

/// --out beats GAAN_OUT_DIR, which beats the config file.
std::string resolve_out_dir(const Overrides& ov, const std::string& configured) {
  if (ov.out) return *ov.out;
  if (const char* env = std::getenv("GAAN_OUT_DIR"); env && *env) return env;
  return configured;
}

void apply_thread_env() {
  if (const char* env = std::getenv("GAAN_NUM_THREADS"); env && *env) {
    char* end = nullptr;
    const long n = std::strtol(env, &end, 10);
    if (*end != '\0' || n < 1) throw ConfigError("GAAN_NUM_THREADS must be a positive integer");
    Eigen::setNbThreads(static_cast<int>(n));
  }
}

json load_config_arg(const std::string& path) {
  if (path.empty()) return json::object();
  return read_json_file(path);
}

// ---------------------------------------------------------------- node classification

struct NodeData {
  io::NodeDataset data;
  NodeSplits splits;
  Matrix features;  ///< normalized if requested
};

NodeData load_node_data(NodeRunConfig& cfg) {
  require_path(cfg.dataset, "dataset");
  NodeData nd;
  nd.data = io::load_graph(cfg.dataset);
  if (!nd.data.labels) throw ConfigError("dataset: '" + cfg.dataset + "' has no labels");
  const Index n = nd.data.graph.num_nodes();
  nd.splits = nd.data.split ? NodeSplits::from_tags(*nd.data.split)
                            : NodeSplits::random(n, cfg.train_fraction, cfg.val_fraction, cfg.seed);
  auto& m = cfg.train.model;
  m.input_dim = nd.data.features.cols();
  m.num_classes = nd.data.labels->num_classes;
  m.output = nd.data.labels->kind == LabelKind::single ? OutputKind::softmax_single : OutputKind::sigmoid_multi;
  cfg.train.seed = cfg.seed;
  cfg.train.validate();
  nd.features = cfg.train.normalize_features
                    ? FeatureNormalizer::fit(nd.data.features, nd.splits.train).apply(nd.data.features)
                    : nd.data.features;
  return nd;
}

std::string node_report(const EvalResult& val, const EvalResult& test, const char* fanout) {
  std::string s = std::string("split=val fanout=") + fanout + "\n" + val.report();
  s += std::string("split=test fanout=") + fanout + "\n" + test.report();
  return s;
}

int cmd_train_nc(const json& raw, const Overrides& ov, std::ostream& out) {
  NodeRunConfig cfg = parse_node_config(raw);
  if (ov.seed) cfg.seed = *ov.seed;
  cfg.out_dir = resolve_out_dir(ov, cfg.out_dir);
  check_precision(cfg.precision);
  NodeData nd = load_node_data(cfg);

  fs::create_directories(cfg.out_dir);
  write_text(fs::path(cfg.out_dir) / "config.json", to_json(cfg).dump(2) + "\n");
  const NodeTrainResult res =
      train_node_classifier(cfg.train, nd.data.graph, nd.data.features, *nd.data.labels, nd.splits);
  write_text(fs::path(cfg.out_dir) / "log.txt", join_lines(res.log));
  write_text(fs::path(cfg.out_dir) / "timing.txt", timing_text(res.wall_times));
  io::save_checkpoint(fs::path(cfg.out_dir) / "checkpoint", res.params);
  const std::string report = node_report(res.val, res.test, "all");
  write_text(fs::path(cfg.out_dir) / "report.txt", report);
  out << "epochs=" << res.epochs_run << " best_epoch=" << res.best_epoch << "\n" << report;
  return 0;
}

// ---------------------------------------------------------------- forecasting

SequenceDataset load_forecast_data(ForecastRunConfig& cfg) {
  require_path(cfg.dataset, "dataset");
  SequenceDataset ds = io::load_sequence_dataset(cfg.dataset);
  if (cfg.window_in != 0) ds.window_in = cfg.window_in;
  if (cfg.window_out != 0) ds.window_out = cfg.window_out;
  if (ds.window_in < 1) throw ConfigError("window_in must be >= 1");
  if (ds.window_out < 1) throw ConfigError("window_out must be >= 1");
  cfg.window_in = ds.window_in;
  cfg.window_out = ds.window_out;
  auto& m = cfg.train.model;
  m.input_dim = ds.signal_dim();
  m.window_in = ds.window_in;
  m.window_out = ds.window_out;
  cfg.train.seed = cfg.seed;
  cfg.train.validate();
  ds.validate();
  return ds;
}

std::string forecast_report(const HorizonReport& val, const HorizonReport& test, const HorizonReport& persist) {
  std::string s = "split=val model=ggru\n" + val.report();
  s += "split=test model=ggru\n" + test.report();
  s += "split=test model=persistence\n" + persist.report();
  char buf[96];
  std::snprintf(buf, sizeof(buf), "test_mae_improvement_over_persistence=%.6f\n",
                1.0 - test.average.mae / persist.average.mae);
  return s + buf;
}

int cmd_train_forecast(const json& raw, const Overrides& ov, std::ostream& out) {
  ForecastRunConfig cfg = parse_forecast_config(raw);
  if (ov.seed) cfg.seed = *ov.seed;
  cfg.out_dir = resolve_out_dir(ov, cfg.out_dir);
  check_precision(cfg.precision);
  // explicit zero windows are rejected rather than read as "from dataset"
  if (raw.contains("window_out") && cfg.window_out < 1) throw ConfigError("window_out must be >= 1");
  if (raw.contains("window_in") && cfg.window_in < 1) throw ConfigError("window_in must be >= 1");
  const SequenceDataset ds = load_forecast_data(cfg);

  fs::create_directories(cfg.out_dir);
  write_text(fs::path(cfg.out_dir) / "config.json", to_json(cfg).dump(2) + "\n");
  const ForecastTrainResult res = train_forecaster(cfg.train, ds);
  write_text(fs::path(cfg.out_dir) / "log.txt", join_lines(res.log));
  write_text(fs::path(cfg.out_dir) / "timing.txt", timing_text(res.wall_times));
  io::save_checkpoint(fs::path(cfg.out_dir) / "checkpoint", res.params);
  const std::string report = forecast_report(res.val, res.test, res.persistence_test);
  write_text(fs::path(cfg.out_dir) / "report.txt", report);
  out << "epochs=" << res.epochs_run << " best_epoch=" << res.best_epoch << "\n" << report;
  return 0;
}

// ---------------------------------------------------------------- eval

int cmd_eval(const json& raw, const Overrides& ov, const std::string& checkpoint, const std::string& dataset,
             bool sampled, std::ostream& out) {
  const std::string task = raw.value("task", "");
  if (task == "node_classification") {
    NodeRunConfig cfg = parse_node_config(raw);
    if (ov.seed) cfg.seed = *ov.seed;
    if (!dataset.empty()) cfg.dataset = dataset;
    NodeData nd = load_node_data(cfg);
    const NodeClassifier model(cfg.train.model);
    ParamStore store;
    Rng rng(0);
    model.init_params(store, rng);
    const fs::path ckpt = checkpoint.empty() ? fs::path(resolve_out_dir(ov, cfg.out_dir)) / "checkpoint" : fs::path(checkpoint);
    io::load_checkpoint(ckpt, store);
    const auto& t = cfg.train;
    auto eval = [&](std::span<const NodeId> nodes, const std::vector<Fanout>& f) {
      return evaluate_nodes(model, store, nd.data.graph, nd.features, *nd.data.labels, nodes, f, t.eval_batch_size,
                            evaluation_seed(cfg.seed));
    };
    const auto full = t.resolved_eval_fanouts();
    out << node_report(eval(nd.splits.val, full), eval(nd.splits.test, full), "all");
    if (sampled) {
      out << node_report(eval(nd.splits.val, t.train_fanouts), eval(nd.splits.test, t.train_fanouts), "sampled");
    }
    return 0;
  }
  if (task == "forecast") {
    ForecastRunConfig cfg = parse_forecast_config(raw);
    if (ov.seed) cfg.seed = *ov.seed;
    if (!dataset.empty()) cfg.dataset = dataset;
    const SequenceDataset ds = load_forecast_data(cfg);
    const Seq2SeqModel model(cfg.train.model);
    ParamStore store;
    Rng rng(0);
    model.init_params(store, rng);
    const fs::path ckpt = checkpoint.empty() ? fs::path(resolve_out_dir(ov, cfg.out_dir)) / "checkpoint" : fs::path(checkpoint);
    io::load_checkpoint(ckpt, store);
    const SignalNormalizer norm = fit_signal_normalizer(ds, cfg.train.normalize);
    const auto val_starts = window_starts(ds, 1);
    const auto test_starts = window_starts(ds, 2);
    const auto& t = cfg.train;
    out << forecast_report(
        evaluate_forecaster(model, store, ds, norm, val_starts, t.eval_batch_size, t.mask_zeros),
        evaluate_forecaster(model, store, ds, norm, test_starts, t.eval_batch_size, t.mask_zeros),
        evaluate_persistence(ds, test_starts, t.mask_zeros));
    return 0;
  }
  throw ConfigError("task: expected \"node_classification\" or \"forecast\"");
}

// ---------------------------------------------------------------- sample-stats

int cmd_sample_stats(const json& raw, const Overrides& ov, std::ostream& out) {
  std::string graph_path;
  std::string out_dir = "runs/sample-stats";
  std::uint64_t seed = 0;
  Index repetitions = 10;
  json seeds = "random:512";
  read(raw, "graph", graph_path, "");
  read(raw, "out_dir", out_dir, "");
  read(raw, "seed", seed, "");
  read(raw, "repetitions", repetitions, "");
  if (raw.contains("seeds")) seeds = raw.at("seeds");
  SampleConfig sc;
  sc.fanouts = read_fanouts(raw, "fanouts", "", {Fanout::at_most(15), Fanout::at_most(15), Fanout::at_most(15)});
  if (ov.seed) seed = *ov.seed;
  sc.seed = seed;
  out_dir = resolve_out_dir(ov, out_dir);

  const json effective{{"graph", graph_path}, {"out_dir", out_dir},           {"seed", seed},
                       {"repetitions", repetitions}, {"seeds", seeds}, {"fanouts", fanouts_json(sc.fanouts)}};
  reject_unknown(raw, effective);
  require_path(graph_path, "graph");
  sc.validate();
  const io::NodeDataset data = io::load_graph(graph_path);
  const Graph& g = data.graph;

  HierarchyStats st;
  if (seeds.is_string()) {
    const std::string s = seeds.get<std::string>();
    if (s == "all") {
      std::vector<NodeId> all(static_cast<std::size_t>(g.num_nodes()));
      for (NodeId i = 0; i < g.num_nodes(); ++i) all[static_cast<std::size_t>(i)] = i;
      st = hierarchy_stats(g, all, sc, repetitions);
    } else if (s.rfind("random:", 0) == 0) {
      Index k = 0;
      try {
        k = std::stoll(s.substr(7));
      } catch (const std::exception&) {
        throw ConfigError("seeds: bad count in '" + s + "'");
      }
      st = hierarchy_stats_random_seeds(g, k, sc, repetitions);
    } else {
      throw ConfigError("seeds: expected \"all\", \"random:K\" or a list of node ids");
    }
  } else if (seeds.is_array()) {
    std::vector<NodeId> ids;
    try {
      ids = seeds.get<std::vector<NodeId>>();
    } catch (const json::exception&) {
      throw ConfigError("seeds: list entries must be node ids");
    }
    st = hierarchy_stats(g, ids, sc, repetitions);
  } else {
    throw ConfigError("seeds: expected \"all\", \"random:K\" or a list of node ids");
  }

  fs::create_directories(out_dir);
  write_text(fs::path(out_dir) / "config.json", effective.dump(2) + "\n");
  write_text(fs::path(out_dir) / "table.txt", st.table());
  write_text(fs::path(out_dir) / "stats.txt", st.report());
  out << st.table() << st.report();
  return 0;
}

// ---------------------------------------------------------------- gradcheck

int cmd_gradcheck(const json& raw, const Overrides& ov, std::ostream& out, std::ostream& err) {
  GradSuiteOptions o;
  std::string out_dir;
  std::vector<std::string> kinds;
  for (AggregatorKind k : kAllAggregatorKinds) kinds.emplace_back(to_string(k));
  read(raw, "seed", o.seed, "");
  read(raw, "kinds", kinds, "");
  read(raw, "heads", o.heads, "");
  read(raw, "num_nodes", o.num_nodes, "");
  read(raw, "dim", o.dim, "");
  read(raw, "include_ggru", o.include_ggru, "");
  read(raw, "tolerance", o.tolerance, "");
  read(raw, "corrupt", o.corrupt, "");
  read(raw, "out_dir", out_dir, "");
  if (ov.seed) o.seed = *ov.seed;
  out_dir = resolve_out_dir(ov, out_dir);
  o.kinds.clear();
  for (const auto& k : kinds) o.kinds.push_back(parse_aggregator_kind(k));

  json effective{{"seed", o.seed},         {"kinds", kinds},         {"heads", o.heads},
                 {"num_nodes", o.num_nodes}, {"dim", o.dim},         {"include_ggru", o.include_ggru},
                 {"tolerance", o.tolerance}, {"corrupt", o.corrupt}, {"out_dir", out_dir}};
  reject_unknown(raw, effective);
  o.validate();

  const GradSuiteResult res = run_gradcheck_suite(o);
  char buf[128];
  std::snprintf(buf, sizeof(buf), "cases=%zu max_rel_error=%.3e tolerance=%.1e status=%s\n", res.cases.size(),
                res.max_rel_error(), o.tolerance, res.passed() ? "PASS" : "FAIL");
  const std::string text = res.table() + buf;
  out << text;
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    write_text(fs::path(out_dir) / "config.json", effective.dump(2) + "\n");
    write_text(fs::path(out_dir) / "gradcheck.txt", text);
  }
  if (!res.passed()) {
    err << "gradcheck failed for:\n";
    for (const auto& f : res.failing()) err << "  " << f << "\n";
    return 1;
  }
  return 0;
}

// ---------------------------------------------------------------- gen-synth

int cmd_gen_synth(const json& raw, const Overrides& ov, std::ostream& out) {
  std::string kind;
  std::string out_dir;
  std::uint64_t seed = 0;
  read(raw, "kind", kind, "");
  read(raw, "out_dir", out_dir, "");
  read(raw, "seed", seed, "");
  if (ov.seed) seed = *ov.seed;
  out_dir = resolve_out_dir(ov, out_dir);
  if (out_dir.empty()) throw ConfigError("missing required key 'out_dir'");

  json effective{{"kind", kind}, {"out_dir", out_dir}, {"seed", seed}};
  if (kind == "sbm") {
    SbmParams p;
    double train_fraction = 0.6;
    double val_fraction = 0.2;
    const json& s = section(raw, "sbm", "");
    read(s, "num_nodes", p.num_nodes, "sbm.");
    read(s, "num_blocks", p.num_blocks, "sbm.");
    read(s, "p_in", p.p_in, "sbm.");
    read(s, "p_out", p.p_out, "sbm.");
    read(s, "feat_dim", p.feat_dim, "sbm.");
    read(s, "noise", p.noise, "sbm.");
    read(s, "train_fraction", train_fraction, "sbm.");
    read(s, "val_fraction", val_fraction, "sbm.");
    p.seed = seed;
    effective["sbm"] = json{{"num_nodes", p.num_nodes}, {"num_blocks", p.num_blocks}, {"p_in", p.p_in},
                            {"p_out", p.p_out},         {"feat_dim", p.feat_dim},     {"noise", p.noise},
                            {"train_fraction", train_fraction}, {"val_fraction", val_fraction}};
    reject_unknown(raw, effective);
    const SbmDataset d = generate_sbm(p);
    const NodeSplits splits = NodeSplits::random(p.num_nodes, train_fraction, val_fraction, seed);
    std::vector<std::uint8_t> tags(static_cast<std::size_t>(p.num_nodes), 0);
    for (NodeId i : splits.val) tags[static_cast<std::size_t>(i)] = 1;
    for (NodeId i : splits.test) tags[static_cast<std::size_t>(i)] = 2;
    io::save_graph(out_dir, io::NodeDataset{d.graph, d.features, d.labels, tags});
    out << "wrote sbm dataset nodes=" << d.graph.num_nodes() << " arcs=" << d.graph.num_arcs() << " to " << out_dir
        << "\n";
  } else if (kind == "diffusion") {
    DiffusionParams p;
    std::string graph_kind = "ring";
    Index num_nodes = 20;
    std::string edge_list;
    double train_fraction = 0.7;
    double val_fraction = 0.1;
    const json& s = section(raw, "diffusion", "");
    read(s, "graph", graph_kind, "diffusion.");
    read(s, "num_nodes", num_nodes, "diffusion.");
    read(s, "edge_list", edge_list, "diffusion.");
    read(s, "num_timestamps", p.num_timestamps, "diffusion.");
    read(s, "alpha", p.alpha, "diffusion.");
    read(s, "noise", p.noise, "diffusion.");
    read(s, "noise_corr", p.noise_corr, "diffusion.");
    read(s, "level", p.level, "diffusion.");
    read(s, "window_in", p.window_in, "diffusion.");
    read(s, "window_out", p.window_out, "diffusion.");
    read(s, "train_fraction", train_fraction, "diffusion.");
    read(s, "val_fraction", val_fraction, "diffusion.");
    p.seed = seed;
    effective["diffusion"] = json{{"graph", graph_kind},
                                  {"num_nodes", num_nodes},
                                  {"edge_list", edge_list},
                                  {"num_timestamps", p.num_timestamps},
                                  {"alpha", p.alpha},
                                  {"noise", p.noise},
                                  {"noise_corr", p.noise_corr},
                                  {"level", p.level},
                                  {"window_in", p.window_in},
                                  {"window_out", p.window_out},
                                  {"train_fraction", train_fraction},
                                  {"val_fraction", val_fraction}};
    reject_unknown(raw, effective);
    Graph g;
    if (graph_kind == "ring") {
      g = ring_graph(num_nodes);
    } else if (graph_kind == "edge_list") {
      require_path(edge_list, "diffusion.edge_list");
      g = to_undirected(io::read_edge_list(edge_list, num_nodes, false));
    } else {
      throw ConfigError("diffusion.graph: expected \"ring\" or \"edge_list\"");
    }
    SequenceDataset ds = generate_diffusion_series(g, p);
    ds.train_fraction = train_fraction;
    ds.val_fraction = val_fraction;
    ds.test_fraction = 1.0 - train_fraction - val_fraction;
    ds.validate();
    io::save_sequence_dataset(out_dir, ds);
    out << "wrote diffusion dataset nodes=" << g.num_nodes() << " timestamps=" << ds.num_timestamps() << " to "
        << out_dir << "\n";
  } else {
    throw ConfigError("kind: expected \"sbm\" or \"diffusion\"");
  }
  write_text(fs::path(out_dir) / "config.json", effective.dump(2) + "\n");
  return 0;
}

}  // namespace

// ---------------------------------------------------------------- config parsing

NodeRunConfig parse_node_config(const json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  check_task(j, "node_classification");
  NodeRunConfig c;
  auto& t = c.train;
  t.train_fanouts = {Fanout::at_most(25), Fanout::at_most(10)};
  read(j, "dataset", c.dataset, "");
  read(j, "out_dir", c.out_dir, "");
  read(j, "seed", c.seed, "");
  read(j, "precision", c.precision, "");
  read(j, "normalize_features", t.normalize_features, "");
  read(j, "inductive", t.inductive, "");
  read(j, "eval_batch_size", t.eval_batch_size, "");

  const json& m = section(j, "model", "");
  std::string kind = "gaan";
  read(m, "aggregator", kind, "model.");
  t.model.fnn = kind == "fnn";
  if (!t.model.fnn) t.model.aggregator.kind = parse_aggregator_kind(kind);
  read_aggregator(m, t.model.aggregator, "model.");
  read(m, "d_o", t.model.aggregator.d_o, "model.");
  read(m, "layer_heads", t.model.layer_heads, "model.");
  read(m, "hidden_dim", t.model.hidden_dim, "model.");
  read(m, "num_layers", t.model.num_layers, "model.");
  read(m, "dropout", t.model.dropout, "model.");

  const json& s = section(j, "sampling", "");
  t.train_fanouts = read_fanouts(s, "train_fanouts", "sampling.", t.train_fanouts);
  t.eval_fanouts = read_fanouts(s, "eval_fanouts", "sampling.", {});
  if (!s.contains("train_fanouts")) {
    t.train_fanouts.resize(static_cast<std::size_t>(std::max<Index>(t.model.num_layers, 1)), Fanout::at_most(10));
  }
  if (t.eval_fanouts.empty()) t.eval_fanouts = t.resolved_eval_fanouts();

  read_schedule(section(j, "schedule", ""), t.schedule, "schedule.");
  const json& sp = section(j, "split", "");
  read(sp, "train_fraction", c.train_fraction, "split.");
  read(sp, "val_fraction", c.val_fraction, "split.");
  reject_unknown(j, to_json(c));
  return c;
}

json to_json(const NodeRunConfig& c) {
  const auto& t = c.train;
  json model{{"aggregator", t.model.fnn ? std::string("fnn") : std::string(to_string(t.model.aggregator.kind))},
             {"d_o", t.model.aggregator.d_o},
             {"layer_heads", t.model.layer_heads},
             {"hidden_dim", t.model.hidden_dim},
             {"num_layers", t.model.num_layers},
             {"dropout", t.model.dropout}};
  aggregator_json(model, t.model.aggregator);
  return json{{"task", "node_classification"},
              {"dataset", c.dataset},
              {"out_dir", c.out_dir},
              {"seed", c.seed},
              {"precision", c.precision},
              {"normalize_features", t.normalize_features},
              {"inductive", t.inductive},
              {"eval_batch_size", t.eval_batch_size},
              {"model", model},
              {"sampling", {{"train_fanouts", fanouts_json(t.train_fanouts)},
                            {"eval_fanouts", fanouts_json(t.resolved_eval_fanouts())}}},
              {"schedule", schedule_json(t.schedule)},
              {"split", {{"train_fraction", c.train_fraction}, {"val_fraction", c.val_fraction}}}};
}

ForecastRunConfig parse_forecast_config(const json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  check_task(j, "forecast");
  ForecastRunConfig c;
  auto& t = c.train;
  t.schedule.batch_size = 64;
  read(j, "dataset", c.dataset, "");
  read(j, "out_dir", c.out_dir, "");
  read(j, "seed", c.seed, "");
  read(j, "precision", c.precision, "");
  read(j, "window_in", c.window_in, "");
  read(j, "window_out", c.window_out, "");
  read(j, "mask_zeros", t.mask_zeros, "");
  read(j, "normalize", t.normalize, "");
  read(j, "eval_batch_size", t.eval_batch_size, "");
  const json& m = section(j, "model", "");
  std::string kind = "gaan";
  read(m, "aggregator", kind, "model.");
  t.model.aggregator.kind = parse_aggregator_kind(kind);
  read_aggregator(m, t.model.aggregator, "model.");
  read(m, "state_dim", t.model.state_dim, "model.");
  read(m, "num_layers", t.model.num_layers, "model.");
  read(m, "tau", t.model.tau, "model.");
  read_schedule(section(j, "schedule", ""), t.schedule, "schedule.");
  reject_unknown(j, to_json(c));
  return c;
}

json to_json(const ForecastRunConfig& c) {
  const auto& t = c.train;
  json model{{"aggregator", std::string(to_string(t.model.aggregator.kind))},
             {"state_dim", t.model.state_dim},
             {"num_layers", t.model.num_layers},
             {"tau", t.model.tau}};
  aggregator_json(model, t.model.aggregator);
  return json{{"task", "forecast"},
              {"dataset", c.dataset},
              {"out_dir", c.out_dir},
              {"seed", c.seed},
              {"precision", c.precision},
              {"window_in", c.window_in},
              {"window_out", c.window_out},
              {"mask_zeros", t.mask_zeros},
              {"normalize", t.normalize},
              {"eval_batch_size", t.eval_batch_size},
              {"model", model},
              {"schedule", schedule_json(t.schedule)}};
}

std::vector<std::string> unknown_keys(const json& input, const json& effective) {
  std::vector<std::string> out;
  if (!input.is_object()) return out;
  for (auto it = input.begin(); it != input.end(); ++it) {
    if (!effective.is_object() || !effective.contains(it.key())) {
      out.push_back(it.key());
      continue;
    }
    const json& e = effective.at(it.key());
    if (it.value().is_object() && e.is_object()) {
      for (const auto& sub : unknown_keys(it.value(), e)) out.push_back(it.key() + "." + sub);
    }
  }
  return out;
}

json read_json_file(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file '" + path.string() + "'");
  try {
    return json::parse(is);
  } catch (const json::parse_error& e) {
    throw ConfigError("config file '" + path.string() + "' is not valid JSON: " + e.what());
  }
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Gated attention networks: training, evaluation and diagnostics", "gaan"};
  app.require_subcommand(1);
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::string checkpoint;
  std::string dataset;
  bool sampled = false;

  auto add_common = [&](CLI::App* sub, bool config_required) {
    auto* opt = sub->add_option("config", config, "JSON config file");
    if (config_required) opt->required();
    sub->add_option("--seed", seed, "Override the config seed");
    sub->add_option("--out", out_dir, "Override the output directory");
  };
  auto* train_nc = app.add_subcommand("train-nc", "Train a node classifier");
  add_common(train_nc, true);
  auto* train_fc = app.add_subcommand("train-forecast", "Train a Graph GRU forecaster");
  add_common(train_fc, true);
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  add_common(eval, true);
  eval->add_option("--checkpoint", checkpoint, "Checkpoint directory (default: <out_dir>/checkpoint)");
  eval->add_option("--dataset", dataset, "Dataset directory (default: from the config)");
  eval->add_flag("--sampled", sampled, "Also report metrics with the training fanouts");
  auto* stats = app.add_subcommand("sample-stats", "Mean batch sizes with and without merging");
  add_common(stats, true);
  auto* grad = app.add_subcommand("gradcheck", "Finite-difference gradient checks");
  add_common(grad, false);
  auto* gen = app.add_subcommand("gen-synth", "Generate a synthetic dataset");
  add_common(gen, true);

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    // --help and --version come through here with exit code 0
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    apply_thread_env();
    const Overrides ov{seed, out_dir};
    const json raw = load_config_arg(config);
    if (train_nc->parsed()) return cmd_train_nc(raw, ov, out);
    if (train_fc->parsed()) return cmd_train_forecast(raw, ov, out);
    if (eval->parsed()) return cmd_eval(raw, ov, checkpoint, dataset, sampled, out);
    if (stats->parsed()) return cmd_sample_stats(raw, ov, out);
    if (grad->parsed()) return cmd_gradcheck(raw, ov, out, err);
    if (gen->parsed()) return cmd_gen_synth(raw, ov, out);
  } catch (const FormatError& e) {
    err << "format error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}

int run(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace gaan::cli
