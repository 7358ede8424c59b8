#include "gaan/classifier.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

namespace gaan {

using ad::Var;
using kernels::Activation;

void ClassifierConfig::validate() const {
  if (num_layers < 1) throw ConfigError("classifier: num_layers must be >= 1");
  if (input_dim < 1) throw ConfigError("classifier: input_dim must be positive");
  if (hidden_dim < 1) throw ConfigError("classifier: hidden_dim must be positive");
  if (num_classes < 1) throw ConfigError("classifier: num_classes must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("classifier: dropout must be in [0, 1)");
  if (!layer_heads.empty() && static_cast<Index>(layer_heads.size()) != num_layers) {
    throw ConfigError("classifier: layer_heads must list one head count per layer");
  }
  for (Index l = 0; l < num_layers; ++l) layer_config(l).validate();
}

AggregatorConfig ClassifierConfig::layer_config(Index l) const {
  AggregatorConfig a = aggregator;
  a.d_x = a.d_z = l == 0 ? hidden_dim : aggregator.d_o;
  if (!layer_heads.empty()) a.heads = layer_heads.at(static_cast<std::size_t>(l));
  return a;
}

NodeClassifier::NodeClassifier(ClassifierConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

std::vector<ParamSpec> NodeClassifier::param_specs() const {
  std::vector<ParamSpec> specs;
  auto linear = [&specs](const std::string& name, Index in, Index out) {
    specs.push_back({name + ".weight", out, in, in, out});
    specs.push_back({name + ".bias", 1, out, 0, 0});
  };
  linear("input", cfg_.input_dim, cfg_.hidden_dim);
  for (Index l = 0; l < cfg_.num_layers; ++l) {
    const AggregatorConfig a = cfg_.layer_config(l);
    if (cfg_.fnn) {
      linear(layer_prefix(l) + "fc", a.d_x, a.d_o);
    } else {
      const auto s = aggregator_param_specs(a, layer_prefix(l));
      specs.insert(specs.end(), s.begin(), s.end());
    }
  }
  linear("output", cfg_.aggregator.d_o, cfg_.num_classes);
  return specs;
}

void NodeClassifier::init_params(ParamStore& store, Rng& rng) const { gaan::init_params(param_specs(), store, rng); }

namespace {

Matrix gather_features(const Matrix& features, std::span<const NodeId> ids) {
  Matrix out(static_cast<Index>(ids.size()), features.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= features.rows()) {
      throw ShapeError("classifier: node " + std::to_string(ids[i]) + " has no feature row");
    }
    out.row(static_cast<Index>(i)) = features.row(ids[i]);
  }
  return out;
}

Var fc_named(const Var& x, const std::string& name, Activation act) {
  ad::Tape& t = x.tape();
  return ad::fc(x, t.param(name + ".weight"), t.param(name + ".bias"), act);
}

ad::IndexList share(const std::vector<Index>& v) { return std::make_shared<const std::vector<Index>>(v); }

}  // namespace

Var NodeClassifier::forward(ad::Tape& tape, const BatchHierarchy& h, const Matrix& features, bool training,
                            Rng& rng) const {
  if (h.depth() != cfg_.num_layers) {
    throw ShapeError("classifier: hierarchy depth " + std::to_string(h.depth()) + " but model has " +
                     std::to_string(cfg_.num_layers) + " layers");
  }
  if (features.cols() != cfg_.input_dim) throw ShapeError("classifier: feature width differs from input_dim");
  const Index m = cfg_.num_layers;

  if (cfg_.fnn) {
    Var cur = fc_named(tape.constant(gather_features(features, h.levels.front())), "input", Activation::none);
    for (Index l = 0; l < m; ++l) {
      cur = ad::dropout(fc_named(cur, layer_prefix(l) + "fc", Activation::leaky_relu), cfg_.dropout, rng, training);
    }
    return fc_named(cur, "output", Activation::none);
  }

  Var cur = fc_named(tape.constant(gather_features(features, h.levels.back())), "input", Activation::none);
  for (Index l = 0; l < m; ++l) {
    const LevelMap& map = h.maps[static_cast<std::size_t>(m - 1 - l)];
    const Index rows = cur.rows();
    for (Index p : map.neighbor_pos) {
      if (p < 0 || p >= rows) throw ShapeError("classifier: dangling neighbor index");
    }
    for (Index p : map.self_pos) {
      if (p < 0 || p >= rows) throw ShapeError("classifier: dangling self index");
    }
    const Var x = ad::gather_rows(cur, share(map.self_pos));
    const Var z = ad::gather_rows(cur, share(map.neighbor_pos));
    const Var y = aggregate(cfg_.layer_config(l), layer_prefix(l), x, z, map.segments());
    cur = ad::dropout(ad::activate(y, Activation::leaky_relu), cfg_.dropout, rng, training);
  }
  return fc_named(cur, "output", Activation::none);
}

Matrix NodeClassifier::predict(const ParamStore& store, const BatchHierarchy& h, const Matrix& features) const {
  // forward only: the tape never writes to the store
  ad::Tape tape(const_cast<ParamStore*>(&store));
  Rng unused(0);
  return forward(tape, h, features, false, unused).value();
}

Var classification_loss(const Var& logits, const LabelSet& labels) {
  if (logits.rows() != labels.size()) throw ShapeError("loss: label rows differ from logits rows");
  if (logits.cols() != labels.num_classes) throw ShapeError("loss: class count differs from logits width");
  if (labels.kind == LabelKind::single) {
    for (Index c : labels.classes) {
      if (c < 0 || c >= labels.num_classes) throw ConfigError("loss: label out of range");
    }
    return ad::softmax_cross_entropy(logits, labels.classes);
  }
  return ad::sigmoid_cross_entropy(logits, labels.indicators);
}

double classification_loss_value(const Matrix& logits, const LabelSet& labels) {
  ad::Tape tape;
  return classification_loss(tape.constant(logits), labels).value()(0, 0);
}

std::string EvalResult::report() const {
  std::ostringstream os;
  char buf[200];
  std::snprintf(buf, sizeof(buf), "micro_f1=%.6f loss=%.6f tp=%td fp=%td fn=%td\n", micro_f1, loss,
                counts.total_tp(), counts.total_fp(), counts.total_fn());
  os << buf;
  for (std::size_t c = 0; c < counts.tp.size(); ++c) {
    std::snprintf(buf, sizeof(buf), "class=%zu tp=%td fp=%td fn=%td\n", c, counts.tp[c], counts.fp[c], counts.fn[c]);
    os << buf;
  }
  return os.str();
}

FeatureNormalizer FeatureNormalizer::fit(const Matrix& features, std::span<const NodeId> rows) {
  if (rows.empty()) throw ConfigError("feature normalization needs at least one row");
  const Matrix sub = gather_features(features, rows);
  FeatureNormalizer n;
  n.mean = sub.colwise().mean();
  n.scale.resize(features.cols());
  for (Index c = 0; c < features.cols(); ++c) {
    const double var = (sub.col(c).array() - n.mean(c)).square().mean();
    const double sd = std::sqrt(var);
    n.scale(c) = sd > 1e-12 ? 1.0 / sd : 1.0;
  }
  return n;
}

Matrix FeatureNormalizer::apply(const Matrix& features) const {
  Matrix out = features;
  out.rowwise() -= mean;
  out.array().rowwise() *= scale.array();
  return out;
}

NodeSplits NodeSplits::from_tags(std::span<const std::uint8_t> tags) {
  NodeSplits s;
  for (std::size_t i = 0; i < tags.size(); ++i) {
    const auto id = static_cast<NodeId>(i);
    switch (tags[i]) {
      case 0: s.train.push_back(id); break;
      case 1: s.val.push_back(id); break;
      case 2: s.test.push_back(id); break;
      default: throw FormatError("split tag must be 0, 1 or 2");
    }
  }
  return s;
}

NodeSplits NodeSplits::random(Index num_nodes, double train_fraction, double val_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && val_fraction > 0.0 && train_fraction + val_fraction < 1.0)) {
    throw ConfigError("split fractions must be positive and leave room for a test split");
  }
  std::vector<NodeId> perm(static_cast<std::size_t>(num_nodes));
  std::iota(perm.begin(), perm.end(), NodeId{0});
  Rng rng = derive_rng(seed, {7});
  std::shuffle(perm.begin(), perm.end(), rng);
  const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(num_nodes)));
  const auto n_val = static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(num_nodes)));
  NodeSplits s;
  s.train.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.val.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train),
               perm.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  s.test.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), perm.end());
  for (auto* v : {&s.train, &s.val, &s.test}) std::sort(v->begin(), v->end());
  return s;
}

void NodeSplits::validate(Index num_nodes) const {
  if (train.empty() || val.empty() || test.empty()) throw ConfigError("train, val and test splits must be non-empty");
  std::vector<char> seen(static_cast<std::size_t>(num_nodes), 0);
  for (const auto* v : {&train, &val, &test}) {
    for (NodeId id : *v) {
      if (id < 0 || id >= num_nodes) throw ConfigError("split node id out of range");
      if (seen[static_cast<std::size_t>(id)]++) throw ConfigError("splits must be disjoint");
    }
  }
}

void NodeTrainConfig::validate() const {
  model.validate();
  schedule.validate();
  if (static_cast<Index>(train_fanouts.size()) != model.num_layers) {
    throw ConfigError("train fanouts must list one entry per layer");
  }
  if (!eval_fanouts.empty() && static_cast<Index>(eval_fanouts.size()) != model.num_layers) {
    throw ConfigError("eval fanouts must list one entry per layer");
  }
  if (eval_batch_size < 1) throw ConfigError("eval_batch_size must be >= 1");
}

std::vector<Fanout> NodeTrainConfig::resolved_eval_fanouts() const {
  if (!eval_fanouts.empty()) return eval_fanouts;
  return std::vector<Fanout>(static_cast<std::size_t>(model.num_layers), Fanout::all());
}

EvalResult evaluate_nodes(const NodeClassifier& model, const ParamStore& store, const Graph& g,
                          const Matrix& features, const LabelSet& labels, std::span<const NodeId> nodes,
                          std::span<const Fanout> fanouts, Index batch_size, std::uint64_t seed) {
  EvalResult res;
  res.counts = ClassCounts(labels.num_classes);
  double loss_sum = 0.0;
  Index seen = 0;
  std::uint64_t b = 0;
  for (std::size_t start = 0; start < nodes.size(); start += static_cast<std::size_t>(batch_size), ++b) {
    const auto batch = nodes.subspan(start, std::min(nodes.size() - start, static_cast<std::size_t>(batch_size)));
    Rng rng = derive_rng(seed, {b});
    const BatchHierarchy h = build_hierarchy(g, batch, fanouts, rng);
    const Matrix logits = model.predict(store, h, features);
    const LabelSet target = labels.subset(h.levels.front());
    res.counts.merge(count_predictions(logits, target));
    loss_sum += classification_loss_value(logits, target) * static_cast<double>(logits.rows());
    seen += logits.rows();
  }
  res.micro_f1 = res.counts.micro_f1();
  res.loss = seen > 0 ? loss_sum / static_cast<double>(seen) : 0.0;
  return res;
}

NodeTrainResult train_node_classifier(const NodeTrainConfig& cfg, const Graph& g, const Matrix& raw_features,
                                      const LabelSet& labels, const NodeSplits& splits) {
  cfg.validate();
  splits.validate(g.num_nodes());
  if (raw_features.rows() != g.num_nodes()) throw ShapeError("train: feature rows differ from node count");
  if (labels.size() != g.num_nodes()) throw ShapeError("train: label rows differ from node count");
  if (labels.num_classes != cfg.model.num_classes) throw ConfigError("train: num_classes differs from the labels");

  const Matrix features =
      cfg.normalize_features ? FeatureNormalizer::fit(raw_features, splits.train).apply(raw_features) : raw_features;

  // training view: either the induced train subgraph (local ids) or the full graph
  Graph train_graph;
  Matrix train_features;
  LabelSet train_labels;
  std::vector<NodeId> train_nodes;
  if (cfg.inductive) {
    train_graph = induced_subgraph(g, splits.train);
    train_features = gather_features(features, splits.train);
    train_labels = labels.subset(splits.train);
    train_nodes.resize(splits.train.size());
    std::iota(train_nodes.begin(), train_nodes.end(), NodeId{0});
  } else {
    train_graph = g;
    train_features = features;
    train_labels = labels;
    train_nodes = splits.train;
  }

  const NodeClassifier model(cfg.model);
  NodeTrainResult out;
  Rng init_rng = derive_rng(cfg.seed, {0});
  model.init_params(out.params, init_rng);

  const auto& sched = cfg.schedule;
  PlateauScheduler plateau(sched, true);
  EarlyStopping stopper(sched.stop_patience, true);
  const auto eval_fanouts = cfg.resolved_eval_fanouts();
  const std::uint64_t eval_seed = evaluation_seed(cfg.seed);

  for (int epoch = 1; epoch <= sched.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    Rng order_rng = derive_rng(cfg.seed, {1, static_cast<std::uint64_t>(epoch)});
    std::vector<NodeId> order = train_nodes;
    std::shuffle(order.begin(), order.end(), order_rng);

    const double lr = plateau.lr();
    double loss_sum = 0.0;
    double norm_sum = 0.0;
    Index num_batches = 0;
    Index seen = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(sched.batch_size)) {
      const std::size_t len = std::min(order.size() - start, static_cast<std::size_t>(sched.batch_size));
      const std::span<const NodeId> batch(order.data() + start, len);
      Rng rng = derive_rng(cfg.seed, {2, static_cast<std::uint64_t>(epoch), static_cast<std::uint64_t>(num_batches)});
      const BatchHierarchy h = build_hierarchy(train_graph, batch, cfg.train_fanouts, rng);
      ad::Tape tape(&out.params);
      const Var logits = model.forward(tape, h, train_features, true, rng);
      const Var loss = classification_loss(logits, train_labels.subset(h.levels.front()));
      tape.backward(loss);
      norm_sum += clip_global_norm(out.params, sched.clip_norm);
      adam_step(out.params, lr);
      loss_sum += loss.value()(0, 0) * static_cast<double>(logits.rows());
      seen += logits.rows();
      ++num_batches;
    }

    const EvalResult val = evaluate_nodes(model, out.params, g, features, labels, splits.val, eval_fanouts,
                                          cfg.eval_batch_size, eval_seed);
    const auto decay = plateau.step(val.micro_f1);
    const bool stop = stopper.step(val.micro_f1, out.params);
    out.epochs_run = epoch;

    char buf[320];
    std::snprintf(buf, sizeof(buf),
                  "epoch=%d loss=%.10g val_micro_f1=%.10g val_loss=%.10g lr=%.6g grad_norm=%.10g decayed=%d "
                  "improved=%d",
                  epoch, loss_sum / static_cast<double>(std::max<Index>(seen, 1)), val.micro_f1, val.loss, lr,
                  norm_sum / static_cast<double>(std::max<Index>(num_batches, 1)), decay.decayed ? 1 : 0,
                  stopper.improved_last() ? 1 : 0);
    out.log.emplace_back(buf);
    out.wall_times.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    if (stop) break;
  }
  if (stopper.has_snapshot()) stopper.restore_best(out.params);
  out.best_epoch = stopper.best_epoch();

  out.val = evaluate_nodes(model, out.params, g, features, labels, splits.val, eval_fanouts, cfg.eval_batch_size,
                           eval_seed);
  out.test = evaluate_nodes(model, out.params, g, features, labels, splits.test, eval_fanouts, cfg.eval_batch_size,
                            eval_seed);
  return out;
}

}  // namespace gaan
