#pragma once

#include "gaan/aggregators.hpp"
#include "gaan/autodiff.hpp"
#include "gaan/metrics.hpp"
#include "gaan/optim.hpp"
#include "gaan/sampler.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace gaan {

enum class OutputKind { softmax_single, sigmoid_multi };

struct ClassifierConfig {
  /// Aggregator kind and widths shared by every layer; d_x and d_z are
  /// filled in per layer.
  AggregatorConfig aggregator;
  /// Stacked aggregators M.
  Index num_layers = 2;
  /// Optional per-layer head counts, layer 0 being the input-side layer.
  std::vector<Index> layer_heads;
  Index input_dim = 0;
  Index hidden_dim = 64;
  Index num_classes = 0;
  OutputKind output = OutputKind::softmax_single;
  double dropout = 0.1;
  /// Fully-connected baseline: the same stack with every aggregator replaced
  /// by a dense layer on the node's own representation.
  bool fnn = false;

  void validate() const;
  /// Config of layer l with d_x / d_z resolved.
  AggregatorConfig layer_config(Index l) const;
};

class NodeClassifier {
 public:
  explicit NodeClassifier(ClassifierConfig cfg);

  const ClassifierConfig& config() const { return cfg_; }
  std::vector<ParamSpec> param_specs() const;
  void init_params(ParamStore& store, Rng& rng) const;

  /// Logits for the rows of B_0. `features` is indexed by node id.
  ad::Var forward(ad::Tape& tape, const BatchHierarchy& h, const Matrix& features, bool training, Rng& rng) const;
  Matrix predict(const ParamStore& store, const BatchHierarchy& h, const Matrix& features) const;

  static std::string layer_prefix(Index l) { return "layer" + std::to_string(l) + "."; }

 private:
  ClassifierConfig cfg_;
};

/// Cross-entropy averaged over nodes (single-label) or node-class entries
/// (multi-label). `labels` rows align with logits rows.
ad::Var classification_loss(const ad::Var& logits, const LabelSet& labels);
double classification_loss_value(const Matrix& logits, const LabelSet& labels);

struct EvalResult {
  double micro_f1 = 0.0;
  double loss = 0.0;
  ClassCounts counts;

  /// "micro_f1=.. loss=.. tp=.. fp=.. fn=.." plus one line per class.
  std::string report() const;
};

/// Train-split z-score statistics, applied to every split.
struct FeatureNormalizer {
  Eigen::RowVectorXd mean;
  Eigen::RowVectorXd scale;

  static FeatureNormalizer fit(const Matrix& features, std::span<const NodeId> rows);
  Matrix apply(const Matrix& features) const;
};

struct NodeSplits {
  std::vector<NodeId> train, val, test;

  /// From per-node tags (0 train, 1 val, 2 test).
  static NodeSplits from_tags(std::span<const std::uint8_t> tags);
  /// Seeded random split; the remainder after train and val goes to test.
  static NodeSplits random(Index num_nodes, double train_fraction, double val_fraction, std::uint64_t seed);
  void validate(Index num_nodes) const;
};

struct NodeTrainConfig {
  ClassifierConfig model;
  TrainSchedule schedule;
  std::vector<Fanout> train_fanouts;
  /// Defaults to "all" at every step when empty.
  std::vector<Fanout> eval_fanouts;
  Index eval_batch_size = 1024;
  bool normalize_features = false;
  /// Train on the subgraph induced by the training nodes.
  bool inductive = true;
  std::uint64_t seed = 0;

  void validate() const;
  std::vector<Fanout> resolved_eval_fanouts() const;
};

struct NodeTrainResult {
  ParamStore params;
  EvalResult val;
  EvalResult test;
  int best_epoch = 0;
  int epochs_run = 0;
  std::vector<std::string> log;    ///< one key=value record per epoch
  std::vector<double> wall_times;  ///< seconds per epoch
};

/// Seed of the evaluation sampling streams of a run seeded with `seed`.
inline std::uint64_t evaluation_seed(std::uint64_t seed) { return seed ^ 0x5eedull; }

/// Evaluates `nodes` in fixed-size batches. Sampling (if the fanouts are not
/// "all") draws from derive_rng(seed, {batch}).
EvalResult evaluate_nodes(const NodeClassifier& model, const ParamStore& store, const Graph& g,
                          const Matrix& features, const LabelSet& labels, std::span<const NodeId> nodes,
                          std::span<const Fanout> fanouts, Index batch_size, std::uint64_t seed);

/// Mini-batch training with plateau decay and early stopping on validation
/// micro-F1; returns the best-validation parameters.
NodeTrainResult train_node_classifier(const NodeTrainConfig& cfg, const Graph& g, const Matrix& features,
                                      const LabelSet& labels, const NodeSplits& splits);

}  // namespace gaan
