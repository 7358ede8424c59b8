#pragma once

#include "gaan/aggregators.hpp"
#include "gaan/metrics.hpp"
#include "gaan/optim.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace gaan {

/// Neighbor lists of a fixed graph in the form the aggregators consume.
struct GraphIndex {
  Index num_nodes = 0;
  Segments segments;
  ad::IndexList neighbors;

  static GraphIndex from_graph(const Graph& g);
};

/// Replacement values for the update / reset gates (num_nodes x state_dim).
struct GateOverrides {
  const Matrix* update = nullptr;
  const Matrix* reset = nullptr;
};

/// Graph GRU cell. Each of the six transforms is an aggregator sharing one
/// kind and width set; x-aggregators see (X, X), h-aggregators (X ⊕ H, H).
class GGRUCell {
 public:
  GGRUCell(AggregatorConfig base, Index input_dim, Index state_dim, std::string prefix);

  Index input_dim() const { return input_dim_; }
  Index state_dim() const { return state_dim_; }
  const std::string& prefix() const { return prefix_; }
  AggregatorConfig x_config() const;
  AggregatorConfig h_config() const;
  std::vector<ParamSpec> param_specs() const;

  ad::Var step(const GraphIndex& gi, const ad::Var& x, const ad::Var& h_prev, const GateOverrides& ov = {}) const;
  Matrix step_eval(const ParamStore& store, const Graph& g, const Matrix& x, const Matrix& h_prev,
                   const GateOverrides& ov = {}) const;

  static constexpr const char* kTransforms[6] = {"xu", "hu", "xr", "hr", "xh", "hh"};

 private:
  ad::Var gamma(const char* name, const AggregatorConfig& cfg, const GraphIndex& gi, const ad::Var& center,
                const ad::Var& neighbor) const;

  AggregatorConfig base_;
  Index input_dim_;
  Index state_dim_;
  std::string prefix_;
};

struct ScheduleState {
  double tau = 3000.0;
  std::int64_t iteration = 0;
};

/// Inverse-sigmoid decay tau / (tau + exp(iteration / tau)).
double scheduled_sampling_prob(const ScheduleState& s);

struct ForecasterConfig {
  AggregatorConfig aggregator;
  Index input_dim = 1;   ///< d_i
  Index state_dim = 64;  ///< d_o
  Index num_layers = 2;  ///< L
  Index window_in = 12;  ///< J
  Index window_out = 12; ///< T_out
  double tau = 3000.0;

  void validate() const;
};

/// Called once per cell step: phase is "encoder" or "decoder".
using CellTrace = std::function<void(const std::string& phase, Index layer, Index step)>;

struct DecodeOptions {
  bool training = false;
  /// Ground-truth frames for the decoder steps; required when training.
  std::span<const Matrix> targets;
  ScheduleState schedule;
  /// Key for the per-step coin streams.
  std::uint64_t seed = 0;
  /// Overrides the schedule's probability of feeding ground truth.
  std::optional<double> force_epsilon;
  const CellTrace* trace = nullptr;
};

class Seq2SeqModel {
 public:
  explicit Seq2SeqModel(ForecasterConfig cfg);

  const ForecasterConfig& config() const { return cfg_; }
  const GGRUCell& encoder(Index l) const { return encoder_.at(static_cast<std::size_t>(l)); }
  const GGRUCell& decoder(Index l) const { return decoder_.at(static_cast<std::size_t>(l)); }
  std::vector<ParamSpec> param_specs() const;
  void init_params(ParamStore& store, Rng& rng) const;

  /// J input frames -> T_out predicted frames. The decoder starts from the
  /// last input frame and feeds either the ground truth (probability epsilon,
  /// training only) or its own previous prediction.
  std::vector<ad::Var> encode_decode(ad::Tape& tape, const GraphIndex& gi, std::span<const Matrix> inputs,
                                     const DecodeOptions& opts) const;
  std::vector<Matrix> predict(const ParamStore& store, const GraphIndex& gi, std::span<const Matrix> inputs) const;

 private:
  ForecasterConfig cfg_;
  std::vector<GGRUCell> encoder_;
  std::vector<GGRUCell> decoder_;
};

/// Per-horizon metrics plus the pooled average.
struct HorizonReport {
  std::vector<ForecastMetrics> per_horizon;
  ForecastMetrics average;

  /// "horizon=1 mae=.. rmse=.. mape=.." rows in ascending order, then
  /// "horizon=average ...".
  std::string report() const;
};

/// Train-range per-column z-score.
struct SignalNormalizer {
  Eigen::RowVectorXd mean;
  Eigen::RowVectorXd scale;  ///< standard deviation

  static SignalNormalizer fit(std::span<const Matrix> frames);
  Matrix normalize(const Matrix& frame) const;
  Matrix denormalize(const Matrix& frame) const;
};

struct ForecastTrainConfig {
  ForecasterConfig model;
  TrainSchedule schedule;
  bool mask_zeros = false;
  bool normalize = true;
  Index eval_batch_size = 64;
  std::uint64_t seed = 0;

  void validate() const;
};

struct ForecastTrainResult {
  ParamStore params;
  SignalNormalizer normalizer;
  HorizonReport val;
  HorizonReport test;
  HorizonReport persistence_test;
  int best_epoch = 0;
  int epochs_run = 0;
  std::int64_t iterations = 0;
  std::vector<std::string> log;
  std::vector<double> wall_times;
};

/// First frame index of every window lying inside split `which`.
std::vector<Index> window_starts(const SequenceDataset& ds, int which);

/// Frames are normalized with `norm` before the model and mapped back before
/// scoring.
HorizonReport evaluate_forecaster(const Seq2SeqModel& model, const ParamStore& store, const SequenceDataset& ds,
                                  const SignalNormalizer& norm, std::span<const Index> starts, Index batch_size,
                                  bool mask_zeros);
/// yhat_{J+s} = X_J for every horizon s.
HorizonReport evaluate_persistence(const SequenceDataset& ds, std::span<const Index> starts, bool mask_zeros);

ForecastTrainResult train_forecaster(const ForecastTrainConfig& cfg, const SequenceDataset& ds);

/// Normalizer fitted on the training range of `ds` (identity when disabled).
SignalNormalizer fit_signal_normalizer(const SequenceDataset& ds, bool enabled);

}  // namespace gaan
