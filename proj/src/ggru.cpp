#include "gaan/ggru.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <random>
#include <sstream>

namespace gaan {

using ad::Var;
using kernels::Activation;

GraphIndex GraphIndex::from_graph(const Graph& g) {
  GraphIndex gi;
  gi.num_nodes = g.num_nodes();
  gi.segments = Segments(std::vector<Index>(g.indptr().begin(), g.indptr().end()));
  gi.neighbors = std::make_shared<const std::vector<Index>>(g.indices().begin(), g.indices().end());
  return gi;
}

GGRUCell::GGRUCell(AggregatorConfig base, Index input_dim, Index state_dim, std::string prefix)
    : base_(base), input_dim_(input_dim), state_dim_(state_dim), prefix_(std::move(prefix)) {
  if (input_dim < 1 || state_dim < 1) throw ConfigError("ggru: input and state dims must be positive");
  x_config().validate();
  h_config().validate();
}

AggregatorConfig GGRUCell::x_config() const {
  AggregatorConfig c = base_;
  c.d_x = c.d_z = input_dim_;
  c.d_o = state_dim_;
  return c;
}

AggregatorConfig GGRUCell::h_config() const {
  AggregatorConfig c = base_;
  c.d_x = input_dim_ + state_dim_;
  c.d_z = state_dim_;
  c.d_o = state_dim_;
  return c;
}

std::vector<ParamSpec> GGRUCell::param_specs() const {
  std::vector<ParamSpec> specs;
  for (const char* t : kTransforms) {
    const auto s = aggregator_param_specs(t[0] == 'x' ? x_config() : h_config(), prefix_ + t + ".");
    specs.insert(specs.end(), s.begin(), s.end());
  }
  return specs;
}

Var GGRUCell::gamma(const char* name, const AggregatorConfig& cfg, const GraphIndex& gi, const Var& center,
                    const Var& neighbor) const {
  return aggregate(cfg, prefix_ + name + ".", center, ad::gather_rows(neighbor, gi.neighbors), gi.segments);
}

Var GGRUCell::step(const GraphIndex& gi, const Var& x, const Var& h_prev, const GateOverrides& ov) const {
  if (x.rows() != gi.num_nodes || h_prev.rows() != gi.num_nodes) throw ShapeError("ggru: node count mismatch");
  if (x.cols() != input_dim_) throw ShapeError("ggru: input width mismatch");
  if (h_prev.cols() != state_dim_) throw ShapeError("ggru: state width mismatch");
  ad::Tape& t = x.tape();
  const AggregatorConfig xc = x_config();
  const AggregatorConfig hc = h_config();
  const Var xh = ad::concat({x, h_prev});

  auto gate = [&](const Matrix* forced, const char* xn, const char* hn) {
    if (forced) {
      if (forced->rows() != gi.num_nodes || forced->cols() != state_dim_) throw ShapeError("ggru: gate override shape");
      return t.constant(*forced);
    }
    return ad::activate(ad::add(gamma(xn, xc, gi, x, x), gamma(hn, hc, gi, xh, h_prev)), Activation::sigmoid);
  };
  const Var u = gate(ov.update, "xu", "hu");
  const Var r = gate(ov.reset, "xr", "hr");
  const Var cand = ad::activate(ad::add(gamma("xh", xc, gi, x, x), ad::mul(r, gamma("hh", hc, gi, xh, h_prev))),
                                Activation::leaky_relu);
  return ad::add(ad::mul(ad::one_minus(u), cand), ad::mul(u, h_prev));
}

Matrix GGRUCell::step_eval(const ParamStore& store, const Graph& g, const Matrix& x, const Matrix& h_prev,
                           const GateOverrides& ov) const {
  // forward only: the tape never writes to the store
  ad::Tape tape(const_cast<ParamStore*>(&store));
  const GraphIndex gi = GraphIndex::from_graph(g);
  return step(gi, tape.constant(x), tape.constant(h_prev), ov).value();
}

double scheduled_sampling_prob(const ScheduleState& s) {
  if (!(s.tau > 0.0)) throw ConfigError("scheduled sampling: tau must be positive");
  return s.tau / (s.tau + std::exp(static_cast<double>(s.iteration) / s.tau));
}

void ForecasterConfig::validate() const {
  if (input_dim < 1 || state_dim < 1) throw ConfigError("forecaster: dims must be positive");
  if (num_layers < 1) throw ConfigError("forecaster: num_layers must be >= 1");
  if (window_in < 1) throw ConfigError("forecaster: window_in must be >= 1");
  if (window_out < 1) throw ConfigError("forecaster: window_out must be >= 1");
  if (!(tau > 0.0)) throw ConfigError("forecaster: tau must be positive");
}

Seq2SeqModel::Seq2SeqModel(ForecasterConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  for (Index l = 0; l < cfg_.num_layers; ++l) {
    const Index in = l == 0 ? cfg_.input_dim : cfg_.state_dim;
    encoder_.emplace_back(cfg_.aggregator, in, cfg_.state_dim, "enc" + std::to_string(l) + ".");
    decoder_.emplace_back(cfg_.aggregator, in, cfg_.state_dim, "dec" + std::to_string(l) + ".");
  }
}

std::vector<ParamSpec> Seq2SeqModel::param_specs() const {
  std::vector<ParamSpec> specs;
  for (const auto* cells : {&encoder_, &decoder_}) {
    for (const auto& c : *cells) {
      const auto s = c.param_specs();
      specs.insert(specs.end(), s.begin(), s.end());
    }
  }
  specs.push_back({"proj.weight", cfg_.input_dim, cfg_.state_dim, cfg_.state_dim, cfg_.input_dim});
  specs.push_back({"proj.bias", 1, cfg_.input_dim, 0, 0});
  return specs;
}

void Seq2SeqModel::init_params(ParamStore& store, Rng& rng) const { gaan::init_params(param_specs(), store, rng); }

std::vector<Var> Seq2SeqModel::encode_decode(ad::Tape& tape, const GraphIndex& gi, std::span<const Matrix> inputs,
                                             const DecodeOptions& opts) const {
  if (static_cast<Index>(inputs.size()) != cfg_.window_in) throw ShapeError("encode_decode: expected J input frames");
  if (opts.training && static_cast<Index>(opts.targets.size()) != cfg_.window_out) {
    throw ConfigError("encode_decode: training needs T_out target frames");
  }
  for (const auto& f : inputs) {
    if (f.rows() != gi.num_nodes || f.cols() != cfg_.input_dim) throw ShapeError("encode_decode: input frame shape");
  }
  for (const auto& f : opts.targets) {
    if (f.rows() != gi.num_nodes || f.cols() != cfg_.input_dim) throw ShapeError("encode_decode: target frame shape");
  }

  const auto layers = static_cast<std::size_t>(cfg_.num_layers);
  std::vector<Var> state(layers, tape.constant(Matrix::Zero(gi.num_nodes, cfg_.state_dim)));
  for (Index t = 0; t < cfg_.window_in; ++t) {
    Var in = tape.constant(inputs[static_cast<std::size_t>(t)]);
    for (std::size_t l = 0; l < layers; ++l) {
      if (opts.trace) (*opts.trace)("encoder", static_cast<Index>(l), t);
      state[l] = encoder_[l].step(gi, in, state[l]);
      in = state[l];
    }
  }

  const double eps = opts.force_epsilon ? *opts.force_epsilon : scheduled_sampling_prob(opts.schedule);
  std::vector<Var> preds;
  Var dec_in = tape.constant(inputs.back());
  for (Index s = 0; s < cfg_.window_out; ++s) {
    Var in = dec_in;
    for (std::size_t l = 0; l < layers; ++l) {
      if (opts.trace) (*opts.trace)("decoder", static_cast<Index>(l), s);
      state[l] = decoder_[l].step(gi, in, state[l]);
      in = state[l];
    }
    preds.push_back(ad::fc(in, tape.param("proj.weight"), tape.param("proj.bias"), Activation::none));
    if (s + 1 == cfg_.window_out) break;
    bool teacher = false;
    if (opts.training) {
      if (opts.force_epsilon && (eps >= 1.0 || eps <= 0.0)) {
        teacher = eps >= 1.0;
      } else {
        Rng coin = derive_rng(opts.seed, {static_cast<std::uint64_t>(opts.schedule.iteration),
                                          static_cast<std::uint64_t>(s)});
        teacher = std::uniform_real_distribution<double>(0.0, 1.0)(coin) < eps;
      }
    }
    dec_in = teacher ? tape.constant(opts.targets[static_cast<std::size_t>(s)]) : preds.back();
  }
  return preds;
}

std::vector<Matrix> Seq2SeqModel::predict(const ParamStore& store, const GraphIndex& gi,
                                          std::span<const Matrix> inputs) const {
  ad::Tape tape(const_cast<ParamStore*>(&store));
  std::vector<Matrix> out;
  for (const Var& v : encode_decode(tape, gi, inputs, DecodeOptions{})) out.push_back(v.value());
  return out;
}

std::string HorizonReport::report() const {
  std::ostringstream os;
  char buf[200];
  for (std::size_t h = 0; h < per_horizon.size(); ++h) {
    const auto& m = per_horizon[h];
    std::snprintf(buf, sizeof(buf), "horizon=%zu mae=%.6f rmse=%.6f mape=%.6f\n", h + 1, m.mae, m.rmse, m.mape);
    os << buf;
  }
  std::snprintf(buf, sizeof(buf), "horizon=average mae=%.6f rmse=%.6f mape=%.6f\n", average.mae, average.rmse,
                average.mape);
  os << buf;
  return os.str();
}

SignalNormalizer SignalNormalizer::fit(std::span<const Matrix> frames) {
  if (frames.empty()) throw ConfigError("signal normalizer: no frames");
  const Index d = frames.front().cols();
  SignalNormalizer n;
  n.mean = Eigen::RowVectorXd::Zero(d);
  double count = 0.0;
  for (const auto& f : frames) {
    n.mean += f.colwise().sum();
    count += static_cast<double>(f.rows());
  }
  n.mean /= count;
  Eigen::RowVectorXd var = Eigen::RowVectorXd::Zero(d);
  for (const auto& f : frames) var += (f.rowwise() - n.mean).array().square().matrix().colwise().sum();
  n.scale = (var / count).array().sqrt();
  for (Index c = 0; c < d; ++c) {
    if (!(n.scale(c) > 1e-12)) n.scale(c) = 1.0;
  }
  return n;
}

Matrix SignalNormalizer::normalize(const Matrix& frame) const {
  Matrix out = frame;
  out.rowwise() -= mean;
  out.array().rowwise() /= scale.array();
  return out;
}

Matrix SignalNormalizer::denormalize(const Matrix& frame) const {
  Matrix out = frame;
  out.array().rowwise() *= scale.array();
  out.rowwise() += mean;
  return out;
}

void ForecastTrainConfig::validate() const {
  model.validate();
  schedule.validate();
  if (eval_batch_size < 1) throw ConfigError("eval_batch_size must be >= 1");
}

std::vector<Index> window_starts(const SequenceDataset& ds, int which) {
  const auto r = ds.split_range(which);
  std::vector<Index> starts;
  for (Index t = r.begin; t + ds.window_in + ds.window_out <= r.end; ++t) starts.push_back(t);
  return starts;
}

SignalNormalizer fit_signal_normalizer(const SequenceDataset& ds, bool enabled) {
  if (!enabled) {
    SignalNormalizer n;
    n.mean = Eigen::RowVectorXd::Zero(ds.signal_dim());
    n.scale = Eigen::RowVectorXd::Ones(ds.signal_dim());
    return n;
  }
  const auto r = ds.split_range(0);
  return SignalNormalizer::fit(std::span<const Matrix>(ds.frames.data() + r.begin, static_cast<std::size_t>(r.end - r.begin)));
}

namespace {

/// Frames of a batch of windows stacked over a disjoint-union graph.
struct WindowBatch {
  std::vector<Matrix> inputs;   ///< J frames, normalized
  std::vector<Matrix> targets;  ///< T_out frames, normalized
  std::vector<Matrix> raw_targets;
  Matrix raw_last;              ///< X_J in original units
};

WindowBatch make_batch(const SequenceDataset& ds, const SignalNormalizer& norm, std::span<const Index> starts) {
  const Index n = ds.graph.num_nodes();
  const Index d = ds.signal_dim();
  const auto b = static_cast<Index>(starts.size());
  auto stack = [&](Index offset) {
    Matrix m(b * n, d);
    for (Index w = 0; w < b; ++w) m.middleRows(w * n, n) = ds.frames[static_cast<std::size_t>(starts[w] + offset)];
    return m;
  };
  WindowBatch wb;
  for (Index t = 0; t < ds.window_in; ++t) wb.inputs.push_back(norm.normalize(stack(t)));
  for (Index s = 0; s < ds.window_out; ++s) {
    wb.raw_targets.push_back(stack(ds.window_in + s));
    wb.targets.push_back(norm.normalize(wb.raw_targets.back()));
  }
  wb.raw_last = stack(ds.window_in - 1);
  return wb;
}

class GraphIndexCache {
 public:
  explicit GraphIndexCache(const Graph& g) : g_(g) {}
  const GraphIndex& get(Index copies) {
    auto it = cache_.find(copies);
    if (it == cache_.end()) it = cache_.emplace(copies, GraphIndex::from_graph(replicate(g_, copies))).first;
    return it->second;
  }

 private:
  const Graph& g_;
  std::map<Index, GraphIndex> cache_;
};

HorizonReport finish(std::vector<ForecastAccumulator>& per, ForecastAccumulator& all) {
  HorizonReport r;
  for (auto& a : per) r.per_horizon.push_back(a.result());
  r.average = all.result();
  return r;
}

HorizonReport evaluate_with(const Seq2SeqModel& model, const ParamStore& store, const SequenceDataset& ds,
                            const SignalNormalizer& norm, std::span<const Index> starts, Index batch_size,
                            bool mask_zeros, GraphIndexCache& cache) {
  if (starts.empty()) throw ConfigError("forecast evaluation: no windows in split");
  std::vector<ForecastAccumulator> per(static_cast<std::size_t>(ds.window_out));
  ForecastAccumulator all;
  for (std::size_t i = 0; i < starts.size(); i += static_cast<std::size_t>(batch_size)) {
    const auto chunk = starts.subspan(i, std::min(starts.size() - i, static_cast<std::size_t>(batch_size)));
    const WindowBatch wb = make_batch(ds, norm, chunk);
    const auto preds = model.predict(store, cache.get(static_cast<Index>(chunk.size())), wb.inputs);
    for (std::size_t s = 0; s < preds.size(); ++s) {
      const Matrix p = norm.denormalize(preds[s]);
      per[s].add(p, wb.raw_targets[s], mask_zeros);
      all.add(p, wb.raw_targets[s], mask_zeros);
    }
  }
  return finish(per, all);
}

}  // namespace

HorizonReport evaluate_forecaster(const Seq2SeqModel& model, const ParamStore& store, const SequenceDataset& ds,
                                  const SignalNormalizer& norm, std::span<const Index> starts, Index batch_size,
                                  bool mask_zeros) {
  GraphIndexCache cache(ds.graph);
  return evaluate_with(model, store, ds, norm, starts, batch_size, mask_zeros, cache);
}

HorizonReport evaluate_persistence(const SequenceDataset& ds, std::span<const Index> starts, bool mask_zeros) {
  if (starts.empty()) throw ConfigError("forecast evaluation: no windows in split");
  std::vector<ForecastAccumulator> per(static_cast<std::size_t>(ds.window_out));
  ForecastAccumulator all;
  for (Index t : starts) {
    const Matrix& last = ds.frames[static_cast<std::size_t>(t + ds.window_in - 1)];
    for (Index s = 0; s < ds.window_out; ++s) {
      const Matrix& truth = ds.frames[static_cast<std::size_t>(t + ds.window_in + s)];
      per[static_cast<std::size_t>(s)].add(last, truth, mask_zeros);
      all.add(last, truth, mask_zeros);
    }
  }
  return finish(per, all);
}

ForecastTrainResult train_forecaster(const ForecastTrainConfig& cfg, const SequenceDataset& ds) {
  cfg.validate();
  ds.validate();
  if (cfg.model.input_dim != ds.signal_dim()) throw ConfigError("forecaster: input_dim differs from the signal width");
  if (cfg.model.window_in != ds.window_in || cfg.model.window_out != ds.window_out) {
    throw ConfigError("forecaster: window sizes differ from the dataset");
  }
  const auto train_starts = window_starts(ds, 0);
  const auto val_starts = window_starts(ds, 1);
  const auto test_starts = window_starts(ds, 2);
  if (train_starts.empty() || val_starts.empty() || test_starts.empty()) {
    throw ConfigError("forecaster: every split needs at least one full window");
  }

  ForecastTrainResult out;
  out.normalizer = fit_signal_normalizer(ds, cfg.normalize);
  const Seq2SeqModel model(cfg.model);
  Rng init_rng = derive_rng(cfg.seed, {0});
  model.init_params(out.params, init_rng);
  GraphIndexCache cache(ds.graph);

  const auto& sched = cfg.schedule;
  PlateauScheduler plateau(sched, false);
  EarlyStopping stopper(sched.stop_patience, false);
  std::int64_t iteration = 0;

  for (int epoch = 1; epoch <= sched.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<Index> order = train_starts;
    Rng order_rng = derive_rng(cfg.seed, {1, static_cast<std::uint64_t>(epoch)});
    std::shuffle(order.begin(), order.end(), order_rng);

    const double lr = plateau.lr();
    double loss_sum = 0.0;
    double norm_sum = 0.0;
    Index batches = 0;
    for (std::size_t i = 0; i < order.size(); i += static_cast<std::size_t>(sched.batch_size)) {
      const std::span<const Index> chunk(order.data() + i,
                                         std::min(order.size() - i, static_cast<std::size_t>(sched.batch_size)));
      const WindowBatch wb = make_batch(ds, out.normalizer, chunk);
      ad::Tape tape(&out.params);
      DecodeOptions opts;
      opts.training = true;
      opts.targets = wb.targets;
      opts.schedule = ScheduleState{cfg.model.tau, iteration};
      opts.seed = cfg.seed;
      const auto preds = model.encode_decode(tape, cache.get(static_cast<Index>(chunk.size())), wb.inputs, opts);
      const Matrix target = kernels::concat_rows(wb.targets);
      const Var loss = ad::mean_absolute_error(ad::concat(preds), target);
      tape.backward(loss);
      norm_sum += clip_global_norm(out.params, sched.clip_norm);
      adam_step(out.params, lr);
      loss_sum += loss.value()(0, 0);
      ++batches;
      ++iteration;
    }

    const HorizonReport val = evaluate_with(model, out.params, ds, out.normalizer, val_starts, cfg.eval_batch_size,
                                            cfg.mask_zeros, cache);
    const auto decay = plateau.step(val.average.mae);
    const bool stop = stopper.step(val.average.mae, out.params);
    out.epochs_run = epoch;

    char buf[320];
    std::snprintf(buf, sizeof(buf),
                  "epoch=%d loss=%.10g val_mae=%.10g val_rmse=%.10g lr=%.6g grad_norm=%.10g epsilon=%.6g decayed=%d "
                  "improved=%d",
                  epoch, loss_sum / static_cast<double>(std::max<Index>(batches, 1)), val.average.mae,
                  val.average.rmse, lr, norm_sum / static_cast<double>(std::max<Index>(batches, 1)),
                  scheduled_sampling_prob(ScheduleState{cfg.model.tau, iteration}), decay.decayed ? 1 : 0,
                  stopper.improved_last() ? 1 : 0);
    out.log.emplace_back(buf);
    out.wall_times.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    if (stop) break;
  }
  if (stopper.has_snapshot()) stopper.restore_best(out.params);
  out.best_epoch = stopper.best_epoch();
  out.iterations = iteration;

  out.val = evaluate_with(model, out.params, ds, out.normalizer, val_starts, cfg.eval_batch_size, cfg.mask_zeros, cache);
  out.test = evaluate_with(model, out.params, ds, out.normalizer, test_starts, cfg.eval_batch_size, cfg.mask_zeros, cache);
  out.persistence_test = evaluate_persistence(ds, test_starts, cfg.mask_zeros);
  return out;
}

}  // namespace gaan
