#include "gaan/aggregators.hpp"

#include <cmath>
#include <memory>

namespace gaan {

using ad::Var;
using kernels::Activation;

std::string_view to_string(AggregatorKind kind) {
  switch (kind) {
    case AggregatorKind::gaan: return "gaan";
    case AggregatorKind::attention: return "attention";
    case AggregatorKind::avg_pool: return "avg_pool";
    case AggregatorKind::max_pool: return "max_pool";
    case AggregatorKind::pairwise_sigmoid: return "pairwise_sigmoid";
    case AggregatorKind::pairwise_tanh: return "pairwise_tanh";
  }
  return "?";
}

AggregatorKind parse_aggregator_kind(std::string_view name) {
  for (AggregatorKind k : kAllAggregatorKinds) {
    if (to_string(k) == name) return k;
  }
  throw ConfigError("unknown aggregator '" + std::string(name) + "'");
}

bool AggregatorConfig::uses_attention() const { return !is_pool(); }

void AggregatorConfig::validate() const {
  auto positive = [](Index v, const char* what) {
    if (v < 1) throw ConfigError(std::string("aggregator: ") + what + " must be positive");
  };
  positive(d_v, "d_v");
  positive(d_o, "d_o");
  positive(d_x, "d_x");
  positive(d_z, "d_z");
  if (uses_attention()) {
    positive(heads, "heads");
    positive(d_a, "d_a");
  }
  if (kind == AggregatorKind::gaan) positive(d_m, "d_m");
}

std::vector<ParamSpec> aggregator_param_specs(const AggregatorConfig& cfg, const std::string& prefix) {
  cfg.validate();
  std::vector<ParamSpec> specs;
  auto linear = [&](const std::string& name, Index in, Index out_per_head, Index heads) {
    specs.push_back({prefix + name + ".weight", out_per_head * heads, in, in, out_per_head});
    specs.push_back({prefix + name + ".bias", 1, out_per_head * heads, 0, 0});
  };
  if (cfg.is_pool()) {
    linear("v", cfg.d_z, cfg.d_v, 1);
  } else {
    linear("xa", cfg.d_x, cfg.d_a, cfg.heads);
    linear("za", cfg.d_z, cfg.d_a, cfg.heads);
    linear("v", cfg.d_z, cfg.d_v, cfg.heads);
  }
  if (cfg.kind == AggregatorKind::gaan) {
    linear("m", cfg.d_z, cfg.d_m, 1);
    linear("g", cfg.d_x + cfg.d_m + (cfg.gate_mean ? cfg.d_z : 0), cfg.heads, 1);
  }
  linear("o", cfg.d_x + cfg.neighbor_width(), cfg.d_o, 1);
  return specs;
}

void init_params(const std::vector<ParamSpec>& specs, ParamStore& store, Rng& rng) {
  for (const auto& s : specs) {
    Matrix m = Matrix::Zero(s.rows, s.cols);
    if (s.fan_in > 0) {
      const double bound = std::sqrt(6.0 / static_cast<double>(s.fan_in + s.fan_out));
      std::uniform_real_distribution<double> u(-bound, bound);
      for (Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
    }
    store.add(s.name, std::move(m));
  }
}

void init_aggregator_params(const AggregatorConfig& cfg, const std::string& prefix, ParamStore& store, Rng& rng) {
  init_params(aggregator_param_specs(cfg, prefix), store, rng);
}

namespace {

Var fc_named(const Var& x, const std::string& name, Activation act) {
  ad::Tape& t = x.tape();
  return ad::fc(x, t.param(name + ".weight"), t.param(name + ".bias"), act);
}

void check_inputs(const AggregatorConfig& cfg, const Var& x, const Var& z, const Segments& segs) {
  if (x.cols() != cfg.d_x) throw ShapeError("aggregate: x has " + std::to_string(x.cols()) + " columns, expected d_x=" + std::to_string(cfg.d_x));
  if (z.cols() != cfg.d_z) throw ShapeError("aggregate: z has " + std::to_string(z.cols()) + " columns, expected d_z=" + std::to_string(cfg.d_z));
  if (segs.count() != x.rows()) throw ShapeError("aggregate: segment count differs from rows of x");
  if (segs.total_rows() != z.rows()) throw ShapeError("aggregate: segment offsets do not cover z");
}

ad::IndexList row_owner(const Segments& segs) {
  return std::make_shared<const std::vector<Index>>(segs.row_segments());
}

}  // namespace

Var gate_values(const AggregatorConfig& cfg, const std::string& prefix, const Var& x, const Var& z,
                const Segments& segs) {
  check_inputs(cfg, x, z, segs);
  if (cfg.kind != AggregatorKind::gaan) throw ConfigError("gate_values: aggregator has no gates");
  const Var pooled = ad::segment_max(fc_named(z, prefix + "m", Activation::none), segs);
  const Var in = cfg.gate_mean ? ad::concat({x, pooled, ad::segment_mean(z, segs)}) : ad::concat({x, pooled});
  return fc_named(in, prefix + "g", Activation::sigmoid);
}

Var aggregate(const AggregatorConfig& cfg, const std::string& prefix, const Var& x, const Var& z,
              const Segments& segs, const AggregateOptions& opts) {
  cfg.validate();
  check_inputs(cfg, x, z, segs);
  ad::Tape& t = x.tape();

  Var neighbor;
  if (cfg.is_pool()) {
    const Var vals = fc_named(z, prefix + "v", Activation::leaky_relu);
    neighbor = cfg.kind == AggregatorKind::avg_pool ? ad::segment_mean(vals, segs) : ad::segment_max(vals, segs);
  } else {
    const auto owner = row_owner(segs);
    const Var q = ad::gather_rows(fc_named(x, prefix + "xa", Activation::none), owner);
    const Var keys = fc_named(z, prefix + "za", Activation::none);
    const Var logits = ad::head_dot(q, keys, cfg.heads);
    Var weights;
    if (cfg.kind == AggregatorKind::gaan || cfg.kind == AggregatorKind::attention) {
      weights = ad::segment_softmax(logits, segs);
    } else {
      const Activation act =
          cfg.kind == AggregatorKind::pairwise_sigmoid ? Activation::sigmoid : Activation::tanh;
      auto inv_deg = std::make_shared<Eigen::VectorXd>(segs.total_rows());
      for (Index r = 0; r < segs.total_rows(); ++r) {
        (*inv_deg)(r) = 1.0 / static_cast<double>(segs.length((*owner)[static_cast<std::size_t>(r)]));
      }
      weights = ad::scale_rows(ad::activate(logits, act), inv_deg);
    }
    if (opts.probe) opts.probe->weights = weights.value();
    const Var vals = fc_named(z, prefix + "v", Activation::leaky_relu);
    neighbor = ad::segment_weighted_sum(weights, vals, segs);
    if (cfg.kind == AggregatorKind::gaan) {
      Var gates;
      if (opts.forced_gates) {
        if (opts.forced_gates->rows() != x.rows() || opts.forced_gates->cols() != cfg.heads) {
          throw ShapeError("aggregate: forced gates must be B x K");
        }
        gates = t.constant(*opts.forced_gates);
      } else {
        gates = gate_values(cfg, prefix, x, z, segs);
      }
      if (opts.probe) opts.probe->gates = gates.value();
      neighbor = ad::scale_heads(neighbor, gates);
    }
  }
  return fc_named(ad::concat({x, neighbor}), prefix + "o", Activation::none);
}

Matrix aggregate_eval(const AggregatorConfig& cfg, const std::string& prefix, const ParamStore& store,
                      const Matrix& x, const RaggedMatrix& z, const AggregateOptions& opts) {
  // forward only: the tape never writes to the store
  ad::Tape tape(const_cast<ParamStore*>(&store));
  return aggregate(cfg, prefix, tape.constant(x), tape.constant(z.values), z.segments, opts).value();
}

Matrix gate_values_eval(const AggregatorConfig& cfg, const std::string& prefix, const ParamStore& store,
                        const Matrix& x, const RaggedMatrix& z) {
  ad::Tape tape(const_cast<ParamStore*>(&store));
  return gate_values(cfg, prefix, tape.constant(x), tape.constant(z.values), z.segments).value();
}

}  // namespace gaan
