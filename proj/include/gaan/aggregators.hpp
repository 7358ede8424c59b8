#pragma once

#include "gaan/autodiff.hpp"
#include "gaan/param_store.hpp"
#include "gaan/ragged.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace gaan {

enum class AggregatorKind { gaan, attention, avg_pool, max_pool, pairwise_sigmoid, pairwise_tanh };

std::string_view to_string(AggregatorKind kind);
AggregatorKind parse_aggregator_kind(std::string_view name);
inline constexpr AggregatorKind kAllAggregatorKinds[] = {
    AggregatorKind::gaan,     AggregatorKind::attention,        AggregatorKind::avg_pool,
    AggregatorKind::max_pool, AggregatorKind::pairwise_sigmoid, AggregatorKind::pairwise_tanh};

struct AggregatorConfig {
  AggregatorKind kind = AggregatorKind::gaan;
  Index heads = 1;  ///< K
  Index d_a = 8;    ///< query / key width per head
  Index d_v = 8;    ///< value width per head
  Index d_m = 8;    ///< gate max-pool projection width
  Index d_o = 8;    ///< output width
  Index d_x = 8;    ///< center feature width
  Index d_z = 8;    ///< neighbor feature width
  /// Include mean_j z_j in the gate input. Off gives a max-pool-only gate.
  bool gate_mean = true;

  bool uses_attention() const;
  bool is_pool() const { return kind == AggregatorKind::avg_pool || kind == AggregatorKind::max_pool; }
  /// Width of the neighbor term concatenated after x_i.
  Index neighbor_width() const { return is_pool() ? d_v : heads * d_v; }
  void validate() const;
};

struct ParamSpec {
  std::string name;
  Index rows = 0;
  Index cols = 0;
  Index fan_in = 0;   ///< for Glorot init; 0 marks a bias
  Index fan_out = 0;
};

/// Tensors used by an aggregator, named prefix + "xa.weight", "xa.bias", ...
/// Multi-head projections are stacked: head k owns rows [k*d, (k+1)*d).
std::vector<ParamSpec> aggregator_param_specs(const AggregatorConfig& cfg, const std::string& prefix);

/// Glorot-uniform weights with bound sqrt(6 / (fan_in + fan_out)) per head,
/// zero biases. Tensors are drawn in declaration order.
void init_params(const std::vector<ParamSpec>& specs, ParamStore& store, Rng& rng);
void init_aggregator_params(const AggregatorConfig& cfg, const std::string& prefix, ParamStore& store, Rng& rng);

/// Values captured during a forward pass.
struct AggregateProbe {
  Matrix weights;  ///< one row per neighbor entry, one column per head
  Matrix gates;    ///< B x K, gaan only
};

struct AggregateOptions {
  /// B x K gate values used instead of the gate network (gaan only).
  const Matrix* forced_gates = nullptr;
  AggregateProbe* probe = nullptr;
};

/// y_i = FC_o(x_i ⊕ neighbor term). `x` is B x d_x, `z` holds the neighbor
/// rows of all B segments (sum of lengths x d_z). Empty segments contribute a
/// zero neighbor term.
ad::Var aggregate(const AggregatorConfig& cfg, const std::string& prefix, const ad::Var& x, const ad::Var& z,
                  const Segments& segs, const AggregateOptions& opts = {});

/// sigmoid(FC_g(x_i ⊕ max_j FC_m(z_j) ⊕ mean_j z_j)), B x K.
ad::Var gate_values(const AggregatorConfig& cfg, const std::string& prefix, const ad::Var& x, const ad::Var& z,
                    const Segments& segs);

/// Forward-only helpers over a parameter store.
Matrix aggregate_eval(const AggregatorConfig& cfg, const std::string& prefix, const ParamStore& store,
                      const Matrix& x, const RaggedMatrix& z, const AggregateOptions& opts = {});
Matrix gate_values_eval(const AggregatorConfig& cfg, const std::string& prefix, const ParamStore& store,
                        const Matrix& x, const RaggedMatrix& z);

}  // namespace gaan
