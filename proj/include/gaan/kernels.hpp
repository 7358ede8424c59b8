#pragma once

// Differentiable primitives over dense and ragged data. Every forward has a
// matching vector-Jacobian product; none of them keep state.

#include "gaan/ragged.hpp"
#include "gaan/types.hpp"

#include <span>
#include <string_view>
#include <vector>

namespace gaan::kernels {

enum class Activation { none, leaky_relu, sigmoid, tanh, relu };

inline constexpr double kLeakyReluSlope = 0.1;

std::string_view to_string(Activation act);
Activation parse_activation(std::string_view name);

/// y = act(x W^T + b). weight is out x in, bias is 1 x out.
struct LinearParams {
  Matrix weight;
  Matrix bias;

  Index in_dim() const { return weight.cols(); }
  Index out_dim() const { return weight.rows(); }
};

double sigmoid(double x);

Matrix activate(Matrix pre, Activation act);
/// Backward through an activation, expressed in terms of its output.
Matrix activate_backward(const Matrix& out, const Matrix& d_out, Activation act);

Matrix fc_forward(const Matrix& weight, const Matrix& bias, const Matrix& x, Activation act);
inline Matrix fc_forward(const LinearParams& p, const Matrix& x, Activation act) {
  return fc_forward(p.weight, p.bias, x, act);
}

struct FcGrads {
  Matrix d_x;
  Matrix d_weight;
  Matrix d_bias;
};

/// `y` is the forward output (post-activation).
FcGrads fc_backward(const Matrix& weight, const Matrix& x, const Matrix& y, const Matrix& d_y,
                    Activation act);

/// Per segment and column softmax with max subtraction. Empty segments yield
/// no rows. Throws on non-finite logits.
RaggedMatrix segment_softmax(const RaggedMatrix& logits);
Matrix segment_softmax_backward(const RaggedMatrix& out, const Matrix& d_out);

// Reductions return one row per segment; empty segments give a zero row.
Matrix segment_sum(const RaggedMatrix& v);
Matrix segment_sum_backward(const Segments& segs, const Matrix& d_out);

Matrix segment_mean(const RaggedMatrix& v);
Matrix segment_mean_backward(const Segments& segs, const Matrix& d_out);

struct SegmentMax {
  Matrix values;
  /// Row-major (segment, column) -> first attaining row, or -1 for empty segments.
  std::vector<Index> argmax;
};

SegmentMax segment_max(const RaggedMatrix& v);
Matrix segment_max_backward(const Segments& segs, const SegmentMax& fwd, const Matrix& d_out);

/// weights: K columns; values: K * d_v columns, head k in block k.
/// out[s, k-block] = sum_r weights[r, k] * values[r, k-block].
Matrix segment_weighted_sum(const RaggedMatrix& weights, const RaggedMatrix& values);

struct WeightedSumGrads {
  Matrix d_weights;
  Matrix d_values;
};

WeightedSumGrads segment_weighted_sum_backward(const RaggedMatrix& weights,
                                               const RaggedMatrix& values, const Matrix& d_out);

struct DropoutResult {
  Matrix output;
  /// 0 for dropped entries, 1/(1-rate) for kept ones. Empty when inactive.
  Matrix mask;
};

/// Inverted dropout. Identity when not training or rate == 0.
DropoutResult dropout(const Matrix& x, double rate, Rng& rng, bool training);
Matrix dropout_backward(const DropoutResult& fwd, const Matrix& d_out);

/// Column-wise concatenation of equally tall blocks, in order.
Matrix concat_rows(std::span<const Matrix> parts);
std::vector<Matrix> concat_rows_backward(const Matrix& d_out, std::span<const Index> widths);

Matrix gather_rows(const Matrix& x, std::span<const Index> rows);
/// Scatter-add of d_out back onto a `num_rows` tall source.
Matrix gather_rows_backward(Index num_rows, std::span<const Index> rows, const Matrix& d_out);

/// Per-head inner products of row-aligned q and k (K * d columns each).
Matrix head_dot(const Matrix& q, const Matrix& k, Index heads);

struct HeadDotGrads {
  Matrix d_q;
  Matrix d_k;
};

HeadDotGrads head_dot_backward(const Matrix& q, const Matrix& k, const Matrix& d_out, Index heads);

/// Scale head block k of each row of v by g[row, k].
Matrix scale_heads(const Matrix& v, const Matrix& g);

struct ScaleHeadsGrads {
  Matrix d_v;
  Matrix d_g;
};

ScaleHeadsGrads scale_heads_backward(const Matrix& v, const Matrix& g, const Matrix& d_out);

}  // namespace gaan::kernels
