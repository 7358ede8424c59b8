#pragma once

// Reverse-mode tape over the closed kernel set. Each op evaluates its forward
// kernel immediately and records the matching backward kernel; `backward`
// replays the records in reverse creation order and flushes gradients of
// parameter leaves into the owning ParamStore.

#include "gaan/kernels.hpp"
#include "gaan/param_store.hpp"
#include "gaan/ragged.hpp"

#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace gaan::ad {

class Tape;

class Var {
 public:
  Var() = default;

  const Matrix& value() const;
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  bool valid() const { return tape_ != nullptr; }
  Tape& tape() const;
  std::size_t id() const { return id_; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

using IndexList = std::shared_ptr<const std::vector<Index>>;

class Tape {
 public:
  /// Receives the node's forward value and its incoming gradient.
  using Backward = std::function<void(Tape&, const Matrix& out, const Matrix& d_out)>;

  explicit Tape(ParamStore* params = nullptr) : params_(params) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  /// Leaf whose gradient is kept and readable through `grad`.
  Var variable(Matrix value);
  /// Leaf bound to a ParamStore tensor; one leaf per name per tape.
  Var param(const std::string& name);

  const Matrix& value(const Var& v) const;
  /// Gradient reached by the last backward pass (zeros if unreached).
  Matrix grad(const Var& v) const;
  bool requires_grad(const Var& v) const;

  Var record(Matrix value, std::initializer_list<Var> inputs, Backward backward);
  Var record(Matrix value, std::span<const Var> inputs, Backward backward);
  void accumulate(const Var& v, const Matrix& g);

  /// `loss` must be 1x1. Parameter gradients are added to the store.
  void backward(const Var& loss);

  std::size_t size() const { return nodes_.size(); }
  ParamStore* params() const { return params_; }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    Backward backward;
    bool requires_grad = false;
    std::string param;
  };

  Var push(Node node);
  Node& node(const Var& v);
  const Node& node(const Var& v) const;

  std::deque<Node> nodes_;
  ParamStore* params_;
  std::map<std::string, std::size_t> param_nodes_;
};

using kernels::Activation;

Var fc(const Var& x, const Var& weight, const Var& bias, Activation act);
Var activate(const Var& x, Activation act);

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var one_minus(const Var& a);

Var concat(std::span<const Var> parts);
Var concat(std::initializer_list<Var> parts);

Var gather_rows(const Var& x, IndexList rows);
/// Row r multiplied by factors[r] (constant).
Var scale_rows(const Var& x, std::shared_ptr<const Eigen::VectorXd> factors);

Var segment_softmax(const Var& logits, const Segments& segs);
Var segment_sum(const Var& v, const Segments& segs);
Var segment_mean(const Var& v, const Segments& segs);
Var segment_max(const Var& v, const Segments& segs);
Var segment_weighted_sum(const Var& weights, const Var& values, const Segments& segs);

Var head_dot(const Var& q, const Var& k, Index heads);
Var scale_heads(const Var& v, const Var& g);

Var dropout(const Var& x, double rate, Rng& rng, bool training);

/// Scalar reductions.
Var sum(const Var& x);
Var sum_squares(const Var& x);
/// sum(x .* w) for a constant w.
Var weighted_sum(const Var& x, const Matrix& w);

/// Mean over rows of -log softmax(logits)[row, label].
Var softmax_cross_entropy(const Var& logits, std::span<const Index> labels);
/// Mean over all entries of binary cross-entropy with logits.
Var sigmoid_cross_entropy(const Var& logits, const Matrix& targets);
/// Mean absolute error over all entries.
Var mean_absolute_error(const Var& pred, const Matrix& target);

}  // namespace gaan::ad
