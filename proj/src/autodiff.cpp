#include "gaan/autodiff.hpp"

#include <cmath>
#include <string>

namespace gaan::ad {

namespace k = gaan::kernels;

const Matrix& Var::value() const { return tape().value(*this); }

Tape& Var::tape() const {
  if (!tape_) throw Error("use of an unbound tape variable");
  return *tape_;
}

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Tape::Node& Tape::node(const Var& v) {
  if (v.tape_ != this) throw Error("variable belongs to a different tape");
  return nodes_[v.id_];
}

const Tape::Node& Tape::node(const Var& v) const {
  if (v.tape_ != this) throw Error("variable belongs to a different tape");
  return nodes_[v.id_];
}

Var Tape::constant(Matrix value) {
  Node n;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::variable(Matrix value) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = true;
  return push(std::move(n));
}

Var Tape::param(const std::string& name) {
  if (!params_) throw Error("tape has no parameter store");
  if (auto it = param_nodes_.find(name); it != param_nodes_.end()) return Var(this, it->second);
  Node n;
  n.value = params_->value(name);
  n.requires_grad = true;
  n.param = name;
  Var v = push(std::move(n));
  param_nodes_.emplace(name, v.id_);
  return v;
}

const Matrix& Tape::value(const Var& v) const { return node(v).value; }

Matrix Tape::grad(const Var& v) const {
  const auto& n = node(v);
  if (n.grad.size() == 0) return Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

bool Tape::requires_grad(const Var& v) const { return node(v).requires_grad; }

Var Tape::record(Matrix value, std::initializer_list<Var> inputs, Backward backward) {
  return record(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()), std::move(backward));
}

Var Tape::record(Matrix value, std::span<const Var> inputs, Backward backward) {
  Node n;
  n.value = std::move(value);
  for (const auto& in : inputs) n.requires_grad = n.requires_grad || node(in).requires_grad;
  if (n.requires_grad) n.backward = std::move(backward);
  return push(std::move(n));
}

void Tape::accumulate(const Var& v, const Matrix& g) {
  auto& n = node(v);
  if (!n.requires_grad) return;
  if (g.rows() != n.value.rows() || g.cols() != n.value.cols()) {
    throw ShapeError("gradient shape mismatch on tape node " + std::to_string(v.id_));
  }
  if (n.grad.size() == 0) {
    n.grad = g;
  } else {
    n.grad += g;
  }
}

void Tape::backward(const Var& loss) {
  auto& root = node(loss);
  if (root.value.rows() != 1 || root.value.cols() != 1) throw ShapeError("backward needs a 1x1 loss");
  for (auto& n : nodes_) n.grad.resize(0, 0);
  root.grad = Matrix::Ones(1, 1);
  for (std::size_t i = loss.id_ + 1; i-- > 0;) {
    auto& n = nodes_[i];
    if (!n.requires_grad || n.grad.size() == 0 || !n.backward) continue;
    n.backward(*this, n.value, n.grad);
  }
  if (!params_) return;
  for (const auto& [name, id] : param_nodes_) {
    const auto& n = nodes_[id];
    if (n.grad.size() != 0) params_->grad(name) += n.grad;
  }
}

Var fc(const Var& x, const Var& weight, const Var& bias, Activation act) {
  Tape& t = x.tape();
  Matrix y = k::fc_forward(weight.value(), bias.value(), x.value(), act);
  return t.record(std::move(y), {x, weight, bias},
                  [x, weight, bias, act](Tape& tp, const Matrix& out, const Matrix& d_out) {
                    auto g = k::fc_backward(weight.value(), x.value(), out, d_out, act);
                    tp.accumulate(x, g.d_x);
                    tp.accumulate(weight, g.d_weight);
                    tp.accumulate(bias, g.d_bias);
                  });
}

Var activate(const Var& x, Activation act) {
  return x.tape().record(k::activate(x.value(), act), {x},
                         [x, act](Tape& tp, const Matrix& out, const Matrix& d_out) {
                           tp.accumulate(x, k::activate_backward(out, d_out, act));
                         });
}

namespace {

void require_same_shape(const Var& a, const Var& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw ShapeError(std::string(what) + ": shape mismatch");
}

}  // namespace

Var add(const Var& a, const Var& b) {
  require_same_shape(a, b, "add");
  return a.tape().record(a.value() + b.value(), {a, b}, [a, b](Tape& tp, const Matrix&, const Matrix& d) {
    tp.accumulate(a, d);
    tp.accumulate(b, d);
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(a, b, "sub");
  return a.tape().record(a.value() - b.value(), {a, b}, [a, b](Tape& tp, const Matrix&, const Matrix& d) {
    tp.accumulate(a, d);
    tp.accumulate(b, -d);
  });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape(a, b, "mul");
  return a.tape().record(a.value().cwiseProduct(b.value()), {a, b},
                         [a, b](Tape& tp, const Matrix&, const Matrix& d) {
                           tp.accumulate(a, d.cwiseProduct(b.value()));
                           tp.accumulate(b, d.cwiseProduct(a.value()));
                         });
}

Var one_minus(const Var& a) {
  Matrix y = (1.0 - a.value().array()).matrix();
  return a.tape().record(std::move(y), {a},
                         [a](Tape& tp, const Matrix&, const Matrix& d) { tp.accumulate(a, -d); });
}

Var concat(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat: no parts");
  std::vector<Matrix> values;
  std::vector<Index> widths;
  for (const auto& p : parts) {
    values.push_back(p.value());
    widths.push_back(p.cols());
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return parts.front().tape().record(
      k::concat_rows(values), parts,
      [inputs, widths](Tape& tp, const Matrix&, const Matrix& d) {
        auto grads = k::concat_rows_backward(d, widths);
        for (std::size_t i = 0; i < inputs.size(); ++i) tp.accumulate(inputs[i], grads[i]);
      });
}

Var concat(std::initializer_list<Var> parts) { return concat(std::span<const Var>(parts.begin(), parts.size())); }

Var gather_rows(const Var& x, IndexList rows) {
  Matrix y = k::gather_rows(x.value(), *rows);
  return x.tape().record(std::move(y), {x}, [x, rows](Tape& tp, const Matrix&, const Matrix& d) {
    tp.accumulate(x, k::gather_rows_backward(x.rows(), *rows, d));
  });
}

Var scale_rows(const Var& x, std::shared_ptr<const Eigen::VectorXd> factors) {
  if (factors->size() != x.rows()) throw ShapeError("scale_rows: factor count mismatch");
  Matrix y = factors->asDiagonal() * x.value();
  return x.tape().record(std::move(y), {x}, [x, factors](Tape& tp, const Matrix&, const Matrix& d) {
    tp.accumulate(x, factors->asDiagonal() * d);
  });
}

Var segment_softmax(const Var& logits, const Segments& segs) {
  auto out = k::segment_softmax(RaggedMatrix(segs, logits.value()));
  return logits.tape().record(std::move(out.values), {logits},
                              [logits, segs](Tape& tp, const Matrix& y, const Matrix& d) {
                                tp.accumulate(logits, k::segment_softmax_backward(RaggedMatrix(segs, y), d));
                              });
}

Var segment_sum(const Var& v, const Segments& segs) {
  return v.tape().record(k::segment_sum(RaggedMatrix(segs, v.value())), {v},
                         [v, segs](Tape& tp, const Matrix&, const Matrix& d) {
                           tp.accumulate(v, k::segment_sum_backward(segs, d));
                         });
}

Var segment_mean(const Var& v, const Segments& segs) {
  return v.tape().record(k::segment_mean(RaggedMatrix(segs, v.value())), {v},
                         [v, segs](Tape& tp, const Matrix&, const Matrix& d) {
                           tp.accumulate(v, k::segment_mean_backward(segs, d));
                         });
}

Var segment_max(const Var& v, const Segments& segs) {
  auto fwd = std::make_shared<k::SegmentMax>(k::segment_max(RaggedMatrix(segs, v.value())));
  Matrix y = fwd->values;
  return v.tape().record(std::move(y), {v}, [v, segs, fwd](Tape& tp, const Matrix&, const Matrix& d) {
    tp.accumulate(v, k::segment_max_backward(segs, *fwd, d));
  });
}

Var segment_weighted_sum(const Var& weights, const Var& values, const Segments& segs) {
  Matrix y = k::segment_weighted_sum(RaggedMatrix(segs, weights.value()), RaggedMatrix(segs, values.value()));
  return weights.tape().record(std::move(y), {weights, values},
                               [weights, values, segs](Tape& tp, const Matrix&, const Matrix& d) {
                                 auto g = k::segment_weighted_sum_backward(RaggedMatrix(segs, weights.value()),
                                                                           RaggedMatrix(segs, values.value()), d);
                                 tp.accumulate(weights, g.d_weights);
                                 tp.accumulate(values, g.d_values);
                               });
}

Var head_dot(const Var& q, const Var& kk, Index heads) {
  return q.tape().record(k::head_dot(q.value(), kk.value(), heads), {q, kk},
                         [q, kk, heads](Tape& tp, const Matrix&, const Matrix& d) {
                           auto g = k::head_dot_backward(q.value(), kk.value(), d, heads);
                           tp.accumulate(q, g.d_q);
                           tp.accumulate(kk, g.d_k);
                         });
}

Var scale_heads(const Var& v, const Var& g) {
  return v.tape().record(k::scale_heads(v.value(), g.value()), {v, g},
                         [v, g](Tape& tp, const Matrix&, const Matrix& d) {
                           auto grads = k::scale_heads_backward(v.value(), g.value(), d);
                           tp.accumulate(v, grads.d_v);
                           tp.accumulate(g, grads.d_g);
                         });
}

Var dropout(const Var& x, double rate, Rng& rng, bool training) {
  auto fwd = std::make_shared<k::DropoutResult>(k::dropout(x.value(), rate, rng, training));
  Matrix y = fwd->output;
  return x.tape().record(std::move(y), {x}, [x, fwd](Tape& tp, const Matrix&, const Matrix& d) {
    tp.accumulate(x, k::dropout_backward(*fwd, d));
  });
}

namespace {

Matrix scalar(double v) {
  Matrix m(1, 1);
  m(0, 0) = v;
  return m;
}

}  // namespace

Var sum(const Var& x) {
  return x.tape().record(scalar(x.value().sum()), {x}, [x](Tape& tp, const Matrix&, const Matrix& d) {
    tp.accumulate(x, Matrix::Constant(x.rows(), x.cols(), d(0, 0)));
  });
}

Var sum_squares(const Var& x) {
  return x.tape().record(scalar(x.value().squaredNorm()), {x}, [x](Tape& tp, const Matrix&, const Matrix& d) {
    tp.accumulate(x, 2.0 * d(0, 0) * x.value());
  });
}

Var weighted_sum(const Var& x, const Matrix& w) {
  if (w.rows() != x.rows() || w.cols() != x.cols()) throw ShapeError("weighted_sum: shape mismatch");
  return x.tape().record(scalar(x.value().cwiseProduct(w).sum()), {x},
                         [x, w](Tape& tp, const Matrix&, const Matrix& d) { tp.accumulate(x, d(0, 0) * w); });
}

Var softmax_cross_entropy(const Var& logits, std::span<const Index> labels) {
  const Matrix& z = logits.value();
  if (static_cast<Index>(labels.size()) != z.rows()) throw ShapeError("cross-entropy: label count mismatch");
  Matrix probs(z.rows(), z.cols());
  double total = 0.0;
  for (Index r = 0; r < z.rows(); ++r) {
    const Index y = labels[static_cast<std::size_t>(r)];
    if (y < 0 || y >= z.cols()) throw Error("label " + std::to_string(y) + " out of range");
    const double mx = z.row(r).maxCoeff();
    probs.row(r) = (z.row(r).array() - mx).exp().matrix();
    const double norm = probs.row(r).sum();
    probs.row(r) /= norm;
    total += -(z(r, y) - mx - std::log(norm));
  }
  const double n = static_cast<double>(std::max<Index>(z.rows(), 1));
  std::vector<Index> lab(labels.begin(), labels.end());
  return logits.tape().record(scalar(total / n), {logits},
                              [logits, probs, lab, n](Tape& tp, const Matrix&, const Matrix& d) {
                                Matrix g = probs;
                                for (std::size_t r = 0; r < lab.size(); ++r) g(static_cast<Index>(r), lab[r]) -= 1.0;
                                tp.accumulate(logits, g * (d(0, 0) / n));
                              });
}

Var sigmoid_cross_entropy(const Var& logits, const Matrix& targets) {
  const Matrix& z = logits.value();
  if (targets.rows() != z.rows() || targets.cols() != z.cols()) {
    throw ShapeError("sigmoid cross-entropy: target shape mismatch");
  }
  double total = 0.0;
  Matrix probs(z.rows(), z.cols());
  for (Index i = 0; i < z.size(); ++i) {
    const double x = z.data()[i];
    const double t = targets.data()[i];
    // max(x,0) - x t + log(1 + exp(-|x|))
    total += std::max(x, 0.0) - x * t + std::log1p(std::exp(-std::abs(x)));
    probs.data()[i] = k::sigmoid(x);
  }
  const double n = static_cast<double>(std::max<Index>(z.size(), 1));
  return logits.tape().record(scalar(total / n), {logits},
                              [logits, probs, targets, n](Tape& tp, const Matrix&, const Matrix& d) {
                                tp.accumulate(logits, (probs - targets) * (d(0, 0) / n));
                              });
}

Var mean_absolute_error(const Var& pred, const Matrix& target) {
  const Matrix& p = pred.value();
  if (target.rows() != p.rows() || target.cols() != p.cols()) throw ShapeError("MAE: target shape mismatch");
  const double n = static_cast<double>(std::max<Index>(p.size(), 1));
  const Matrix diff = p - target;
  return pred.tape().record(scalar(diff.cwiseAbs().sum() / n), {pred},
                            [pred, diff, n](Tape& tp, const Matrix&, const Matrix& d) {
                              Matrix g = diff.unaryExpr([](double v) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); });
                              tp.accumulate(pred, g * (d(0, 0) / n));
                            });
}

}  // namespace gaan::ad
