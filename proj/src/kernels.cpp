#include "gaan/kernels.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace gaan::kernels {

namespace {

void require_same_shape(const Matrix& a, const Matrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(what) + ": shape mismatch (" + std::to_string(a.rows()) + "x" +
                     std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                     std::to_string(b.cols()) + ")");
  }
}

Index head_width(Index cols, Index heads, const char* what) {
  if (heads <= 0 || cols % heads != 0) {
    throw ShapeError(std::string(what) + ": " + std::to_string(cols) +
                     " columns do not split into " + std::to_string(heads) + " heads");
  }
  return cols / heads;
}

}  // namespace

std::string_view to_string(Activation act) {
  switch (act) {
    case Activation::none: return "none";
    case Activation::leaky_relu: return "leaky_relu";
    case Activation::sigmoid: return "sigmoid";
    case Activation::tanh: return "tanh";
    case Activation::relu: return "relu";
  }
  return "none";
}

Activation parse_activation(std::string_view name) {
  for (auto a : {Activation::none, Activation::leaky_relu, Activation::sigmoid, Activation::tanh,
                 Activation::relu}) {
    if (to_string(a) == name) return a;
  }
  throw ConfigError("unknown activation '" + std::string(name) + "'");
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Matrix activate(Matrix pre, Activation act) {
  switch (act) {
    case Activation::none:
      break;
    case Activation::leaky_relu:
      pre = pre.unaryExpr([](double v) { return v > 0 ? v : kLeakyReluSlope * v; });
      break;
    case Activation::sigmoid:
      pre = pre.unaryExpr([](double v) { return sigmoid(v); });
      break;
    case Activation::tanh:
      pre = pre.array().tanh().matrix();
      break;
    case Activation::relu:
      pre = pre.cwiseMax(0.0);
      break;
  }
  return pre;
}

Matrix activate_backward(const Matrix& out, const Matrix& d_out, Activation act) {
  require_same_shape(out, d_out, "activate_backward");
  switch (act) {
    case Activation::none:
      return d_out;
    case Activation::leaky_relu:
      // slope is positive, so the sign of the output is the sign of the input
      return d_out.binaryExpr(out, [](double g, double y) { return y > 0 ? g : kLeakyReluSlope * g; });
    case Activation::sigmoid:
      return d_out.binaryExpr(out, [](double g, double y) { return g * y * (1.0 - y); });
    case Activation::tanh:
      return d_out.binaryExpr(out, [](double g, double y) { return g * (1.0 - y * y); });
    case Activation::relu:
      return d_out.binaryExpr(out, [](double g, double y) { return y > 0 ? g : 0.0; });
  }
  return d_out;
}

Matrix fc_forward(const Matrix& weight, const Matrix& bias, const Matrix& x, Activation act) {
  if (x.cols() != weight.cols()) {
    throw ShapeError("fc: input has " + std::to_string(x.cols()) + " columns, weight expects " +
                     std::to_string(weight.cols()));
  }
  if (bias.rows() != 1 || bias.cols() != weight.rows()) {
    throw ShapeError("fc: bias must be 1 x " + std::to_string(weight.rows()));
  }
  Matrix pre = x * weight.transpose();
  pre.rowwise() += bias.row(0);
  return activate(std::move(pre), act);
}

FcGrads fc_backward(const Matrix& weight, const Matrix& x, const Matrix& y, const Matrix& d_y,
                    Activation act) {
  const Matrix d_pre = activate_backward(y, d_y, act);
  FcGrads g;
  g.d_x = d_pre * weight;
  g.d_weight = d_pre.transpose() * x;
  g.d_bias = d_pre.colwise().sum();
  return g;
}

RaggedMatrix segment_softmax(const RaggedMatrix& logits) {
  if (!logits.values.allFinite()) throw Error("segment_softmax: non-finite logits");
  const auto& segs = logits.segments;
  Matrix out(logits.values.rows(), logits.values.cols());
  for (Index s = 0; s < segs.count(); ++s) {
    const Index b = segs.begin(s);
    const Index n = segs.length(s);
    if (n == 0) continue;
    auto block = logits.values.middleRows(b, n);
    auto dst = out.middleRows(b, n);
    for (Index c = 0; c < block.cols(); ++c) {
      const double mx = block.col(c).maxCoeff();
      dst.col(c) = (block.col(c).array() - mx).exp().matrix();
      dst.col(c) /= dst.col(c).sum();
    }
  }
  return RaggedMatrix(segs, std::move(out));
}

Matrix segment_softmax_backward(const RaggedMatrix& out, const Matrix& d_out) {
  require_same_shape(out.values, d_out, "segment_softmax_backward");
  const auto& segs = out.segments;
  Matrix d_in(d_out.rows(), d_out.cols());
  for (Index s = 0; s < segs.count(); ++s) {
    const Index b = segs.begin(s);
    const Index n = segs.length(s);
    if (n == 0) continue;
    auto y = out.values.middleRows(b, n);
    auto g = d_out.middleRows(b, n);
    const Eigen::RowVectorXd inner = y.cwiseProduct(g).colwise().sum();
    d_in.middleRows(b, n) = y.cwiseProduct(g - inner.replicate(n, 1));
  }
  return d_in;
}

Matrix segment_sum(const RaggedMatrix& v) {
  const auto& segs = v.segments;
  Matrix out = Matrix::Zero(segs.count(), v.values.cols());
  for (Index s = 0; s < segs.count(); ++s) {
    if (segs.length(s) > 0) out.row(s) = v.values.middleRows(segs.begin(s), segs.length(s)).colwise().sum();
  }
  return out;
}

Matrix segment_sum_backward(const Segments& segs, const Matrix& d_out) {
  Matrix d_in(segs.total_rows(), d_out.cols());
  for (Index s = 0; s < segs.count(); ++s) {
    for (Index r = segs.begin(s); r < segs.end(s); ++r) d_in.row(r) = d_out.row(s);
  }
  return d_in;
}

Matrix segment_mean(const RaggedMatrix& v) {
  Matrix out = segment_sum(v);
  for (Index s = 0; s < v.segments.count(); ++s) {
    const Index n = v.segments.length(s);
    if (n > 0) out.row(s) /= static_cast<double>(n);
  }
  return out;
}

Matrix segment_mean_backward(const Segments& segs, const Matrix& d_out) {
  Matrix d_in(segs.total_rows(), d_out.cols());
  for (Index s = 0; s < segs.count(); ++s) {
    const double inv = segs.length(s) > 0 ? 1.0 / static_cast<double>(segs.length(s)) : 0.0;
    for (Index r = segs.begin(s); r < segs.end(s); ++r) d_in.row(r) = d_out.row(s) * inv;
  }
  return d_in;
}

SegmentMax segment_max(const RaggedMatrix& v) {
  const auto& segs = v.segments;
  const Index cols = v.values.cols();
  SegmentMax res;
  res.values = Matrix::Zero(segs.count(), cols);
  res.argmax.assign(static_cast<std::size_t>(segs.count() * cols), -1);
  for (Index s = 0; s < segs.count(); ++s) {
    if (segs.length(s) == 0) continue;
    for (Index c = 0; c < cols; ++c) {
      Index best = segs.begin(s);
      for (Index r = best + 1; r < segs.end(s); ++r) {
        // strict comparison keeps the first attaining row
        if (v.values(r, c) > v.values(best, c)) best = r;
      }
      res.values(s, c) = v.values(best, c);
      res.argmax[static_cast<std::size_t>(s * cols + c)] = best;
    }
  }
  return res;
}

Matrix segment_max_backward(const Segments& segs, const SegmentMax& fwd, const Matrix& d_out) {
  const Index cols = d_out.cols();
  Matrix d_in = Matrix::Zero(segs.total_rows(), cols);
  for (Index s = 0; s < segs.count(); ++s) {
    for (Index c = 0; c < cols; ++c) {
      const Index r = fwd.argmax[static_cast<std::size_t>(s * cols + c)];
      if (r >= 0) d_in(r, c) += d_out(s, c);
    }
  }
  return d_in;
}

Matrix segment_weighted_sum(const RaggedMatrix& weights, const RaggedMatrix& values) {
  if (!(weights.segments == values.segments)) {
    throw ShapeError("segment_weighted_sum: weight and value offsets differ");
  }
  const Index heads = weights.values.cols();
  const Index dv = head_width(values.values.cols(), heads, "segment_weighted_sum");
  const auto& segs = weights.segments;
  Matrix out = Matrix::Zero(segs.count(), values.values.cols());
  for (Index s = 0; s < segs.count(); ++s) {
    for (Index r = segs.begin(s); r < segs.end(s); ++r) {
      for (Index k = 0; k < heads; ++k) {
        out.row(s).segment(k * dv, dv) += weights.values(r, k) * values.values.row(r).segment(k * dv, dv);
      }
    }
  }
  return out;
}

WeightedSumGrads segment_weighted_sum_backward(const RaggedMatrix& weights,
                                               const RaggedMatrix& values, const Matrix& d_out) {
  const Index heads = weights.values.cols();
  const Index dv = head_width(values.values.cols(), heads, "segment_weighted_sum_backward");
  const auto& segs = weights.segments;
  WeightedSumGrads g;
  g.d_weights = Matrix::Zero(weights.values.rows(), heads);
  g.d_values = Matrix::Zero(values.values.rows(), values.values.cols());
  for (Index s = 0; s < segs.count(); ++s) {
    for (Index r = segs.begin(s); r < segs.end(s); ++r) {
      for (Index k = 0; k < heads; ++k) {
        auto go = d_out.row(s).segment(k * dv, dv);
        g.d_weights(r, k) = go.dot(values.values.row(r).segment(k * dv, dv));
        g.d_values.row(r).segment(k * dv, dv) = weights.values(r, k) * go;
      }
    }
  }
  return g;
}

DropoutResult dropout(const Matrix& x, double rate, Rng& rng, bool training) {
  if (!(rate >= 0.0 && rate < 1.0)) throw Error("dropout rate must be in [0, 1)");
  DropoutResult res;
  if (!training || rate == 0.0) {
    res.output = x;
    return res;
  }
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double keep_scale = 1.0 / (1.0 - rate);
  res.mask.resize(x.rows(), x.cols());
  for (Index i = 0; i < res.mask.size(); ++i) {
    res.mask.data()[i] = u(rng) < rate ? 0.0 : keep_scale;
  }
  res.output = x.cwiseProduct(res.mask);
  return res;
}

Matrix dropout_backward(const DropoutResult& fwd, const Matrix& d_out) {
  if (fwd.mask.size() == 0) return d_out;
  return d_out.cwiseProduct(fwd.mask);
}

Matrix concat_rows(std::span<const Matrix> parts) {
  if (parts.empty()) throw ShapeError("concat: no parts");
  const Index rows = parts.front().rows();
  Index cols = 0;
  for (const auto& p : parts) {
    if (p.rows() != rows) throw ShapeError("concat: row counts differ");
    cols += p.cols();
  }
  Matrix out(rows, cols);
  Index at = 0;
  for (const auto& p : parts) {
    out.middleCols(at, p.cols()) = p;
    at += p.cols();
  }
  return out;
}

std::vector<Matrix> concat_rows_backward(const Matrix& d_out, std::span<const Index> widths) {
  std::vector<Matrix> out;
  out.reserve(widths.size());
  Index at = 0;
  for (Index w : widths) {
    out.emplace_back(d_out.middleCols(at, w));
    at += w;
  }
  if (at != d_out.cols()) throw ShapeError("concat backward: widths do not cover gradient");
  return out;
}

Matrix gather_rows(const Matrix& x, std::span<const Index> rows) {
  Matrix out(static_cast<Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Index r = rows[i];
    if (r < 0 || r >= x.rows()) {
      throw ShapeError("gather_rows: index " + std::to_string(r) + " outside " +
                       std::to_string(x.rows()) + " rows");
    }
    out.row(static_cast<Index>(i)) = x.row(r);
  }
  return out;
}

Matrix gather_rows_backward(Index num_rows, std::span<const Index> rows, const Matrix& d_out) {
  Matrix d_in = Matrix::Zero(num_rows, d_out.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) d_in.row(rows[i]) += d_out.row(static_cast<Index>(i));
  return d_in;
}

Matrix head_dot(const Matrix& q, const Matrix& k, Index heads) {
  require_same_shape(q, k, "head_dot");
  const Index d = head_width(q.cols(), heads, "head_dot");
  Matrix out(q.rows(), heads);
  for (Index r = 0; r < q.rows(); ++r) {
    for (Index h = 0; h < heads; ++h) out(r, h) = q.row(r).segment(h * d, d).dot(k.row(r).segment(h * d, d));
  }
  return out;
}

HeadDotGrads head_dot_backward(const Matrix& q, const Matrix& k, const Matrix& d_out, Index heads) {
  const Index d = head_width(q.cols(), heads, "head_dot_backward");
  HeadDotGrads g{Matrix(q.rows(), q.cols()), Matrix(k.rows(), k.cols())};
  for (Index r = 0; r < q.rows(); ++r) {
    for (Index h = 0; h < heads; ++h) {
      g.d_q.row(r).segment(h * d, d) = d_out(r, h) * k.row(r).segment(h * d, d);
      g.d_k.row(r).segment(h * d, d) = d_out(r, h) * q.row(r).segment(h * d, d);
    }
  }
  return g;
}

Matrix scale_heads(const Matrix& v, const Matrix& g) {
  if (g.rows() != v.rows()) throw ShapeError("scale_heads: row mismatch");
  const Index heads = g.cols();
  const Index d = head_width(v.cols(), heads, "scale_heads");
  Matrix out(v.rows(), v.cols());
  for (Index r = 0; r < v.rows(); ++r) {
    for (Index h = 0; h < heads; ++h) out.row(r).segment(h * d, d) = g(r, h) * v.row(r).segment(h * d, d);
  }
  return out;
}

ScaleHeadsGrads scale_heads_backward(const Matrix& v, const Matrix& g, const Matrix& d_out) {
  const Index heads = g.cols();
  const Index d = head_width(v.cols(), heads, "scale_heads_backward");
  ScaleHeadsGrads res{Matrix(v.rows(), v.cols()), Matrix(g.rows(), heads)};
  for (Index r = 0; r < v.rows(); ++r) {
    for (Index h = 0; h < heads; ++h) {
      auto go = d_out.row(r).segment(h * d, d);
      res.d_v.row(r).segment(h * d, d) = g(r, h) * go;
      res.d_g(r, h) = go.dot(v.row(r).segment(h * d, d));
    }
  }
  return res;
}

}  // namespace gaan::kernels
