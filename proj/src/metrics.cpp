#include "gaan/metrics.hpp"

#include "gaan/kernels.hpp"

#include <cmath>
#include <numeric>

namespace gaan {

ClassCounts::ClassCounts(Index num_classes)
    : tp(static_cast<std::size_t>(num_classes), 0),
      fp(static_cast<std::size_t>(num_classes), 0),
      fn(static_cast<std::size_t>(num_classes), 0) {}

Index ClassCounts::total_tp() const { return std::accumulate(tp.begin(), tp.end(), Index{0}); }
Index ClassCounts::total_fp() const { return std::accumulate(fp.begin(), fp.end(), Index{0}); }
Index ClassCounts::total_fn() const { return std::accumulate(fn.begin(), fn.end(), Index{0}); }

double ClassCounts::micro_f1() const {
  const double t = static_cast<double>(total_tp());
  const double denom = 2.0 * t + static_cast<double>(total_fp() + total_fn());
  return denom == 0.0 ? 1.0 : 2.0 * t / denom;
}

void ClassCounts::merge(const ClassCounts& other) {
  if (other.tp.size() != tp.size()) throw ShapeError("ClassCounts::merge: class count mismatch");
  for (std::size_t c = 0; c < tp.size(); ++c) {
    tp[c] += other.tp[c];
    fp[c] += other.fp[c];
    fn[c] += other.fn[c];
  }
}

ClassCounts count_predictions(const Matrix& logits, const LabelSet& labels) {
  if (logits.rows() != labels.size()) throw ShapeError("count_predictions: row count mismatch");
  if (logits.cols() != labels.num_classes) throw ShapeError("count_predictions: class count mismatch");
  ClassCounts c(labels.num_classes);
  for (Index i = 0; i < logits.rows(); ++i) {
    if (labels.kind == LabelKind::single) {
      Index pred = 0;
      logits.row(i).maxCoeff(&pred);
      const Index truth = labels.classes[static_cast<std::size_t>(i)];
      if (truth < 0 || truth >= labels.num_classes) throw ConfigError("count_predictions: label out of range");
      if (pred == truth) {
        ++c.tp[pred];
      } else {
        ++c.fp[pred];
        ++c.fn[truth];
      }
    } else {
      for (Index k = 0; k < labels.num_classes; ++k) {
        const bool p = kernels::sigmoid(logits(i, k)) >= kMultiLabelThreshold;
        const bool t = labels.indicators(i, k) != 0.0;
        if (p && t) ++c.tp[k];
        if (p && !t) ++c.fp[k];
        if (!p && t) ++c.fn[k];
      }
    }
  }
  return c;
}

double micro_f1(const Matrix& logits, const LabelSet& labels) { return count_predictions(logits, labels).micro_f1(); }

void ForecastAccumulator::add(const Matrix& pred, const Matrix& truth, bool mask_zeros) {
  if (pred.rows() != truth.rows() || pred.cols() != truth.cols()) throw ShapeError("forecast_metrics: shape mismatch");
  for (Index i = 0; i < pred.size(); ++i) {
    const double t = truth.data()[i];
    if (mask_zeros && t == 0.0) continue;
    const double e = pred.data()[i] - t;
    abs_ += std::abs(e);
    sq_ += e * e;
    pct_ += std::abs(e) / std::abs(t);
    ++count_;
  }
}

ForecastMetrics ForecastAccumulator::result() const {
  if (count_ == 0) throw ConfigError("forecast_metrics: every entry is masked");
  const double n = static_cast<double>(count_);
  return ForecastMetrics{abs_ / n, std::sqrt(sq_ / n), 100.0 * pct_ / n, count_};
}

ForecastMetrics forecast_metrics(const Matrix& pred, const Matrix& truth, bool mask_zeros) {
  ForecastAccumulator acc;
  acc.add(pred, truth, mask_zeros);
  return acc.result();
}

}  // namespace gaan
