#pragma once

#include "gaan/graph.hpp"

#include <string>
#include <vector>

namespace gaan {

inline constexpr double kMultiLabelThreshold = 0.5;

struct ClassCounts {
  std::vector<Index> tp, fp, fn;  ///< per class

  explicit ClassCounts(Index num_classes = 0);
  Index total_tp() const;
  Index total_fp() const;
  Index total_fn() const;
  /// 2TP / (2TP + FP + FN) over pooled counts; 1.0 when all three are zero.
  double micro_f1() const;
  void merge(const ClassCounts& other);
};

/// Single-label: argmax of each logits row. Multi-label: sigmoid(logit) >= 0.5.
/// `labels` rows align with `logits` rows.
ClassCounts count_predictions(const Matrix& logits, const LabelSet& labels);
double micro_f1(const Matrix& logits, const LabelSet& labels);

struct ForecastMetrics {
  double mae = 0.0;
  double rmse = 0.0;
  double mape = 0.0;  ///< percent
  Index count = 0;    ///< entries that contributed
};

/// Over all entries, skipping those with truth == 0 when `mask_zeros` is set.
/// Throws when every entry is masked.
ForecastMetrics forecast_metrics(const Matrix& pred, const Matrix& truth, bool mask_zeros);

/// Running sums so metrics can be pooled over many windows.
class ForecastAccumulator {
 public:
  void add(const Matrix& pred, const Matrix& truth, bool mask_zeros);
  ForecastMetrics result() const;

 private:
  double abs_ = 0.0;
  double sq_ = 0.0;
  double pct_ = 0.0;
  Index count_ = 0;
};

}  // namespace gaan
