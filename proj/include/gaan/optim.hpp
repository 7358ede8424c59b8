#pragma once

#include "gaan/param_store.hpp"

#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace gaan {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected Adam over every tensor in the store, then clears gradients.
/// Throws naming the first tensor with a non-finite gradient (no update is
/// applied in that case).
void adam_step(ParamStore& store, double lr, const AdamConfig& cfg = {});

/// Rescales all gradients so their global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
double clip_global_norm(ParamStore& store, double max_norm);

double global_grad_norm(const ParamStore& store);

struct TrainSchedule {
  double initial_lr = 1e-3;
  double min_lr = 1e-4;
  double decay_factor = 0.5;
  int plateau_patience = 4;
  int stop_patience = 10;
  double clip_norm = 1.0;
  Index batch_size = 512;
  int max_epochs = 200;

  void validate() const;
};

/// Improvement-based plateau decay. An epoch improves when the monitored value
/// strictly beats the best seen so far.
class PlateauScheduler {
 public:
  struct Step {
    double lr;
    bool decayed;
  };

  /// With a baseline, the first observed epoch must beat it to count as an
  /// improvement; without one, the first epoch always improves.
  PlateauScheduler(const TrainSchedule& sched, bool higher_is_better,
                   std::optional<double> baseline = std::nullopt);

  Step step(double monitored);
  double lr() const { return lr_; }

 private:
  double lr_;
  double min_lr_;
  double decay_;
  int patience_;
  bool higher_;
  double best_;
  int bad_epochs_ = 0;
};

/// Stops after `patience` epochs without improvement and keeps a snapshot of
/// the parameters from the best epoch.
class EarlyStopping {
 public:
  EarlyStopping(int patience, bool higher_is_better, std::optional<double> baseline = std::nullopt);

  /// Returns true when training should stop.
  bool step(double monitored, const ParamStore& params);
  bool improved_last() const { return improved_; }
  int best_epoch() const { return best_epoch_; }
  double best() const { return best_; }
  bool has_snapshot() const { return !snapshot_.empty(); }
  void restore_best(ParamStore& params) const;

 private:
  int patience_;
  bool higher_;
  double best_;
  int bad_epochs_ = 0;
  int epoch_ = 0;
  int best_epoch_ = 0;
  bool improved_ = false;
  ParamStore::Snapshot snapshot_;
};

struct GradCheckTarget {
  std::string name;
  Matrix* value;    ///< perturbed in place, restored afterwards
  Matrix analytic;  ///< gradient to verify, same shape as *value
};

struct GradCheckEntry {
  std::string name;
  Index size = 0;
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double tolerance = 0.0;

  bool passed() const;
  double max_rel_error() const;
  std::vector<std::string> failing() const;
};

/// Relative error used by gradcheck: |a - n| / max(|a|, |n|, floor).
double gradcheck_rel_error(double analytic, double numeric);
inline constexpr double kGradCheckFloor = 1e-3;

/// Central differences of `loss` around every coordinate of every target.
GradCheckReport gradcheck(const std::function<double()>& loss, std::vector<GradCheckTarget> targets,
                          double tolerance, double step = 1e-5);

}  // namespace gaan
