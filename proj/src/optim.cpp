#include "gaan/optim.hpp"

#include <algorithm>
#include <cmath>

namespace gaan {

void adam_step(ParamStore& store, double lr, const AdamConfig& cfg) {
  for (const auto& [name, t] : store.tensors()) {
    if (!t.grad.allFinite()) throw Error("non-finite gradient in parameter '" + name + "'");
  }
  const std::int64_t step = store.step() + 1;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
  for (auto& [_, t] : store.tensors()) {
    t.adam_m = cfg.beta1 * t.adam_m + (1.0 - cfg.beta1) * t.grad;
    t.adam_v = cfg.beta2 * t.adam_v + (1.0 - cfg.beta2) * t.grad.cwiseAbs2();
    const auto m_hat = t.adam_m.array() / c1;
    const auto v_hat = t.adam_v.array() / c2;
    t.value.array() -= lr * m_hat / (v_hat.sqrt() + cfg.eps);
    t.grad.setZero();
  }
  store.set_step(step);
}

double global_grad_norm(const ParamStore& store) {
  double sq = 0.0;
  for (const auto& [_, t] : store.tensors()) sq += t.grad.squaredNorm();
  return std::sqrt(sq);
}

double clip_global_norm(ParamStore& store, double max_norm) {
  const double norm = global_grad_norm(store);
  if (norm > max_norm) {
    const double scale = max_norm / norm;
    for (auto& [_, t] : store.tensors()) t.grad *= scale;
  }
  return norm;
}

void TrainSchedule::validate() const {
  if (!(initial_lr >= 0.0)) throw ConfigError("initial_lr must be >= 0");
  if (!(min_lr <= initial_lr)) throw ConfigError("min_lr must not exceed initial_lr");
  if (!(decay_factor > 0.0 && decay_factor < 1.0)) throw ConfigError("decay_factor must be in (0, 1)");
  if (!(clip_norm > 0.0)) throw ConfigError("clip_norm must be positive");
  if (plateau_patience < 1 || stop_patience < 1) throw ConfigError("patience values must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (max_epochs < 0) throw ConfigError("max_epochs must be >= 0");
}

namespace {

double initial_best(bool higher, std::optional<double> baseline) {
  if (baseline) return *baseline;
  return higher ? -std::numeric_limits<double>::infinity() : std::numeric_limits<double>::infinity();
}

bool improves(double value, double best, bool higher) { return higher ? value > best : value < best; }

}  // namespace

PlateauScheduler::PlateauScheduler(const TrainSchedule& sched, bool higher_is_better,
                                   std::optional<double> baseline)
    : lr_(sched.initial_lr),
      min_lr_(sched.min_lr),
      decay_(sched.decay_factor),
      patience_(sched.plateau_patience),
      higher_(higher_is_better),
      best_(initial_best(higher_is_better, baseline)) {}

PlateauScheduler::Step PlateauScheduler::step(double monitored) {
  if (!std::isfinite(monitored)) throw Error("scheduler: monitored value is not finite");
  if (improves(monitored, best_, higher_)) {
    best_ = monitored;
    bad_epochs_ = 0;
    return {lr_, false};
  }
  if (++bad_epochs_ < patience_) return {lr_, false};
  bad_epochs_ = 0;
  const double next = std::max(lr_ * decay_, min_lr_);
  const bool decayed = next < lr_;
  lr_ = next;
  return {lr_, decayed};
}

EarlyStopping::EarlyStopping(int patience, bool higher_is_better, std::optional<double> baseline)
    : patience_(patience), higher_(higher_is_better), best_(initial_best(higher_is_better, baseline)) {}

bool EarlyStopping::step(double monitored, const ParamStore& params) {
  if (!std::isfinite(monitored)) throw Error("early stopping: monitored value is not finite");
  ++epoch_;
  improved_ = improves(monitored, best_, higher_);
  if (improved_) {
    best_ = monitored;
    best_epoch_ = epoch_;
    bad_epochs_ = 0;
    snapshot_ = params.snapshot();
    return false;
  }
  return ++bad_epochs_ >= patience_;
}

void EarlyStopping::restore_best(ParamStore& params) const {
  if (!snapshot_.empty()) params.restore(snapshot_);
}

bool GradCheckReport::passed() const {
  return std::all_of(entries.begin(), entries.end(),
                     [this](const GradCheckEntry& e) { return e.max_rel_error < tolerance; });
}

double GradCheckReport::max_rel_error() const {
  double m = 0.0;
  for (const auto& e : entries) m = std::max(m, e.max_rel_error);
  return m;
}

std::vector<std::string> GradCheckReport::failing() const {
  std::vector<std::string> out;
  for (const auto& e : entries) {
    if (!(e.max_rel_error < tolerance)) out.push_back(e.name);
  }
  return out;
}

double gradcheck_rel_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), kGradCheckFloor});
  return std::abs(analytic - numeric) / denom;
}

GradCheckReport gradcheck(const std::function<double()>& loss, std::vector<GradCheckTarget> targets,
                          double tolerance, double step) {
  GradCheckReport report;
  report.tolerance = tolerance;
  for (auto& t : targets) {
    if (t.analytic.rows() != t.value->rows() || t.analytic.cols() != t.value->cols()) {
      throw ShapeError("gradcheck: analytic gradient shape mismatch for '" + t.name + "'");
    }
    GradCheckEntry e;
    e.name = t.name;
    e.size = t.value->size();
    for (Index i = 0; i < t.value->size(); ++i) {
      double& x = t.value->data()[i];
      const double saved = x;
      x = saved + step;
      const double up = loss();
      x = saved - step;
      const double down = loss();
      x = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double analytic = t.analytic.data()[i];
      e.max_abs_error = std::max(e.max_abs_error, std::abs(analytic - numeric));
      const double rel = gradcheck_rel_error(analytic, numeric);
      e.max_rel_error = std::isnan(rel) ? std::numeric_limits<double>::infinity() : std::max(e.max_rel_error, rel);
    }
    report.entries.push_back(std::move(e));
  }
  return report;
}

}  // namespace gaan
