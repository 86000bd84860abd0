#include "ttp/objective.hpp"

#include "ttp/errors.hpp"

namespace ttp {

void ParetoConfig::validate() const {
  if (!(theta > 0.0 && theta < 1.0)) throw DomainError("theta must lie in (0,1)");
  if (lambda < 0.0) throw DomainError("lambda must be >= 0");
  if (!(c_bound > 0.0)) throw DomainError("c_bound must be > 0");
  if (retain_loss != LossKind::CrossEntropy)
    throw ConfigError("retain loss must be cross entropy");
  if (forget_loss == LossKind::CrossEntropy)
    throw ConfigError("forget loss must be a to-uniform loss");
}

namespace {

void check_split(const Split& split, bool allow_theta_edges) {
  if (split.dataset == nullptr) throw ConfigError("split has no dataset");
  if (split.forget_idx.empty()) throw DomainError("forget set is empty");
  if (split.retain_idx.empty() && !allow_theta_edges)
    throw DomainError("retain set is empty");
}

}  // namespace

double pareto_value_raw(const ModelSpec& spec, const Vector& w, const Split& split,
                        const ParetoConfig& cfg, bool allow_theta_edges) {
  check_split(split, allow_theta_edges);
  const LabeledDataset& data = *split.dataset;
  double value = 0.0;
  Vector dummy = Vector::Zero(w.size());
  if (cfg.theta != 0.0)
    value += batch_loss_grad(spec, w, data.features, {}, split.forget_idx, cfg.forget_loss,
                             cfg.theta, dummy);
  if (cfg.theta != 1.0 && !split.retain_idx.empty())
    value += batch_loss_grad(spec, w, data.features, data.labels, split.retain_idx,
                             cfg.retain_loss, 1.0 - cfg.theta, dummy);
  value += 0.5 * cfg.lambda * w.squaredNorm();
  return value;
}

void pareto_gradient_raw(const ModelSpec& spec, const Vector& w, const Split& split,
                         const ParetoConfig& cfg, Vector& grad, bool allow_theta_edges) {
  check_split(split, allow_theta_edges);
  const LabeledDataset& data = *split.dataset;
  grad.setZero(w.size());
  if (cfg.theta != 0.0)
    batch_loss_grad(spec, w, data.features, {}, split.forget_idx, cfg.forget_loss, cfg.theta,
                    grad);
  if (cfg.theta != 1.0 && !split.retain_idx.empty())
    batch_loss_grad(spec, w, data.features, data.labels, split.retain_idx, cfg.retain_loss,
                    1.0 - cfg.theta, grad);
  grad += cfg.lambda * w;
}

double pareto_value(const ModelSpec& spec, const ParamVector& w, const Split& split,
                    const ParetoConfig& cfg) {
  cfg.validate();
  if (w.spec != spec) throw ShapeError("parameter vector spec mismatch");
  return pareto_value_raw(spec, w.values, split, cfg);
}

ParamVector pareto_gradient(const ModelSpec& spec, const ParamVector& w, const Split& split,
                            const ParetoConfig& cfg) {
  cfg.validate();
  if (w.spec != spec) throw ShapeError("parameter vector spec mismatch");
  ParamVector g{Vector::Zero(w.values.size()), spec};
  pareto_gradient_raw(spec, w.values, split, cfg, g.values);
  return g;
}

void project_ball_raw(Vector& w, double c_bound) {
  if (!(c_bound > 0.0)) throw DomainError("c_bound must be > 0");
  const double norm = w.norm();
  if (norm > c_bound) w *= c_bound / norm;
}

ParamVector project_ball(const ParamVector& w, double c_bound) {
  ParamVector out = w;
  project_ball_raw(out.values, c_bound);
  return out;
}

SumFormParams mean_to_sum_form(double theta_mean, double lambda_mean, Eigen::Index forget_count,
                               Eigen::Index retain_count) {
  if (forget_count < 1 || retain_count < 1)
    throw DomainError("mean_to_sum_form requires nonempty sets");
  if (!(theta_mean >= 0.0 && theta_mean <= 1.0)) throw DomainError("theta must lie in [0,1]");
  const double a = theta_mean / double(forget_count);
  const double b = (1.0 - theta_mean) / double(retain_count);
  const double z = a + b;  // mean-form objective = z * sum-form objective
  return {a / z, lambda_mean / z};
}

}  // namespace ttp
