#pragma once

#include "ttp/data.hpp"
#include "ttp/model.hpp"

namespace ttp {

// theta-scalarized Pareto objective over a forget/retain split:
//   theta * sum_{D_f} l_K + (1-theta) * sum_{D_r} l_A + (lambda/2) ||w||^2
// with the weight-norm cap ||w||_2 <= c_bound where a caller enforces it.
struct ParetoConfig {
  double theta = 0.75;
  double lambda = 0.0;
  double c_bound = 10.0;
  LossKind forget_loss = LossKind::KlToUniform;
  LossKind retain_loss = LossKind::CrossEntropy;

  void validate() const;
};

double pareto_value(const ModelSpec& spec, const ParamVector& w, const Split& split,
                    const ParetoConfig& cfg);

ParamVector pareto_gradient(const ModelSpec& spec, const ParamVector& w, const Split& split,
                            const ParetoConfig& cfg);

// Internal full-batch forms over raw parameter vectors (theta = 0 permitted for
// baseline solves).
double pareto_value_raw(const ModelSpec& spec, const Vector& w, const Split& split,
                        const ParetoConfig& cfg, bool allow_theta_edges = false);
void pareto_gradient_raw(const ModelSpec& spec, const Vector& w, const Split& split,
                         const ParetoConfig& cfg, Vector& grad, bool allow_theta_edges = false);

// w if ||w|| <= C, else w * (C/||w||); idempotent.
ParamVector project_ball(const ParamVector& w, double c_bound);
void project_ball_raw(Vector& w, double c_bound);

// The objective here weights every per-example term by theta or (1-theta)
// (finite sums). Reported tables in the source experiments weight whole-set
// means instead; this converts a mean-form (theta, lambda) into the sum-form
// pair that induces the same minimizer.
struct SumFormParams {
  double theta;
  double lambda;
};
SumFormParams mean_to_sum_form(double theta_mean, double lambda_mean, Eigen::Index forget_count,
                               Eigen::Index retain_count);

}  // namespace ttp
