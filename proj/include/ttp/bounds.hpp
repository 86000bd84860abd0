#pragma once

#include <string>

#include "ttp/numeric.hpp"

namespace ttp {

// Gradient- and Hessian-Lipschitz constants of the scalarized objective; the
// per-example constants are these divided by |D_f| resp. |D_r|.
struct LipschitzConstants {
  double p_k = 1.0;  // forget gradient-Lipschitz
  double p_a = 1.0;  // retain gradient-Lipschitz
  double f_k = 1.0;  // forget Hessian-Lipschitz
  double f_a = 1.0;  // retain Hessian-Lipschitz

  void validate() const;
  // P(theta) and F(theta); recomputed on demand, never cached.
  double grad_lipschitz(double theta) const { return theta * p_k + (1.0 - theta) * p_a; }
  double hess_lipschitz(double theta) const { return theta * f_k + (1.0 - theta) * f_a; }
};

struct BoundReport {
  double value = 0.0;
  bool valid = false;
  std::string inputs_echo;  // all parameters, for auditability

  std::string to_string() const;
};

// sup-distance of the global Pareto solution's forget outputs from uniform:
//   sqrt(2 * ((1-theta)/theta) * |D_r| * ln k)
double uniformity_gap_bound(double theta, long retain_count, double class_count);

// Smallest theta guaranteeing the uniformity gap is at most epsilon:
//   2 |D_r| ln k / (eps^2 + 2 |D_r| ln k); always in (0,1).
double theta_for_epsilon(long retain_count, double class_count, double epsilon);

// lambda >= P + 2 theta C F + sqrt(2 theta C F (P + 2 theta C F + 8 p_k))
// makes the retain-loss gap bound applicable.
double lambda_validity_threshold(double theta, double c_bound, const LipschitzConstants& consts);

// Retain-loss gap |alpha* - alpha(theta)| bound:
//   dw = (lambda - P - sqrt((lambda-P)^2 - 4 theta C F (2 p_k + lambda))) / (2F)
//   bound = (p_k/2) dw^2 + lambda C dw
// valid=false when the discriminant is negative or lambda is below the
// validity threshold.
BoundReport retain_loss_gap_bound(double theta, double lambda, double c_bound,
                                  const LipschitzConstants& consts);

// Sample count for the inverse-Hessian estimator:
//   ceil(2 (B/(lambda+lambda_min)) ln((B/(lambda+lambda_min)) b)), floored at 1,
// with B = max{(theta p_k + lambda)/|D_f|, ((1-theta) p_a + lambda)/|D_r|}.
long estimator_sample_requirement(int b, double lambda, double lambda_min, double theta,
                                  const LipschitzConstants& consts, long forget_count,
                                  long retain_count);

double estimator_b_constant(double theta, double lambda, const LipschitzConstants& consts,
                            long forget_count, long retain_count);

}  // namespace ttp
