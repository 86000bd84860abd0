#include "ttp/bounds.hpp"

#include <cmath>
#include <sstream>

#include "ttp/errors.hpp"

namespace ttp {

void LipschitzConstants::validate() const {
  if (!(p_k > 0.0 && p_a > 0.0 && f_k > 0.0 && f_a > 0.0))
    throw DomainError("Lipschitz constants must be positive");
}

std::string BoundReport::to_string() const {
  std::ostringstream os;
  os << (valid ? "value=" : "invalid (value would be ") << value << (valid ? "" : ")") << "  ["
     << inputs_echo << "]";
  return os.str();
}

double uniformity_gap_bound(double theta, long retain_count, double class_count) {
  if (!(theta > 0.0 && theta < 1.0)) throw DomainError("theta must lie in (0,1)");
  if (retain_count < 1 || class_count <= 1.0) throw DomainError("counts must be positive");
  return std::sqrt(2.0 * ((1.0 - theta) / theta) * double(retain_count) * std::log(class_count));
}

double theta_for_epsilon(long retain_count, double class_count, double epsilon) {
  if (!(epsilon > 0.0)) throw DomainError("epsilon must be > 0");
  if (retain_count < 1 || class_count <= 1.0) throw DomainError("counts must be positive");
  const double t = 2.0 * double(retain_count) * std::log(class_count);
  return t / (epsilon * epsilon + t);
}

double lambda_validity_threshold(double theta, double c_bound, const LipschitzConstants& consts) {
  consts.validate();
  if (theta < 0.0 || theta > 1.0) throw DomainError("theta must lie in [0,1]");
  if (!(c_bound > 0.0)) throw DomainError("c_bound must be > 0");
  const double p = consts.grad_lipschitz(theta);
  const double f = consts.hess_lipschitz(theta);
  const double tcf = 2.0 * theta * c_bound * f;
  return p + tcf + std::sqrt(tcf * (p + tcf + 8.0 * consts.p_k));
}

BoundReport retain_loss_gap_bound(double theta, double lambda, double c_bound,
                                  const LipschitzConstants& consts) {
  consts.validate();
  if (theta < 0.0 || theta > 1.0) throw DomainError("theta must lie in [0,1]");
  if (!(c_bound > 0.0)) throw DomainError("c_bound must be > 0");
  const double p = consts.grad_lipschitz(theta);
  const double f = consts.hess_lipschitz(theta);
  BoundReport rep;
  std::ostringstream echo;
  echo << "theta=" << theta << " lambda=" << lambda << " C=" << c_bound << " P_K=" << consts.p_k
       << " P_A=" << consts.p_a << " F_K=" << consts.f_k << " F_A=" << consts.f_a << " P=" << p
       << " F=" << f << " (main-text L read as P per the appendix derivation)";
  rep.inputs_echo = echo.str();

  const double disc = (lambda - p) * (lambda - p) -
                      4.0 * theta * c_bound * f * (2.0 * consts.p_k + lambda);
  if (disc < 0.0 || lambda < lambda_validity_threshold(theta, c_bound, consts)) {
    rep.valid = false;
    rep.value = 0.0;
    return rep;
  }
  const double dw = (lambda - p - std::sqrt(disc)) / (2.0 * f);
  rep.value = 0.5 * consts.p_k * dw * dw + lambda * c_bound * dw;
  rep.valid = true;
  return rep;
}

double estimator_b_constant(double theta, double lambda, const LipschitzConstants& consts,
                            long forget_count, long retain_count) {
  consts.validate();
  if (forget_count < 1 || retain_count < 1) throw DomainError("set sizes must be >= 1");
  if (!(theta > 0.0 && theta < 1.0)) throw DomainError("theta must lie in (0,1)");
  return std::max((theta * consts.p_k + lambda) / double(forget_count),
                  ((1.0 - theta) * consts.p_a + lambda) / double(retain_count));
}

long estimator_sample_requirement(int b, double lambda, double lambda_min, double theta,
                                  const LipschitzConstants& consts, long forget_count,
                                  long retain_count) {
  if (b < 1) throw DomainError("replica count b must be >= 1");
  const double denom = lambda + lambda_min;
  if (!(denom > 0.0)) throw DomainError("lambda + lambda_min must be > 0");
  const double ratio = estimator_b_constant(theta, lambda, consts, forget_count, retain_count) /
                       denom;
  const double raw = 2.0 * ratio * std::log(ratio * double(b));
  return std::max<long>(1, long(std::ceil(raw)));
}

}  // namespace ttp
