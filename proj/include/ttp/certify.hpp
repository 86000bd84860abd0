#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "ttp/bounds.hpp"
#include "ttp/objective.hpp"

namespace ttp {

struct PrivacyBudget {
  double epsilon = 0.5;
  double delta = 0.05;
  // Pins the noise scale directly instead of deriving it from (Delta, eps,
  // delta); the certificate then records sigma_override=true and epsilon as
  // given (implied large). Mirrors treating sigma^2 as the hyperparameter.
  std::optional<double> sigma_override;
};

enum class CertifyMethod { ExactHessian, Estimator, Online };

// Emitted by every certified run; serializes to sorted key=value lines so a
// third party can re-verify sigma >= (Delta/eps) sqrt(2 ln(1.25/delta)).
struct Certificate {
  double epsilon = 0.0;
  double delta = 0.0;
  double theta = 0.0;
  double lambda = 0.0;
  double c_bound = 0.0;
  double delta_bound = 0.0;  // Delta
  double sigma = 0.0;
  double lambda_min = 0.0;
  CertifyMethod method = CertifyMethod::ExactHessian;
  bool sigma_override = false;
  std::uint64_t seed = 0;
  // estimator / online fields (zero when unused)
  int replicas = 0;  // b
  long steps = 0;    // n
  double j_bound = 0.0;
  double rho = 0.0;
  int online_k = 0;

  void validate() const;
  void save(const std::string& path) const;
  static Certificate load(const std::string& path);
};

// The sigma the budgets demand for a given Delta.
double required_sigma(double delta_bound, double epsilon, double delta);

// Checks sigma >= (Delta/eps) sqrt(2 ln(1.25/delta)) - 1e-12; trivially true
// under sigma-override (the record then pins sigma itself).
bool verify_certificate(const Certificate& cert);

// --- exact-Hessian path (Alg. 2 mechanics) -----------------------------------

struct NewtonOptions {
  // With the C-ball constraint active at w_star (||w_star|| ~ C and the
  // gradient nearly ball-normal), restrict the step to the tangent space so
  // the solve does not chase the constraint's multiplier through near-null
  // Hessian directions.
  bool tangent_ball = false;
  double residual_tol = 1e-8;
};

// w_tilde = w_star - (H + lambda I)^{-1} grad, solved by a positive definite
// factorization; verifies the residual against an independent HVP route.
ParamVector newton_step_exact(const ModelSpec& spec, const ParamVector& w_star, const Split& split,
                              const ParetoConfig& cfg, const NewtonOptions& opts = {});

// Delta = 2C(FC + lambda)/(lambda + lambda_min), F = theta f_k + (1-theta) f_a.
double delta_exact(const ParetoConfig& cfg, const LipschitzConstants& consts, double lambda_min);

// Smallest eigenvalue of the (lambda-free) objective Hessian; LogReg only,
// dense eigensolve, intended for desk-scale instances.
double hessian_min_eigenvalue(const ModelSpec& spec, const ParamVector& w, const Split& split,
                              const ParetoConfig& cfg);

// w_tilde + Y, Y ~ N(0, sigma^2 I), sigma = (Delta/eps) sqrt(2 ln(1.25/delta)).
std::pair<ParamVector, double> gaussian_mechanism(const ParamVector& w_tilde, double delta_bound,
                                                  double epsilon, double delta,
                                                  std::uint64_t seed);

ParamVector add_gaussian_noise(const ParamVector& w, double sigma, std::uint64_t seed);

std::pair<ParamVector, Certificate> certify_exact(const ModelSpec& spec, const ParamVector& w_star,
                                                  const Split& split, const ParetoConfig& cfg,
                                                  const LipschitzConstants& consts,
                                                  const PrivacyBudget& budget, double lambda_min,
                                                  std::uint64_t seed,
                                                  const NewtonOptions& opts = {});

// --- stochastic inverse-Hessian path (Alg. 3 / Alg. 4 mechanics) -------------

struct EstimatorParams {
  int replicas = 1;   // b
  long steps = 0;     // n
  double j_bound = 0; // J
  double rho = 0.05;
  double g_bound = 0;   // G
  double zeta_min = 0;  // zeta_min
  double lambda_min = 0;
};

// Applies one sampled Hessian H_t to v (out = H_t v), drawing randomness from
// the replica's stream.
using HessianSampler = std::function<void(std::mt19937_64&, const Vector&, Vector&)>;

// b replicas of P_t = g + (I - H_t/J) P_{t-1}, P_0 = g; returns mean(P_n)/J,
// an estimate of (E[H_t])^{-1} g. Replicas own derived streams; the reduction
// order over replicas is fixed.
Vector neumann_inverse_apply(const HessianSampler& sampler, const Vector& g, double j_bound,
                             long n, int b, std::uint64_t seed);

// Mixture draw: one forget example with probability theta (term
// |D_f| hess l_K + lambda I/(2 theta)) else one retain example
// (|D_r| hess l_A + lambda I/(2(1-theta))); expectation is H + lambda I.
// The split reference must outlive the sampler.
HessianSampler make_mixture_sampler(const ModelSpec& spec, const ParamVector& w_star,
                                    const Split& split, const ParetoConfig& cfg);

ParamVector estimate_inverse_hvp(const ModelSpec& spec, const ParamVector& w_star,
                                 const Split& split, const ParetoConfig& cfg, double j_bound,
                                 long n, int b, std::uint64_t seed, const ParamVector& g);

// Delta of the estimator path:
//   [2C(FC+lambda)+G]/(lambda+lambda_min)
//   + (16 (B/zeta_min) sqrt(ln(dim/rho)/b) + 1/16) (2 C P + G)
double delta_estimated(const ParetoConfig& cfg, const LipschitzConstants& consts,
                       const EstimatorParams& est, Eigen::Index param_dim, long forget_count,
                       long retain_count);

std::pair<ParamVector, Certificate> certify_estimated(const ModelSpec& spec,
                                                      const ParamVector& w_star,
                                                      const Split& split, const ParetoConfig& cfg,
                                                      const LipschitzConstants& consts,
                                                      const PrivacyBudget& budget,
                                                      const EstimatorParams& est,
                                                      std::uint64_t seed);

// Sequential forget requests; retain shrinks per request, b = 1, and the final
// noise uses sigma = (Delta/(k eps)) sqrt(2 ln(1.25/delta)).
std::pair<ParamVector, Certificate> certify_online(const ModelSpec& spec,
                                                   const ParamVector& w_star,
                                                   const LabeledDataset& dataset,
                                                   const std::vector<std::vector<int>>& requests,
                                                   const ParetoConfig& cfg,
                                                   const LipschitzConstants& consts,
                                                   const PrivacyBudget& budget,
                                                   const EstimatorParams& est, std::uint64_t seed);

// --- hyperparameter defaults -------------------------------------------------

struct PartialHyperparams {
  double theta = 0.75;
  std::optional<double> p_k, p_a, f_k, f_a;  // Lipschitz constants
  std::optional<double> lambda;
  std::optional<double> lambda_min;
  std::optional<double> j_bound;
  std::optional<double> zeta_min;
  std::optional<double> g_bound;
  std::optional<double> c_bound;
  std::optional<int> replicas;
  std::optional<long> steps;
};

struct ResolvedHyperparams {
  double theta;
  LipschitzConstants consts;
  double lambda;
  double lambda_min;
  double j_bound;
  double zeta_min;
  double g_bound;
  double c_bound;
  int replicas;
  long steps;
  std::vector<std::string> defaulted;  // names filled by the default rules
};

// Fills unset fields: constants 1; lambda_min 0; lambda = theta p_k +
// (1-theta) p_a; J = 2 lambda; zeta_min = lambda + lambda_min; G = ||grad at
// w_star|| when supplied; C = 10; b = 1; n from the sample requirement.
ResolvedHyperparams resolve_defaults(const PartialHyperparams& partial, long forget_count,
                                     long retain_count,
                                     std::optional<double> grad_norm_at_w_star = std::nullopt);

}  // namespace ttp
