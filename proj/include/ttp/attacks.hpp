#pragma once

#include <cstdint>

#include "ttp/model.hpp"

namespace ttp {

struct AttackConfig {
  double gamma = 8.0 / 255.0;  // l-inf radius
  double alpha = 0.0001;       // symmetry-breaking init scale
  int steps = 50;              // PGD iterations
  double step_size = 0.001;    // PGD step
  bool clamp_unit_box = true;  // keep adversarial pixels in [0,1]

  void validate() const;
};

// Smooth confidence surrogate: max-shifted logsumexp of the logits.
// rho >= max_j z_j and shifts in z add exactly the same shift to rho.
double confidence_objective(const Vector& logits);

// d rho / d x at input x (rho composed with the model).
Vector confidence_input_gradient(const ModelSpec& spec, const ParamVector& w, const Vector& x);

// x + N(0, gamma I) noise per example (gamma is the covariance scale, so the
// per-coordinate standard deviation is sqrt(gamma)); optional [0,1] clamp.
RowMatrix gauss_attack(const RowMatrix& forget_inputs, double gamma, bool clamp_unit_box,
                       std::uint64_t seed);

// Single sign-gradient step of size gamma from a jittered start:
//   x0 = x + U([-alpha*gamma, alpha*gamma])  per coordinate
//   x_adv = x + gamma * sign(d rho/d x | x0), sign(0) := 0.
RowMatrix fgsm_attack(const ModelSpec& spec, const ParamVector& w, const RowMatrix& forget_inputs,
                      const AttackConfig& cfg, std::uint64_t seed);

// `steps` sign-gradient ascent iterations of size step_size, each projected
// onto the l-inf gamma-ball around the original input.
RowMatrix pgd_attack(const ModelSpec& spec, const ParamVector& w, const RowMatrix& forget_inputs,
                     const AttackConfig& cfg, std::uint64_t seed);

}  // namespace ttp
