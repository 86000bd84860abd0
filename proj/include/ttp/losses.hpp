#pragma once

#include <string>

#include "ttp/numeric.hpp"

namespace ttp {

enum class LossKind { CrossEntropy, KlToUniform, SquareToUniform };

std::string to_string(LossKind k);
LossKind loss_kind_from_string(const std::string& s);

// D_KL(p || U) = sum_i p_i ln(p_i k) = ln k - H(p), with 0 ln 0 := 0.
double kl_to_uniform(const Vector& p);

// sum_i (p_i - 1/k)^2.
double square_to_uniform(const Vector& p);

namespace detail {

// Logits-space kernels shared by gradients, HVPs and explicit Hessians.
// All take log-probabilities s = z - logsumexp(z) and p = exp(s).

double loss_value(LossKind kind, int label, const Vector& p, const Vector& s);

// d loss / d logits.
Vector loss_dz(LossKind kind, int label, const Vector& p, const Vector& s);

// d^2 loss / d logits^2 (k x k, symmetric). Label only matters for CrossEntropy,
// whose Hessian is label-free anyway.
Matrix loss_logits_hessian(LossKind kind, const Vector& p, const Vector& s);

}  // namespace detail
}  // namespace ttp
