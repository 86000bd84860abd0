#include "ttp/losses.hpp"

#include <cmath>

#include "ttp/errors.hpp"

namespace ttp {

std::string to_string(LossKind k) {
  switch (k) {
    case LossKind::CrossEntropy: return "cross_entropy";
    case LossKind::KlToUniform: return "kl_to_uniform";
    case LossKind::SquareToUniform: return "square_to_uniform";
  }
  throw ConfigError("unknown loss kind");
}

LossKind loss_kind_from_string(const std::string& s) {
  if (s == "cross_entropy") return LossKind::CrossEntropy;
  if (s == "kl_to_uniform") return LossKind::KlToUniform;
  if (s == "square_to_uniform") return LossKind::SquareToUniform;
  throw ConfigError("unknown loss kind: " + s);
}

double kl_to_uniform(const Vector& p) {
  require_simplex(p);
  const double k = static_cast<double>(p.size());
  double acc = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (p[i] > 0.0) acc += p[i] * std::log(p[i] * k);
  }
  return std::max(acc, 0.0);
}

double square_to_uniform(const Vector& p) {
  require_simplex(p);
  const double u = 1.0 / static_cast<double>(p.size());
  return (p.array() - u).square().sum();
}

namespace detail {

double loss_value(LossKind kind, int label, const Vector& p, const Vector& s) {
  const Eigen::Index k = p.size();
  switch (kind) {
    case LossKind::CrossEntropy:
      return -s[label];
    case LossKind::KlToUniform:
      // ln k + sum p_i s_i, computed from log-probs so one-hot outputs stay finite
      return std::max(std::log(static_cast<double>(k)) + p.dot(s), 0.0);
    case LossKind::SquareToUniform:
      return (p.array() - 1.0 / static_cast<double>(k)).square().sum();
  }
  throw ConfigError("unknown loss kind");
}

Vector loss_dz(LossKind kind, int label, const Vector& p, const Vector& s) {
  const Eigen::Index k = p.size();
  switch (kind) {
    case LossKind::CrossEntropy: {
      Vector dz = p;
      dz[label] -= 1.0;
      return dz;
    }
    case LossKind::KlToUniform: {
      // dz_j = p_j (s_j - p.s)
      const double sbar = p.dot(s);
      return p.array() * (s.array() - sbar);
    }
    case LossKind::SquareToUniform: {
      // g = 2(p - 1/k); dz = p (g - p.g)
      const Vector g = 2.0 * (p.array() - 1.0 / static_cast<double>(k));
      const double gbar = p.dot(g);
      return p.array() * (g.array() - gbar);
    }
  }
  throw ConfigError("unknown loss kind");
}

Matrix loss_logits_hessian(LossKind kind, const Vector& p, const Vector& s) {
  const Eigen::Index k = p.size();
  switch (kind) {
    case LossKind::CrossEntropy: {
      Matrix a = -(p * p.transpose());
      a.diagonal() += p;
      return a;
    }
    case LossKind::KlToUniform: {
      // A_jm = d_jm p_j (u_j + 1) - p_j p_m (u_j + u_m + 1), u = s - (p.s) 1
      const double sbar = p.dot(s);
      const Vector u = s.array() - sbar;
      Matrix a(k, k);
      for (Eigen::Index j = 0; j < k; ++j)
        for (Eigen::Index m = 0; m < k; ++m)
          a(j, m) = -p[j] * p[m] * (u[j] + u[m] + 1.0);
      for (Eigen::Index j = 0; j < k; ++j) a(j, j) += p[j] * (u[j] + 1.0);
      return a;
    }
    case LossKind::SquareToUniform: {
      // With g = 2(p - 1/k), gbar = p.g, s2 = p.p:
      //   A_jm = d_jm p_j (g_j - gbar + 2 p_j)
      //          - p_j p_m (g_j + g_m - 2 gbar + 2 p_j + 2 p_m - 2 s2)
      const Vector g = 2.0 * (p.array() - 1.0 / static_cast<double>(k));
      const double gbar = p.dot(g);
      const double s2 = p.squaredNorm();
      Matrix a(k, k);
      for (Eigen::Index j = 0; j < k; ++j)
        for (Eigen::Index m = 0; m < k; ++m)
          a(j, m) = -p[j] * p[m] * (g[j] + g[m] - 2.0 * gbar + 2.0 * (p[j] + p[m]) - 2.0 * s2);
      for (Eigen::Index j = 0; j < k; ++j) a(j, j) += p[j] * (g[j] - gbar + 2.0 * p[j]);
      return a;
    }
  }
  throw ConfigError("unknown loss kind");
}

}  // namespace detail
}  // namespace ttp
