#include "ttp/attacks.hpp"

#include <cmath>

#include "ttp/errors.hpp"
#include "ttp/rng.hpp"

namespace ttp {

void AttackConfig::validate() const {
  if (!(gamma > 0.0)) throw DomainError("gamma must be > 0");
  if (alpha < 0.0) throw DomainError("alpha must be >= 0");
  if (steps < 1) throw DomainError("steps must be >= 1");
  if (!(step_size > 0.0)) throw DomainError("step_size must be > 0");
}

double confidence_objective(const Vector& logits) {
  require_finite(logits, "logits");
  return logsumexp(logits);
}

Vector confidence_input_gradient(const ModelSpec& spec, const ParamVector& w, const Vector& x) {
  // d rho / d z = softmax(z); chain through the network input
  const Vector p = forward(spec, w, x);
  if (spec.kind == ModelKind::LogReg) {
    Eigen::Map<const RowMatrix> W(w.values.data(), spec.class_count, spec.input_dim);
    return W.transpose() * p;
  }
  const std::size_t hd = std::size_t(spec.hidden_dim) * spec.input_dim;
  const std::size_t kh = std::size_t(spec.class_count) * spec.hidden_dim;
  Eigen::Map<const RowMatrix> W1(w.values.data(), spec.hidden_dim, spec.input_dim);
  Eigen::Map<const Vector> b1(w.values.data() + hd, spec.hidden_dim);
  Eigen::Map<const RowMatrix> W2(w.values.data() + hd + spec.hidden_dim, spec.class_count,
                                 spec.hidden_dim);
  const Vector a = W1 * x + b1;
  const Vector r = (a.array() > 0.0).cast<double>();
  const Vector da = (W2.transpose() * p).cwiseProduct(r);
  return W1.transpose() * da;
}

namespace {

double sign0(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

void clamp_unit(Vector& x) {
  x = x.cwiseMax(0.0).cwiseMin(1.0);
}

}  // namespace

RowMatrix gauss_attack(const RowMatrix& forget_inputs, double gamma, bool clamp_unit_box,
                       std::uint64_t seed) {
  if (!(gamma > 0.0)) throw DomainError("gamma must be > 0");
  RowMatrix out(forget_inputs.rows(), forget_inputs.cols());
  const double sd = std::sqrt(gamma);
  for (Eigen::Index i = 0; i < forget_inputs.rows(); ++i) {
    auto rng = derive_stream(seed, 0x67617573u, std::uint64_t(i));
    std::normal_distribution<double> nd(0.0, sd);
    Vector x = forget_inputs.row(i);
    for (Eigen::Index j = 0; j < x.size(); ++j) x[j] += nd(rng);
    if (clamp_unit_box) clamp_unit(x);
    out.row(i) = x;
  }
  return out;
}

RowMatrix fgsm_attack(const ModelSpec& spec, const ParamVector& w, const RowMatrix& forget_inputs,
                      const AttackConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  if (forget_inputs.cols() != spec.input_dim) throw ShapeError("attack input dimension mismatch");
  RowMatrix out(forget_inputs.rows(), forget_inputs.cols());
  for (Eigen::Index i = 0; i < forget_inputs.rows(); ++i) {
    auto rng = derive_stream(seed, 0x6667736du, std::uint64_t(i));
    std::uniform_real_distribution<double> jit(-cfg.alpha * cfg.gamma, cfg.alpha * cfg.gamma);
    Vector x0 = forget_inputs.row(i);
    for (Eigen::Index j = 0; j < x0.size(); ++j) x0[j] += jit(rng);
    const Vector g = confidence_input_gradient(spec, w, x0);
    Vector adv = forget_inputs.row(i);
    for (Eigen::Index j = 0; j < adv.size(); ++j) adv[j] += cfg.gamma * sign0(g[j]);
    if (cfg.clamp_unit_box) clamp_unit(adv);
    out.row(i) = adv;
  }
  return out;
}

RowMatrix pgd_attack(const ModelSpec& spec, const ParamVector& w, const RowMatrix& forget_inputs,
                     const AttackConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  if (forget_inputs.cols() != spec.input_dim) throw ShapeError("attack input dimension mismatch");
  RowMatrix out(forget_inputs.rows(), forget_inputs.cols());
  for (Eigen::Index i = 0; i < forget_inputs.rows(); ++i) {
    auto rng = derive_stream(seed, 0x70676420u, std::uint64_t(i));
    std::uniform_real_distribution<double> jit(-cfg.alpha * cfg.gamma, cfg.alpha * cfg.gamma);
    const Vector x = forget_inputs.row(i);
    Vector adv = x;
    for (Eigen::Index j = 0; j < adv.size(); ++j) adv[j] += jit(rng);
    for (int t = 0; t < cfg.steps; ++t) {
      const Vector g = confidence_input_gradient(spec, w, adv);
      for (Eigen::Index j = 0; j < adv.size(); ++j) {
        adv[j] += cfg.step_size * sign0(g[j]);
        adv[j] = std::clamp(adv[j], x[j] - cfg.gamma, x[j] + cfg.gamma);
      }
      if (cfg.clamp_unit_box) clamp_unit(adv);
    }
    out.row(i) = adv;
  }
  return out;
}

}  // namespace ttp
