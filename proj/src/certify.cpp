#include "ttp/certify.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "ttp/errors.hpp"
#include "ttp/rng.hpp"

namespace ttp {

namespace {

constexpr std::uint64_t kNoiseTag = 0x6e6f6973u;
constexpr std::uint64_t kEstTag = 0x65737469u;

std::string method_name(CertifyMethod m) {
  switch (m) {
    case CertifyMethod::ExactHessian: return "exact";
    case CertifyMethod::Estimator: return "estimator";
    case CertifyMethod::Online: return "online";
  }
  throw ConfigError("unknown certify method");
}

CertifyMethod method_from_name(const std::string& s) {
  if (s == "exact") return CertifyMethod::ExactHessian;
  if (s == "estimator") return CertifyMethod::Estimator;
  if (s == "online") return CertifyMethod::Online;
  throw FormatError("unknown certificate method: " + s);
}

std::vector<LossTerm> scalarized_terms(const Split& split, const ParetoConfig& cfg) {
  const LabeledDataset& data = *split.dataset;
  std::vector<LossTerm> terms;
  terms.reserve(split.forget_idx.size() + split.retain_idx.size());
  for (int i : split.forget_idx)
    terms.emplace_back(data.features.row(i).data(), data.features.cols(), data.labels[size_t(i)],
                       cfg.forget_loss, cfg.theta);
  for (int i : split.retain_idx)
    terms.emplace_back(data.features.row(i).data(), data.features.cols(), data.labels[size_t(i)],
                       cfg.retain_loss, 1.0 - cfg.theta);
  return terms;
}

}  // namespace

double required_sigma(double delta_bound, double epsilon, double delta) {
  if (delta_bound < 0.0) throw DomainError("delta_bound must be >= 0");
  if (!(epsilon > 0.0 && epsilon < 1.0))
    throw BudgetError("epsilon must lie in (0,1); pin sigma via PrivacyBudget::sigma_override "
                      "to run outside the analyzed range");
  if (!(delta > 0.0 && delta < 1.0)) throw BudgetError("delta must lie in (0,1)");
  return delta_bound / epsilon * std::sqrt(2.0 * std::log(1.25 / delta));
}

void Certificate::validate() const {
  if (!(delta > 0.0 && delta < 1.0)) throw BudgetError("certificate delta must lie in (0,1)");
  if (!sigma_override) {
    if (!(epsilon > 0.0 && epsilon < 1.0))
      throw BudgetError("certificate epsilon must lie in (0,1) unless sigma_override is set");
    const double denom = method == CertifyMethod::Online ? double(online_k) * epsilon : epsilon;
    const double need = delta_bound / denom * std::sqrt(2.0 * std::log(1.25 / delta));
    if (sigma < need - 1e-12)
      throw BudgetError("certificate sigma is below the Gaussian-mechanism requirement");
  }
}

bool verify_certificate(const Certificate& cert) {
  try {
    cert.validate();
  } catch (const Error&) {
    return false;
  }
  return true;
}

void Certificate::save(const std::string& path) const {
  std::ofstream os(path);
  if (!os) throw FormatError("cannot open certificate for writing: " + path);
  os.precision(17);
  // keys sorted
  os << "c_bound=" << c_bound << "\n";
  os << "delta=" << delta << "\n";
  os << "delta_bound=" << delta_bound << "\n";
  os << "epsilon=" << epsilon << "\n";
  os << "j_bound=" << j_bound << "\n";
  os << "lambda=" << lambda << "\n";
  os << "lambda_min=" << lambda_min << "\n";
  os << "method=" << method_name(method) << "\n";
  os << "online_k=" << online_k << "\n";
  os << "replicas=" << replicas << "\n";
  os << "rho=" << rho << "\n";
  os << "seed=" << seed << "\n";
  os << "sigma=" << sigma << "\n";
  os << "sigma_override=" << (sigma_override ? "true" : "false") << "\n";
  os << "steps=" << steps << "\n";
  os << "theta=" << theta << "\n";
}

Certificate Certificate::load(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw FormatError("cannot open certificate: " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError(path + ": bad certificate line: " + line);
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  auto need = [&](const char* key) {
    auto it = kv.find(key);
    if (it == kv.end()) throw FormatError(path + ": missing certificate key: " + key);
    return it->second;
  };
  Certificate c;
  c.c_bound = std::stod(need("c_bound"));
  c.delta = std::stod(need("delta"));
  c.delta_bound = std::stod(need("delta_bound"));
  c.epsilon = std::stod(need("epsilon"));
  c.j_bound = std::stod(need("j_bound"));
  c.lambda = std::stod(need("lambda"));
  c.lambda_min = std::stod(need("lambda_min"));
  c.method = method_from_name(need("method"));
  c.online_k = std::stoi(need("online_k"));
  c.replicas = std::stoi(need("replicas"));
  c.rho = std::stod(need("rho"));
  c.seed = std::stoull(need("seed"));
  c.sigma = std::stod(need("sigma"));
  c.sigma_override = need("sigma_override") == "true";
  c.steps = std::stol(need("steps"));
  c.theta = std::stod(need("theta"));
  return c;
}

// --- exact path ---------------------------------------------------------------

ParamVector newton_step_exact(const ModelSpec& spec, const ParamVector& w_star, const Split& split,
                              const ParetoConfig& cfg, const NewtonOptions& opts) {
  cfg.validate();
  split.validate();
  if (spec.kind != ModelKind::LogReg)
    throw UnsupportedError("exact-Hessian certification supports LogReg only");
  if (w_star.spec != spec) throw ShapeError("w_star spec mismatch");

  Vector g(w_star.values.size());
  pareto_gradient_raw(spec, w_star.values, split, cfg, g);
  const double gnorm = g.norm();

  if (opts.tangent_ball) {
    const double wnorm = w_star.values.norm();
    if (wnorm >= cfg.c_bound * (1.0 - 1e-6)) {
      const Vector u = w_star.values / wnorm;
      g -= g.dot(u) * u;  // KKT-reduced direction on the active ball
    }
  }

  const auto terms = scalarized_terms(split, cfg);
  Matrix H = explicit_hessian(spec, w_star, terms, cfg.lambda);
  Eigen::LLT<Eigen::Ref<Matrix>> llt(H);  // in place; H holds the factor afterwards
  if (llt.info() != Eigen::Success)
    throw SpectralError("H + lambda I is not positive definite; increase lambda");
  const Vector step = llt.solve(g);

  // independent residual route: (H + lambda I) step via HVPs
  const LabeledDataset& data = *split.dataset;
  Vector hstep = Vector::Zero(step.size());
  batch_hvp(spec, w_star.values, data.features, {}, split.forget_idx, cfg.forget_loss, cfg.theta,
            step, hstep);
  batch_hvp(spec, w_star.values, data.features, data.labels, split.retain_idx, cfg.retain_loss,
            1.0 - cfg.theta, step, hstep);
  hstep += cfg.lambda * step;
  if (gnorm > 0.0 && (hstep - g).norm() > opts.residual_tol * std::max(gnorm, 1.0))
    throw SpectralError("Newton solve residual too large; increase lambda");

  return ParamVector{w_star.values - step, spec};
}

double delta_exact(const ParetoConfig& cfg, const LipschitzConstants& consts, double lambda_min) {
  consts.validate();
  if (!(cfg.lambda + lambda_min > 0.0)) throw DomainError("lambda + lambda_min must be > 0");
  if (cfg.c_bound < 0.0) throw DomainError("c_bound must be >= 0");
  const double f = consts.hess_lipschitz(cfg.theta);
  return 2.0 * cfg.c_bound * (f * cfg.c_bound + cfg.lambda) / (cfg.lambda + lambda_min);
}

double hessian_min_eigenvalue(const ModelSpec& spec, const ParamVector& w, const Split& split,
                              const ParetoConfig& cfg) {
  const auto terms = scalarized_terms(split, cfg);
  const Matrix H = explicit_hessian(spec, w, terms, 0.0);
  Eigen::SelfAdjointEigenSolver<Matrix> es(H, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

ParamVector add_gaussian_noise(const ParamVector& w, double sigma, std::uint64_t seed) {
  if (sigma < 0.0) throw DomainError("sigma must be >= 0");
  ParamVector out = w;
  if (sigma == 0.0) return out;
  auto rng = derive_stream(seed, kNoiseTag);
  std::normal_distribution<double> nd(0.0, sigma);
  for (Eigen::Index i = 0; i < out.values.size(); ++i) out.values[i] += nd(rng);
  return out;
}

std::pair<ParamVector, double> gaussian_mechanism(const ParamVector& w_tilde, double delta_bound,
                                                  double epsilon, double delta,
                                                  std::uint64_t seed) {
  const double sigma = required_sigma(delta_bound, epsilon, delta);
  return {add_gaussian_noise(w_tilde, sigma, seed), sigma};
}

std::pair<ParamVector, Certificate> certify_exact(const ModelSpec& spec, const ParamVector& w_star,
                                                  const Split& split, const ParetoConfig& cfg,
                                                  const LipschitzConstants& consts,
                                                  const PrivacyBudget& budget, double lambda_min,
                                                  std::uint64_t seed, const NewtonOptions& opts) {
  ParamVector w_tilde = newton_step_exact(spec, w_star, split, cfg, opts);
  // projection onto the constraint ball is non-expansive toward the in-ball
  // target, so the Delta bound still applies
  project_ball_raw(w_tilde.values, cfg.c_bound);
  const double delta_bound = delta_exact(cfg, consts, lambda_min);
  const double sigma = budget.sigma_override ? *budget.sigma_override
                                             : required_sigma(delta_bound, budget.epsilon,
                                                              budget.delta);
  ParamVector w_minus = add_gaussian_noise(w_tilde, sigma, seed);
  project_ball_raw(w_minus.values, cfg.c_bound);  // post-processing

  Certificate cert;
  cert.epsilon = budget.epsilon;
  cert.delta = budget.delta;
  cert.theta = cfg.theta;
  cert.lambda = cfg.lambda;
  cert.c_bound = cfg.c_bound;
  cert.delta_bound = delta_bound;
  cert.sigma = sigma;
  cert.lambda_min = lambda_min;
  cert.method = CertifyMethod::ExactHessian;
  cert.sigma_override = budget.sigma_override.has_value();
  cert.seed = seed;
  cert.validate();
  return {std::move(w_minus), std::move(cert)};
}

// --- estimator path -------------------------------------------------------------

Vector neumann_inverse_apply(const HessianSampler& sampler, const Vector& g, double j_bound,
                             long n, int b, std::uint64_t seed) {
  if (!(j_bound > 0.0)) throw DomainError("j_bound must be > 0");
  if (n < 1) throw DomainError("step count n must be >= 1");
  if (b < 1) throw DomainError("replica count b must be >= 1");
  Vector sum = Vector::Zero(g.size());
  Vector p(g.size()), hp(g.size());
  const double blowup = 1e12 * std::max(1.0, g.norm());
  for (int j = 0; j < b; ++j) {
    auto rng = derive_stream(seed, kEstTag, std::uint64_t(j));
    p = g;
    for (long t = 0; t < n; ++t) {
      sampler(rng, p, hp);
      p += g - hp / j_bound;
      if (!(p.squaredNorm() < blowup * blowup))
        throw SpectralError(
            "inverse-Hessian estimator diverged at step " + std::to_string(t) +
            "; j_bound (J) is likely below the sampled Hessian norms - supply honest "
            "Lipschitz constants or a larger J");
    }
    sum += p;
  }
  return sum / (double(b) * j_bound);
}

HessianSampler make_mixture_sampler(const ModelSpec& spec, const ParamVector& w_star,
                                    const Split& split, const ParetoConfig& cfg) {
  if (!(cfg.theta > 0.0 && cfg.theta < 1.0))
    throw DomainError("theta must lie in (0,1): mixture probabilities undefined otherwise");
  if (w_star.spec != spec) throw ShapeError("spec mismatch");
  if (split.forget_idx.empty() || split.retain_idx.empty())
    throw DomainError("both split sides must be nonempty");

  // per-draw term |set| hess(l) + lambda I / (2 prob); expectation H + lambda I
  return [&spec, &w_star, &split, cfg](std::mt19937_64& rng, const Vector& v, Vector& out) {
    const LabeledDataset& data = *split.dataset;
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    out.setZero();
    if (coin(rng) < cfg.theta) {
      std::uniform_int_distribution<std::size_t> pick(0, split.forget_idx.size() - 1);
      const int i = split.forget_idx[pick(rng)];
      batch_hvp(spec, w_star.values, data.features, {}, std::span<const int>(&i, 1),
                cfg.forget_loss, double(split.forget_idx.size()), v, out);
      out += (cfg.lambda / (2.0 * cfg.theta)) * v;
    } else {
      std::uniform_int_distribution<std::size_t> pick(0, split.retain_idx.size() - 1);
      const int i = split.retain_idx[pick(rng)];
      batch_hvp(spec, w_star.values, data.features, data.labels, std::span<const int>(&i, 1),
                cfg.retain_loss, double(split.retain_idx.size()), v, out);
      out += (cfg.lambda / (2.0 * (1.0 - cfg.theta))) * v;
    }
  };
}

ParamVector estimate_inverse_hvp(const ModelSpec& spec, const ParamVector& w_star,
                                 const Split& split, const ParetoConfig& cfg, double j_bound,
                                 long n, int b, std::uint64_t seed, const ParamVector& g) {
  if (g.spec != spec) throw ShapeError("spec mismatch");
  const HessianSampler sampler = make_mixture_sampler(spec, w_star, split, cfg);
  return ParamVector{neumann_inverse_apply(sampler, g.values, j_bound, n, b, seed), spec};
}

double delta_estimated(const ParetoConfig& cfg, const LipschitzConstants& consts,
                       const EstimatorParams& est, Eigen::Index param_dim, long forget_count,
                       long retain_count) {
  consts.validate();
  if (!(est.rho > 0.0 && est.rho < 1.0)) throw DomainError("rho must lie in (0,1)");
  if (!(est.zeta_min > 0.0)) throw DomainError("zeta_min must be > 0");
  if (est.g_bound < 0.0) throw DomainError("g_bound must be >= 0");
  if (est.replicas < 1) throw DomainError("replica count b must be >= 1");
  const double denom = cfg.lambda + est.lambda_min;
  if (!(denom > 0.0)) throw DomainError("lambda + lambda_min must be > 0");
  const double f = consts.hess_lipschitz(cfg.theta);
  const double p = consts.grad_lipschitz(cfg.theta);
  const double bconst =
      estimator_b_constant(cfg.theta, cfg.lambda, consts, forget_count, retain_count);
  const double first = (2.0 * cfg.c_bound * (f * cfg.c_bound + cfg.lambda) + est.g_bound) / denom;
  const double conc = 16.0 * (bconst / est.zeta_min) *
                          std::sqrt(std::log(double(param_dim) / est.rho) / double(est.replicas)) +
                      1.0 / 16.0;
  return first + conc * (2.0 * cfg.c_bound * p + est.g_bound);
}

namespace {

Certificate make_estimator_certificate(const ParetoConfig& cfg, const PrivacyBudget& budget,
                                       const EstimatorParams& est, double delta_bound,
                                       double sigma, CertifyMethod method, int online_k,
                                       std::uint64_t seed) {
  Certificate cert;
  cert.epsilon = budget.epsilon;
  cert.delta = budget.delta;
  cert.theta = cfg.theta;
  cert.lambda = cfg.lambda;
  cert.c_bound = cfg.c_bound;
  cert.delta_bound = delta_bound;
  cert.sigma = sigma;
  cert.lambda_min = est.lambda_min;
  cert.method = method;
  cert.sigma_override = budget.sigma_override.has_value();
  cert.seed = seed;
  cert.replicas = est.replicas;
  cert.steps = est.steps;
  cert.j_bound = est.j_bound;
  cert.rho = est.rho;
  cert.online_k = online_k;
  cert.validate();
  return cert;
}

}  // namespace

std::pair<ParamVector, Certificate> certify_estimated(const ModelSpec& spec,
                                                      const ParamVector& w_star,
                                                      const Split& split, const ParetoConfig& cfg,
                                                      const LipschitzConstants& consts,
                                                      const PrivacyBudget& budget,
                                                      const EstimatorParams& est,
                                                      std::uint64_t seed) {
  cfg.validate();
  split.validate();
  const long nf = long(split.forget_idx.size());
  const long nr = long(split.retain_idx.size());
  const long n_min = estimator_sample_requirement(est.replicas, cfg.lambda, est.lambda_min,
                                                  cfg.theta, consts, nf, nr);
  if (est.steps < n_min)
    throw PreconditionError("estimator step count n=" + std::to_string(est.steps) +
                            " is below the requirement n >= " + std::to_string(n_min));

  ParamVector g = pareto_gradient(spec, w_star, split, cfg);
  ParamVector correction =
      estimate_inverse_hvp(spec, w_star, split, cfg, est.j_bound, est.steps, est.replicas, seed, g);
  ParamVector w_tilde{w_star.values - correction.values, spec};
  project_ball_raw(w_tilde.values, cfg.c_bound);

  const double delta_bound =
      delta_estimated(cfg, consts, est, w_star.values.size(), nf, nr);
  const double sigma = budget.sigma_override
                           ? *budget.sigma_override
                           : required_sigma(delta_bound, budget.epsilon, budget.delta);
  ParamVector w_minus = add_gaussian_noise(w_tilde, sigma, seed);
  project_ball_raw(w_minus.values, cfg.c_bound);

  Certificate cert = make_estimator_certificate(cfg, budget, est, delta_bound, sigma,
                                                CertifyMethod::Estimator, 0, seed);
  return {std::move(w_minus), std::move(cert)};
}

std::pair<ParamVector, Certificate> certify_online(const ModelSpec& spec,
                                                   const ParamVector& w_star,
                                                   const LabeledDataset& dataset,
                                                   const std::vector<std::vector<int>>& requests,
                                                   const ParetoConfig& cfg,
                                                   const LipschitzConstants& consts,
                                                   const PrivacyBudget& budget,
                                                   const EstimatorParams& est, std::uint64_t seed) {
  cfg.validate();
  const int k = int(requests.size());
  if (k < 1) throw DomainError("online certification requires at least one request");
  std::vector<char> removed(static_cast<std::size_t>(dataset.size()), 0);
  for (const auto& req : requests) {
    if (req.empty()) throw DomainError("empty forget request");
    for (int i : req) {
      if (i < 0 || i >= int(dataset.size())) throw DomainError("request index out of range");
      if (removed[std::size_t(i)]) throw DomainError("forget requests overlap");
      removed[std::size_t(i)] = 1;
    }
  }

  ParamVector w = w_star;
  double delta_bound = 0.0;
  std::vector<char> gone(static_cast<std::size_t>(dataset.size()), 0);
  for (int r = 0; r < k; ++r) {
    const std::vector<int>& forget = requests[std::size_t(r)];
    for (int i : forget) gone[std::size_t(i)] = 1;
    std::vector<int> retain;
    retain.reserve(std::size_t(dataset.size()));
    for (int i = 0; i < int(dataset.size()); ++i)
      if (!gone[std::size_t(i)]) retain.push_back(i);
    if (retain.empty()) throw DomainError("online requests exhausted the retain set");

    Split step_split;
    step_split.dataset = &dataset;
    step_split.forget_idx = forget;
    step_split.retain_idx = std::move(retain);
    std::sort(step_split.forget_idx.begin(), step_split.forget_idx.end());

    const long nf = long(step_split.forget_idx.size());
    const long nr = long(step_split.retain_idx.size());
    const long n_min = estimator_sample_requirement(est.replicas, cfg.lambda, est.lambda_min,
                                                    cfg.theta, consts, nf, nr);
    if (est.steps < n_min)
      throw PreconditionError("request " + std::to_string(r) + ": estimator step count n=" +
                              std::to_string(est.steps) + " is below the requirement n >= " +
                              std::to_string(n_min));

    Vector grad(w.values.size());
    pareto_gradient_raw(spec, w.values, step_split, cfg, grad);
    ParamVector g{std::move(grad), spec};
    const std::uint64_t step_seed = r == 0 ? seed : seed ^ (0x9e3779b97f4a7c15ULL * std::uint64_t(r));
    ParamVector correction = estimate_inverse_hvp(spec, w, step_split, cfg, est.j_bound, est.steps,
                                                  est.replicas, step_seed, g);
    w.values -= correction.values;
    project_ball_raw(w.values, cfg.c_bound);
    delta_bound = std::max(delta_bound,
                           delta_estimated(cfg, consts, est, w.values.size(), nf, nr));
  }

  // sigma = Delta/(k eps) sqrt(2 ln(1.25/delta))
  const double sigma = budget.sigma_override
                           ? *budget.sigma_override
                           : required_sigma(delta_bound, budget.epsilon, budget.delta) / double(k);
  ParamVector w_minus = add_gaussian_noise(w, sigma, seed);
  project_ball_raw(w_minus.values, cfg.c_bound);

  Certificate cert = make_estimator_certificate(cfg, budget, est, delta_bound, sigma,
                                                CertifyMethod::Online, k, seed);
  return {std::move(w_minus), std::move(cert)};
}

// --- defaults --------------------------------------------------------------------

ResolvedHyperparams resolve_defaults(const PartialHyperparams& partial, long forget_count,
                                     long retain_count,
                                     std::optional<double> grad_norm_at_w_star) {
  if (!(partial.theta > 0.0 && partial.theta < 1.0)) throw DomainError("theta must lie in (0,1)");
  ResolvedHyperparams r;
  r.theta = partial.theta;
  auto fill = [&](std::optional<double> v, double dflt, const char* name) {
    if (v) return *v;
    r.defaulted.push_back(name);
    return dflt;
  };
  r.consts.p_k = fill(partial.p_k, 1.0, "p_k");
  r.consts.p_a = fill(partial.p_a, 1.0, "p_a");
  r.consts.f_k = fill(partial.f_k, 1.0, "f_k");
  r.consts.f_a = fill(partial.f_a, 1.0, "f_a");
  r.lambda_min = fill(partial.lambda_min, 0.0, "lambda_min");  // convex approximation
  r.lambda = fill(partial.lambda, r.consts.grad_lipschitz(r.theta), "lambda");
  r.j_bound = fill(partial.j_bound, 2.0 * r.lambda, "j_bound");
  r.zeta_min = fill(partial.zeta_min, r.lambda + r.lambda_min, "zeta_min");
  r.c_bound = fill(partial.c_bound, 10.0, "c_bound");
  if (partial.g_bound) {
    r.g_bound = *partial.g_bound;
  } else if (grad_norm_at_w_star) {
    r.g_bound = *grad_norm_at_w_star;
    r.defaulted.push_back("g_bound");
  } else {
    throw ConfigError("g_bound unset and no gradient norm supplied to default it from");
  }
  if (partial.replicas) {
    r.replicas = *partial.replicas;
  } else {
    r.replicas = 1;
    r.defaulted.push_back("replicas");
  }
  if (partial.steps) {
    r.steps = *partial.steps;
  } else {
    r.steps = estimator_sample_requirement(r.replicas, r.lambda, r.lambda_min, r.theta, r.consts,
                                           forget_count, retain_count);
    r.defaulted.push_back("steps");
  }
  return r;
}

}  // namespace ttp
