#include "ttp/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <numeric>
#include <sstream>

#include "ttp/errors.hpp"
#include "ttp/metrics.hpp"
#include "ttp/rng.hpp"

namespace ttp {

void OptimizerConfig::validate() const {
  if (!(lr > 0.0)) throw ConfigError("learning rate must be > 0");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (retain_batch < 1 || forget_batch < 1) throw ConfigError("batch sizes must be >= 1");
}

namespace {

// first-order update state shared by Sgd and Adam
struct Stepper {
  const OptimizerConfig& opt;
  Vector m, v;
  long t = 0;

  explicit Stepper(const OptimizerConfig& o, Eigen::Index n) : opt(o) {
    if (o.method == OptimizerConfig::Method::Adam) {
      m = Vector::Zero(n);
      v = Vector::Zero(n);
    } else if (o.momentum != 0.0) {
      m = Vector::Zero(n);
    }
  }

  void apply(Vector& w, const Vector& g) {
    ++t;
    if (opt.method == OptimizerConfig::Method::Adam) {
      m = opt.beta1 * m + (1.0 - opt.beta1) * g;
      v = opt.beta2 * v + (1.0 - opt.beta2) * g.cwiseProduct(g);
      const double bc1 = 1.0 - std::pow(opt.beta1, double(t));
      const double bc2 = 1.0 - std::pow(opt.beta2, double(t));
      w.array() -= opt.lr * (m.array() / bc1) /
                   ((v.array() / bc2).sqrt() + opt.eps_adam);
    } else if (opt.momentum != 0.0) {
      m = opt.momentum * m + g;
      w -= opt.lr * m;
    } else {
      w -= opt.lr * g;
    }
  }
};

std::vector<int> shuffled_indices(std::span<const int> src, std::mt19937_64& rng) {
  std::vector<int> idx(src.begin(), src.end());
  for (std::size_t i = idx.size(); i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(idx[i - 1], idx[pick(rng)]);
  }
  return idx;
}

}  // namespace

ParamVector pretrain(const ModelSpec& spec, const LabeledDataset& train,
                     const OptimizerConfig& opt, std::optional<double> c_bound) {
  opt.validate();
  train.validate();
  if (train.size() == 0) throw DomainError("pretrain requires a nonempty training set");
  if (train.dim() != spec.input_dim) throw ShapeError("dataset dimension does not match spec");

  ParamVector w = init_params(spec, opt.seed);
  auto rng = derive_stream(opt.seed, 0x70726574u);
  Stepper step(opt, w.values.size());
  std::vector<int> all(std::size_t(train.size()));
  std::iota(all.begin(), all.end(), 0);
  Vector grad(w.values.size());

  for (int epoch = 0; epoch < opt.epochs; ++epoch) {
    const std::vector<int> order = shuffled_indices(all, rng);
    for (std::size_t s = 0; s < order.size(); s += std::size_t(opt.retain_batch)) {
      const std::size_t e = std::min(order.size(), s + std::size_t(opt.retain_batch));
      std::span<const int> batch(order.data() + s, e - s);
      grad.setZero();
      const double loss = batch_loss_grad(spec, w.values, train.features, train.labels, batch,
                                          LossKind::CrossEntropy, 1.0 / double(batch.size()), grad);
      if (!std::isfinite(loss))
        throw TrainingError("pretraining diverged at epoch " + std::to_string(epoch));
      if (opt.weight_decay != 0.0) grad += opt.weight_decay * w.values;
      step.apply(w.values, grad);
      if (c_bound) project_ball_raw(w.values, *c_bound);
    }
  }
  return w;
}

namespace {

struct EpochEval {
  double retain_acc, test_acc, conf_dist, loss_k, loss_a;
};

EpochEval evaluate_epoch(const ModelSpec& spec, const Vector& w, const Split& split,
                         const ParetoConfig& cfg, const LabeledDataset* test_set) {
  const LabeledDataset& data = *split.dataset;
  EpochEval ev{};
  Vector dummy = Vector::Zero(w.size());
  ev.loss_k = batch_loss_grad(spec, w, data.features, {}, split.forget_idx, cfg.forget_loss, 1.0,
                              dummy);
  ev.loss_a = batch_loss_grad(spec, w, data.features, data.labels, split.retain_idx,
                              cfg.retain_loss, 1.0, dummy);
  ParamVector pw{w, spec};
  ev.retain_acc = evaluate(spec, pw, data, split.retain_idx).accuracy;
  ev.conf_dist = evaluate(spec, pw, data, split.forget_idx).conf_dist_mean;
  if (test_set != nullptr) {
    std::vector<int> all(static_cast<std::size_t>(test_set->size()));
    std::iota(all.begin(), all.end(), 0);
    ev.test_acc = evaluate(spec, pw, *test_set, all).accuracy;
  } else {
    ev.test_acc = std::numeric_limits<double>::quiet_NaN();
  }
  return ev;
}

}  // namespace

std::pair<ParamVector, History> finetune_pareto(const ModelSpec& spec, const ParamVector& w_star,
                                                const Split& split, const ParetoConfig& cfg,
                                                const OptimizerConfig& opt, const EarlyStop& stop,
                                                const LabeledDataset* test_set, bool project) {
  cfg.validate();
  opt.validate();
  split.validate();
  if (w_star.spec != spec) throw ShapeError("w_star spec mismatch");
  if (split.retain_idx.empty()) throw DomainError("retain set is empty");

  const LabeledDataset& data = *split.dataset;
  const double nf = double(split.forget_idx.size());
  const double nr = double(split.retain_idx.size());
  const double lambda = cfg.lambda + opt.weight_decay;

  ParamVector w = w_star;
  auto rng = derive_stream(opt.seed, 0x66696e65u);
  Stepper step(opt, w.values.size());
  Vector grad(w.values.size());

  History hist;
  ParamVector best = w;
  double best_cd = std::numeric_limits<double>::infinity();

  std::vector<int> forder = shuffled_indices(split.forget_idx, rng);
  std::size_t fpos = 0;

  for (int epoch = 0; epoch < opt.epochs; ++epoch) {
    const std::vector<int> rorder = shuffled_indices(split.retain_idx, rng);
    for (std::size_t s = 0; s < rorder.size(); s += std::size_t(opt.retain_batch)) {
      const std::size_t e = std::min(rorder.size(), s + std::size_t(opt.retain_batch));
      std::span<const int> rbatch(rorder.data() + s, e - s);
      if (fpos + std::size_t(opt.forget_batch) > forder.size()) {
        forder = shuffled_indices(split.forget_idx, rng);
        fpos = 0;
      }
      const std::size_t fcount = std::min(std::size_t(opt.forget_batch), forder.size());
      std::span<const int> fbatch(forder.data() + fpos, fcount);
      fpos += fcount;

      grad.setZero();
      // rescale mini-batch sums so E[grad] equals the full finite-sum gradient
      const double lf = batch_loss_grad(spec, w.values, data.features, {}, fbatch,
                                        cfg.forget_loss, cfg.theta * nf / double(fbatch.size()),
                                        grad);
      const double lr_ = batch_loss_grad(spec, w.values, data.features, data.labels, rbatch,
                                         cfg.retain_loss,
                                         (1.0 - cfg.theta) * nr / double(rbatch.size()), grad);
      if (!std::isfinite(lf) || !std::isfinite(lr_))
        throw TrainingError("finetuning diverged at epoch " + std::to_string(epoch));
      if (lambda != 0.0) grad += lambda * w.values;
      step.apply(w.values, grad);
      if (project) project_ball_raw(w.values, cfg.c_bound);
    }

    const EpochEval ev = evaluate_epoch(spec, w.values, split, cfg, test_set);
    hist.rows.push_back({epoch, ev.retain_acc, ev.test_acc, ev.conf_dist, ev.loss_k, ev.loss_a});
    if (stop.enabled && ev.conf_dist <= stop.max_conf_dist &&
        ev.retain_acc >= stop.min_retain_acc && ev.conf_dist < best_cd) {
      best_cd = ev.conf_dist;
      best = w;
      hist.early_stop_met = true;
    }
  }

  if (stop.enabled) {
    if (hist.early_stop_met) return {std::move(best), std::move(hist)};
    hist.warning = true;
  }
  return {std::move(w), std::move(hist)};
}

// --- history csv -------------------------------------------------------------

void save_history_csv(const History& hist, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw FormatError("cannot open history csv for writing: " + path);
  os << "epoch,retain_acc,test_acc,conf_dist,L_K,L_A\n";
  os.precision(17);
  for (const auto& r : hist.rows)
    os << r.epoch << ',' << r.retain_acc << ',' << r.test_acc << ',' << r.conf_dist << ','
       << r.loss_k << ',' << r.loss_a << "\n";
}

History load_history_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw FormatError("cannot open history csv: " + path);
  std::string line;
  if (!std::getline(is, line) || line != "epoch,retain_acc,test_acc,conf_dist,L_K,L_A")
    throw FormatError(path + ": bad history header");
  History hist;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    HistoryRow r;
    char c;
    ss >> r.epoch >> c >> r.retain_acc >> c >> r.test_acc >> c >> r.conf_dist >> c >> r.loss_k >>
        c >> r.loss_a;
    if (ss.fail()) throw FormatError(path + ": bad history row: " + line);
    hist.rows.push_back(r);
  }
  return hist;
}

// --- L-BFGS ------------------------------------------------------------------

SolveResult lbfgs_minimize(const Objective& fg, const Vector& w0, const SolveOptions& opts) {
  auto project = [&](Vector& w) {
    if (opts.c_bound) project_ball_raw(w, *opts.c_bound);
  };
  Vector w = w0;
  project(w);
  Vector g(w.size());
  double f = fg(w, g);

  std::deque<Vector> S, Y;
  SolveResult res;
  int it = 0;
  for (; it < opts.max_iters; ++it) {
    // two-loop recursion
    Vector q = g;
    std::vector<double> alpha(S.size());
    for (std::size_t i = S.size(); i-- > 0;) {
      const double rho = 1.0 / Y[i].dot(S[i]);
      alpha[i] = rho * S[i].dot(q);
      q -= alpha[i] * Y[i];
    }
    if (!S.empty()) q *= S.back().dot(Y.back()) / Y.back().squaredNorm();
    for (std::size_t i = 0; i < S.size(); ++i) {
      const double rho = 1.0 / Y[i].dot(S[i]);
      const double beta = rho * Y[i].dot(q);
      q += (alpha[i] - beta) * S[i];
    }
    Vector p = -q;
    if (p.dot(g) > 0.0) p = -g;

    double t = 1.0;
    Vector wn, gn(w.size());
    double fn = f;
    bool accepted = false;
    for (int ls = 0; ls < 50; ++ls) {
      wn = w + t * p;
      project(wn);
      fn = fg(wn, gn);
      if (std::isfinite(fn) && (fn <= f + 1e-4 * g.dot(wn - w) || fn < f)) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) break;

    Vector s = wn - w;
    Vector y = gn - g;
    if (s.dot(y) > 1e-12) {
      S.push_back(std::move(s));
      Y.push_back(std::move(y));
      if (int(S.size()) > opts.memory) {
        S.pop_front();
        Y.pop_front();
      }
    }
    w = std::move(wn);
    f = fn;
    g = gn;

    Vector probe = w - g;
    project(probe);
    const double pg = (w - probe).norm();
    if (pg < opts.grad_tol) {
      ++it;
      break;
    }
  }
  res.w = std::move(w);
  res.value = f;
  res.grad_norm = g.norm();
  Vector probe = res.w - g;
  project(probe);
  res.proj_grad_norm = (res.w - probe).norm();
  res.iters = it;
  return res;
}

SolveResult solve_pareto_full_batch(const ModelSpec& spec, const Vector& w0, const Split& split,
                                    const ParetoConfig& cfg, const SolveOptions& opts) {
  Objective fg = [&](const Vector& w, Vector& g) {
    pareto_gradient_raw(spec, w, split, cfg, g, /*allow_theta_edges=*/true);
    return pareto_value_raw(spec, w, split, cfg, /*allow_theta_edges=*/true);
  };
  return lbfgs_minimize(fg, w0, opts);
}

}  // namespace ttp
