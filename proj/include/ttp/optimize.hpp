#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ttp/objective.hpp"

namespace ttp {

struct OptimizerConfig {
  enum class Method { Sgd, Adam };
  Method method = Method::Adam;
  double lr = 0.01;
  double momentum = 0.0;  // Sgd only
  double beta1 = 0.9;     // Adam
  double beta2 = 0.999;
  double eps_adam = 1e-8;
  int epochs = 25;
  int retain_batch = 128;
  int forget_batch = 10;
  double weight_decay = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct EarlyStop {
  double max_conf_dist = 1.0;
  double min_retain_acc = 0.0;
  bool enabled = false;
};

struct HistoryRow {
  int epoch = 0;
  double retain_acc = 0.0;
  double test_acc = 0.0;  // NaN when no test set was supplied
  double conf_dist = 0.0;
  double loss_k = 0.0;  // sum-form L_K over the forget set
  double loss_a = 0.0;  // sum-form L_A over the retain set
};

struct History {
  std::vector<HistoryRow> rows;
  bool early_stop_met = false;
  bool warning = false;  // early stopping requested but no iterate met the thresholds
};

// CSV: epoch,retain_acc,test_acc,conf_dist,L_K,L_A
void save_history_csv(const History& hist, const std::string& path);
History load_history_csv(const std::string& path);

// Mini-batch optimization of mean cross entropy; projected onto the C-ball
// after every step when c_bound is set. Deterministic given opt.seed.
ParamVector pretrain(const ModelSpec& spec, const LabeledDataset& train,
                     const OptimizerConfig& opt, std::optional<double> c_bound = std::nullopt);

// Pareto finetuning from w_star: every step pairs a retain mini-batch with a
// forget mini-batch; mini-batch sums are rescaled by |set|/batch so the step
// direction is unbiased for the full finite-sum gradient. With stopping
// enabled, returns the iterate with the lowest forget confidence distance
// among those meeting both thresholds.
std::pair<ParamVector, History> finetune_pareto(const ModelSpec& spec, const ParamVector& w_star,
                                                const Split& split, const ParetoConfig& cfg,
                                                const OptimizerConfig& opt, const EarlyStop& stop,
                                                const LabeledDataset* test_set = nullptr,
                                                bool project = false);

// --- deterministic full-batch solver ---------------------------------------

struct SolveOptions {
  int max_iters = 500;
  double grad_tol = 1e-8;        // on the (projected) gradient norm
  int memory = 10;               // L-BFGS history
  std::optional<double> c_bound; // optional ball constraint
};

struct SolveResult {
  Vector w;
  double value = 0.0;
  double grad_norm = 0.0;       // plain gradient norm
  double proj_grad_norm = 0.0;  // ||w - P(w - g)||, equals grad_norm when unconstrained
  int iters = 0;
};

using Objective = std::function<double(const Vector&, Vector&)>;

// Limited-memory BFGS with backtracking line search; optional projection onto
// the C-ball after each trial point.
SolveResult lbfgs_minimize(const Objective& fg, const Vector& w0, const SolveOptions& opts);

// Full-batch solve of the Pareto objective (theta edges permitted).
SolveResult solve_pareto_full_batch(const ModelSpec& spec, const Vector& w0, const Split& split,
                                    const ParetoConfig& cfg, const SolveOptions& opts);

}  // namespace ttp
