#include "ttp/experiment.hpp"

#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "ttp/errors.hpp"
#include "ttp/rng.hpp"

namespace ttp {

namespace fs = std::filesystem;

Pipeline pipeline_from_string(const std::string& s) {
  if (s == "pretrain") return Pipeline::Pretrain;
  if (s == "retrain") return Pipeline::Retrain;
  if (s == "alg1") return Pipeline::Alg1;
  if (s == "alg2") return Pipeline::Alg2;
  if (s == "alg3") return Pipeline::Alg3;
  if (s == "alg4") return Pipeline::Alg4;
  if (s == "synthetic") return Pipeline::Synthetic;
  if (s == "gaussian_uniform") return Pipeline::GaussianUniform;
  throw ConfigError("unknown pipeline: " + s);
}

// --- config ---------------------------------------------------------------

ConfigMap ConfigMap::from_string(const std::string& text) {
  ConfigMap cfg;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    // trim
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    const auto e = line.find_last_not_of(" \t\r");
    line = line.substr(b, e - b + 1);
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + " has no '=': " + line);
    std::string key = line.substr(0, eq);
    std::string val = line.substr(eq + 1);
    auto trim = [](std::string& s) {
      const auto b2 = s.find_first_not_of(" \t");
      const auto e2 = s.find_last_not_of(" \t");
      s = b2 == std::string::npos ? "" : s.substr(b2, e2 - b2 + 1);
    };
    trim(key);
    trim(val);
    if (cfg.values_.count(key)) throw ConfigError("duplicate config key: " + key);
    cfg.values_[key] = val;
  }
  return cfg;
}

ConfigMap ConfigMap::from_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file: " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return from_string(ss.str());
}

bool ConfigMap::has(const std::string& key) const { return values_.count(key) > 0; }

std::string ConfigMap::get_str(const std::string& key) {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("missing required config key: " + key);
  consumed_[key] = true;
  return it->second;
}

std::string ConfigMap::get_str(const std::string& key, const std::string& dflt) {
  auto it = values_.find(key);
  if (it == values_.end()) return dflt;
  consumed_[key] = true;
  return it->second;
}

double ConfigMap::get_double(const std::string& key, double dflt) {
  auto it = values_.find(key);
  if (it == values_.end()) return dflt;
  consumed_[key] = true;
  try {
    return std::stod(it->second);
  } catch (...) {
    throw ConfigError("config key " + key + " is not a number: " + it->second);
  }
}

long ConfigMap::get_long(const std::string& key, long dflt) {
  auto it = values_.find(key);
  if (it == values_.end()) return dflt;
  consumed_[key] = true;
  try {
    return std::stol(it->second);
  } catch (...) {
    throw ConfigError("config key " + key + " is not an integer: " + it->second);
  }
}

bool ConfigMap::get_bool(const std::string& key, bool dflt) {
  auto it = values_.find(key);
  if (it == values_.end()) return dflt;
  consumed_[key] = true;
  if (it->second == "true" || it->second == "1") return true;
  if (it->second == "false" || it->second == "0") return false;
  throw ConfigError("config key " + key + " is not a bool: " + it->second);
}

std::optional<double> ConfigMap::get_opt_double(const std::string& key) {
  if (!has(key)) return std::nullopt;
  return get_double(key, 0.0);
}

std::optional<long> ConfigMap::get_opt_long(const std::string& key) {
  if (!has(key)) return std::nullopt;
  return get_long(key, 0);
}

std::vector<int> ConfigMap::get_int_list(const std::string& key) {
  std::vector<int> out;
  auto it = values_.find(key);
  if (it == values_.end()) return out;
  consumed_[key] = true;
  std::stringstream ss(it->second);
  std::string tok;
  while (std::getline(ss, tok, ','))
    if (!tok.empty()) out.push_back(std::stoi(tok));
  return out;
}

void ConfigMap::finish() const {
  for (const auto& [key, _] : values_)
    if (!consumed_.count(key)) throw ConfigError("unknown config key: " + key);
}

// --- pipeline --------------------------------------------------------------

namespace {


template <typename F>
auto stage(const char* name, F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    throw Error(std::string(name) + ": " + e.what());
  }
}

struct LoadedData {
  LabeledDataset train;
  LabeledDataset test;
};

LoadedData load_data(ConfigMap& cfg, std::uint64_t seed) {
  const std::string source = cfg.get_str("dataset.source", "digits");
  LoadedData out;
  if (source == "idx") {
    LabeledDataset all = load_idx(cfg.get_str("dataset.images"), cfg.get_str("dataset.labels"));
    if (cfg.has("dataset.test_images")) {
      out.train = std::move(all);
      out.test = load_idx(cfg.get_str("dataset.test_images"), cfg.get_str("dataset.test_labels"));
      return out;
    }
    // standard 70-30 train-test split, fixed seed
    const double frac = cfg.get_double("dataset.train_fraction", 0.7);
    const Eigen::Index n = all.size();
    std::vector<int> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    auto rng = derive_stream(seed, 0x73706c74u);
    for (std::size_t i = perm.size(); i > 1; --i) {
      std::uniform_int_distribution<std::size_t> pick(0, i - 1);
      std::swap(perm[i - 1], perm[pick(rng)]);
    }
    const Eigen::Index ntr = Eigen::Index(frac * double(n));
    out.train.features.resize(ntr, all.dim());
    out.test.features.resize(n - ntr, all.dim());
    out.train.name = all.name + "-train";
    out.test.name = all.name + "-test";
    for (Eigen::Index i = 0; i < ntr; ++i) {
      out.train.features.row(i) = all.features.row(perm[std::size_t(i)]);
      out.train.labels.push_back(all.labels[std::size_t(perm[std::size_t(i)])]);
    }
    for (Eigen::Index i = ntr; i < n; ++i) {
      out.test.features.row(i - ntr) = all.features.row(perm[std::size_t(i)]);
      out.test.labels.push_back(all.labels[std::size_t(perm[std::size_t(i)])]);
    }
    return out;
  }
  if (source == "digits") {
    const long count = cfg.get_long("dataset.count", 12000);
    const long test_count = cfg.get_long("dataset.test_count", 5000);
    out.train = make_synth_digits(int(count), seed + 1);
    out.test = make_synth_digits(int(test_count), seed + 2);
    return out;
  }
  if (source == "blobs") {
    const int classes = int(cfg.get_long("dataset.classes", 3));
    const int per_class = int(cfg.get_long("dataset.per_class", 200));
    const int dim = int(cfg.get_long("dataset.dim", 2));
    const double spread = cfg.get_double("dataset.spread", 1.0);
    out.train = make_blobs(classes, per_class, dim, spread, seed + 1);
    out.test = make_blobs(classes, std::max(1, per_class / 3), dim, spread, seed + 2);
    return out;
  }
  throw ConfigError("unknown dataset.source: " + source);
}

OptimizerConfig read_optimizer(ConfigMap& cfg, const char* prefix, std::uint64_t seed) {
  OptimizerConfig opt;
  const std::string p(prefix);
  const std::string method = cfg.get_str(p + ".method", "adam");
  if (method == "adam")
    opt.method = OptimizerConfig::Method::Adam;
  else if (method == "sgd")
    opt.method = OptimizerConfig::Method::Sgd;
  else
    throw ConfigError("unknown optimizer method: " + method);
  opt.lr = cfg.get_double(p + ".lr", 0.01);
  opt.momentum = cfg.get_double(p + ".momentum", 0.0);
  opt.epochs = int(cfg.get_long(p + ".epochs", 25));
  opt.retain_batch = int(cfg.get_long(p + ".retain_batch", 128));
  opt.forget_batch = int(cfg.get_long(p + ".forget_batch", 10));
  opt.weight_decay = cfg.get_double(p + ".weight_decay", 0.0);
  opt.seed = seed;
  return opt;
}

}  // namespace

ExperimentResult run_experiment(ConfigMap& cfg) {
  const auto seed = std::uint64_t(cfg.get_long("seed", -1));
  if (cfg.get_long("seed", -1) < 0) throw ConfigError("seed is mandatory (nonnegative)");
  const std::string out_dir = cfg.get_str("out.dir");
  const Pipeline pipeline = pipeline_from_string(cfg.get_str("pipeline"));
  fs::create_directories(out_dir);

  ExperimentResult result;
  result.out_dir = out_dir;
  auto emit = [&](const std::string& name) {
    result.files_written.push_back((fs::path(out_dir) / name).string());
    return result.files_written.back();
  };

  // load + split
  LoadedData data = stage("load", [&] { return load_data(cfg, seed); });
  ModelSpec spec;
  {
    const std::string kind = cfg.get_str("model.kind", "logreg");
    const int d = int(data.train.dim());
    const int k = data.train.class_count();
    if (kind == "logreg")
      spec = ModelSpec::logreg(d, k);
    else if (kind == "mlp")
      spec = ModelSpec::mlp(d, int(cfg.get_long("model.hidden", 100)), k);
    else
      throw ConfigError("unknown model.kind: " + kind);
  }

  Split split = stage("split", [&] {
    auto explicit_idx = cfg.get_int_list("forget.indices");
    if (!explicit_idx.empty()) return split_from_indices(data.train, std::move(explicit_idx));
    const int count = int(cfg.get_long("forget.count", 100));
    return select_forget(data.train, count, std::uint64_t(cfg.get_long("forget.seed", long(seed))));
  });
  save_split(split, emit("split.idx.txt"));

  // scalarization; mean-form weights convert to the sum-form pair
  ParetoConfig pareto;
  pareto.theta = cfg.get_double("pareto.theta", 0.75);
  pareto.lambda = cfg.get_double("pareto.lambda", 0.0);
  pareto.c_bound = cfg.get_double("pareto.c_bound", 10.0);
  pareto.forget_loss = loss_kind_from_string(cfg.get_str("pareto.forget_loss", "kl_to_uniform"));
  const std::string theta_scale = cfg.get_str("pareto.theta_scale", "mean");
  if (theta_scale == "mean") {
    const SumFormParams sf = mean_to_sum_form(pareto.theta, pareto.lambda,
                                              Eigen::Index(split.forget_idx.size()),
                                              Eigen::Index(split.retain_idx.size()));
    pareto.theta = sf.theta;
    pareto.lambda = sf.lambda;
  } else if (theta_scale != "sum") {
    throw ConfigError("pareto.theta_scale must be 'mean' or 'sum'");
  }

  OptimizerConfig pre_opt = read_optimizer(cfg, "opt", seed);
  const auto pretrain_c = cfg.get_opt_double("opt.c_bound");

  EarlyStop stop;
  stop.enabled = cfg.get_bool("stop.enabled", false);
  stop.max_conf_dist = cfg.get_double("stop.max_conf_dist", 1.0);
  stop.min_retain_acc = cfg.get_double("stop.min_retain_acc", 0.0);

  PrivacyBudget budget;
  budget.epsilon = cfg.get_double("privacy.epsilon", 0.5);
  budget.delta = cfg.get_double("privacy.delta", 0.05);
  budget.sigma_override = cfg.get_opt_double("privacy.sigma_override");

  LipschitzConstants consts;
  consts.p_k = cfg.get_double("consts.p_k", 1.0);
  consts.p_a = cfg.get_double("consts.p_a", 1.0);
  consts.f_k = cfg.get_double("consts.f_k", 1.0);
  consts.f_a = cfg.get_double("consts.f_a", 1.0);

  ParamVector w{Vector(), spec};

  auto run_warmup = [&](const ParamVector& start, LossKind floss, int epochs) {
    ParetoConfig warm = pareto;
    warm.forget_loss = floss;
    OptimizerConfig wopt = read_optimizer(cfg, "finetune", seed);
    wopt.epochs = epochs;
    auto [ww, hist] = finetune_pareto(spec, start, split, warm, wopt, EarlyStop{}, &data.test,
                                      /*project=*/true);
    result.history = hist;
    const long polish = cfg.get_long("warmup.polish_iters", 400);
    if (polish > 0) {
      SolveOptions sopts;
      sopts.max_iters = int(polish);
      sopts.grad_tol = cfg.get_double("warmup.polish_tol", 1e-6);
      sopts.c_bound = pareto.c_bound;
      SolveResult sol = solve_pareto_full_batch(spec, ww.values, split, warm, sopts);
      ww.values = sol.w;
    }
    return ww;
  };

  switch (pipeline) {
    case Pipeline::Pretrain:
      w = stage("pretrain", [&] { return pretrain(spec, data.train, pre_opt, pretrain_c); });
      break;
    case Pipeline::Retrain:
      w = stage("retrain", [&] { return retrain_baseline(spec, split, pre_opt, pretrain_c); });
      break;
    case Pipeline::Alg1: {
      ParamVector w0 =
          stage("pretrain", [&] { return pretrain(spec, data.train, pre_opt, pretrain_c); });
      OptimizerConfig fopt = read_optimizer(cfg, "finetune", seed);
      const bool project = cfg.get_bool("finetune.project", false);
      auto [wf, hist] = stage("finetune", [&] {
        return finetune_pareto(spec, w0, split, pareto, fopt, stop, &data.test, project);
      });
      w = std::move(wf);
      result.history = std::move(hist);
      break;
    }
    case Pipeline::Alg2: {
      ParamVector w0 =
          stage("pretrain", [&] { return pretrain(spec, data.train, pre_opt, pretrain_c); });
      ParamVector warm = stage("warmup", [&] {
        return run_warmup(w0, pareto.forget_loss, int(cfg.get_long("warmup.epochs", 50)));
      });
      const double lambda_min = cfg.get_double("est.lambda_min", 0.0);
      NewtonOptions nopts;
      nopts.tangent_ball = cfg.get_bool("newton.tangent_ball", true);
      auto [wm, cert] = stage("certify-exact", [&] {
        return certify_exact(spec, warm, split, pareto, consts, budget, lambda_min, seed, nopts);
      });
      w = std::move(wm);
      result.certificate = cert;
      break;
    }
    case Pipeline::Alg3:
    case Pipeline::Alg4: {
      ParamVector w0 =
          stage("pretrain", [&] { return pretrain(spec, data.train, pre_opt, pretrain_c); });
      const int warm_epochs = int(cfg.get_long("warmup.epochs", 0));
      ParamVector warm = warm_epochs > 0
                             ? stage("warmup", [&] {
                                 return run_warmup(w0, pareto.forget_loss, warm_epochs);
                               })
                             : w0;
      PartialHyperparams partial;
      partial.theta = pareto.theta;
      partial.lambda = pareto.lambda > 0.0 ? std::optional<double>(pareto.lambda) : std::nullopt;
      partial.lambda_min = cfg.get_opt_double("est.lambda_min");
      partial.j_bound = cfg.get_opt_double("est.j_bound");
      partial.zeta_min = cfg.get_opt_double("est.zeta_min");
      partial.g_bound = cfg.get_opt_double("est.g_bound");
      partial.c_bound = pareto.c_bound;
      partial.replicas = int(cfg.get_long("est.replicas", 1));
      if (cfg.has("est.steps")) partial.steps = cfg.get_long("est.steps", 0);
      ParamVector grad = pareto_gradient(spec, warm, split, pareto);
      const ResolvedHyperparams hp = resolve_defaults(
          partial, long(split.forget_idx.size()), long(split.retain_idx.size()), grad.values.norm());
      ParetoConfig cert_cfg = pareto;
      cert_cfg.lambda = hp.lambda;
      EstimatorParams est;
      est.replicas = hp.replicas;
      est.steps = hp.steps;
      est.j_bound = hp.j_bound;
      est.rho = cfg.get_double("est.rho", 0.05);
      est.g_bound = hp.g_bound;
      est.zeta_min = hp.zeta_min;
      est.lambda_min = hp.lambda_min;
      if (pipeline == Pipeline::Alg3) {
        auto [wm, cert] = stage("certify-est", [&] {
          return certify_estimated(spec, warm, split, cert_cfg, consts, budget, est, seed);
        });
        w = std::move(wm);
        result.certificate = cert;
      } else {
        std::vector<std::vector<int>> requests;
        const auto sizes = cfg.get_int_list("online.request_sizes");
        std::size_t pos = 0;
        if (sizes.empty()) {
          requests.push_back(split.forget_idx);
        } else {
          for (int sz : sizes) {
            if (pos + std::size_t(sz) > split.forget_idx.size())
              throw ConfigError("online.request_sizes exceed the forget set");
            requests.emplace_back(split.forget_idx.begin() + long(pos),
                                  split.forget_idx.begin() + long(pos) + sz);
            pos += std::size_t(sz);
          }
        }
        auto [wm, cert] = stage("certify-online", [&] {
          return certify_online(spec, warm, data.train, requests, cert_cfg, consts, budget, est,
                                seed);
        });
        w = std::move(wm);
        result.certificate = cert;
      }
      break;
    }
    case Pipeline::Synthetic:
      w = stage("synthetic", [&] {
        return synthetic_baseline(spec, split, int(cfg.get_long("baseline.k_samples", 5)),
                                  cfg.get_double("baseline.ball_radius", 8.0 / 255.0), pre_opt,
                                  seed);
      });
      break;
    case Pipeline::GaussianUniform:
      w = stage("gaussian-uniform", [&] {
        return gaussian_uniform_baseline(spec, data.train,
                                         cfg.get_double("baseline.variance", 0.1), pre_opt, seed);
      });
      break;
  }

  // optional attack on the forget inputs
  if (cfg.has("attack.kind")) {
    const std::string kind = cfg.get_str("attack.kind");
    AttackConfig acfg;
    acfg.gamma = cfg.get_double("attack.gamma", 8.0 / 255.0);
    acfg.alpha = cfg.get_double("attack.alpha", 0.0001);
    acfg.steps = int(cfg.get_long("attack.steps", 50));
    acfg.step_size = cfg.get_double("attack.step_size", 0.001);
    acfg.clamp_unit_box = cfg.get_bool("attack.clamp_unit_box", true);
    RowMatrix forget_inputs(Eigen::Index(split.forget_idx.size()), data.train.dim());
    for (Eigen::Index i = 0; i < forget_inputs.rows(); ++i)
      forget_inputs.row(i) = data.train.features.row(split.forget_idx[std::size_t(i)]);
    RowMatrix adv = stage("attack", [&] {
      if (kind == "gauss")
        return gauss_attack(forget_inputs, acfg.gamma, acfg.clamp_unit_box, seed);
      if (kind == "fgsm") return fgsm_attack(spec, w, forget_inputs, acfg, seed);
      if (kind == "pgd") return pgd_attack(spec, w, forget_inputs, acfg, seed);
      throw ConfigError("unknown attack.kind: " + kind);
    });
    std::ofstream os(emit("attack.csv"));
    os << "example,conf_dist_pre,conf_dist_post\n";
    os.precision(17);
    for (Eigen::Index i = 0; i < adv.rows(); ++i) {
      const Vector p0 = forward(spec, w, forget_inputs.row(i));
      const Vector p1 = forward(spec, w, adv.row(i));
      os << split.forget_idx[std::size_t(i)] << ',' << confidence_distance(p0) << ','
         << confidence_distance(p1) << "\n";
    }
  }

  // metrics + artifacts
  std::vector<int> all_test(std::size_t(data.test.size()));
  std::iota(all_test.begin(), all_test.end(), 0);
  result.retain = evaluate(spec, w, data.train, split.retain_idx, SplitTag::Retain);
  result.test = evaluate(spec, w, data.test, all_test, SplitTag::Test);
  result.forget = evaluate(spec, w, data.train, split.forget_idx, SplitTag::Forget);
  const MetricRow rows[3] = {result.retain, result.test, result.forget};
  save_metrics_csv(rows, emit("metrics.csv"));
  save_checkpoint(emit("checkpoint.ttp"), w);
  if (!result.history.rows.empty()) save_history_csv(result.history, emit("history.csv"));
  if (result.certificate) result.certificate->save(emit("certificate.txt"));

  cfg.finish();
  return result;
}

ExperimentResult run_experiment_file(const std::string& config_path) {
  ConfigMap cfg = ConfigMap::from_file(config_path);
  return run_experiment(cfg);
}

}  // namespace ttp
