// Command-line front end: experiment pipelines, attacks, bound calculators,
// and report/certificate inspection.

#include <CLI11.hpp>
#include <fstream>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "ttp/experiment.hpp"

namespace {

using namespace ttp;

std::string config_from_pairs(const std::vector<std::string>& sets) {
  std::ostringstream os;
  for (const auto& kv : sets) os << kv << "\n";
  return os.str();
}

int run_pipeline(const std::string& pipeline, const std::string& config_path, long seed,
                 const std::string& out_dir, const std::vector<std::string>& sets) {
  std::ostringstream text;
  if (!config_path.empty()) {
    std::ifstream is(config_path);
    if (!is) {
      std::cerr << "cannot open config: " << config_path << "\n";
      return 2;
    }
    text << is.rdbuf() << "\n";
  }
  if (!pipeline.empty()) text << "pipeline=" << pipeline << "\n";
  if (seed >= 0) text << "seed=" << seed << "\n";
  if (!out_dir.empty()) text << "out.dir=" << out_dir << "\n";
  text << config_from_pairs(sets);
  ConfigMap cfg = ConfigMap::from_string(text.str());
  const ExperimentResult res = run_experiment(cfg);
  std::cout << "out: " << res.out_dir << "\n";
  auto row = [](const MetricRow& r) {
    std::cout << std::left << std::setw(8) << to_string(r.tag) << " n=" << std::setw(7) << r.n
              << " acc=" << std::setw(9) << r.accuracy << " conf_dist=" << std::setw(10)
              << r.conf_dist_mean << " l2=" << r.l2_uniformity_mean << "\n";
  };
  std::cout << std::setprecision(4) << std::fixed;
  row(res.retain);
  row(res.test);
  row(res.forget);
  if (res.certificate)
    std::cout << "certificate: sigma=" << res.certificate->sigma
              << " delta_bound=" << res.certificate->delta_bound
              << (res.certificate->sigma_override ? " (sigma override)" : "") << "\n";
  return 0;
}

int cmd_bounds(double theta, double lambda, double c, double pk, double pa, double fk, double fa,
               long retain_count, long forget_count, double class_count, double epsilon, int b,
               double lambda_min, bool csv) {
  LipschitzConstants consts{pk, pa, fk, fa};
  const double gap = uniformity_gap_bound(theta, retain_count, class_count);
  const double theta_eps = theta_for_epsilon(retain_count, class_count, epsilon);
  const double lam_thresh = lambda_validity_threshold(theta, c, consts);
  const BoundReport gap_rep = retain_loss_gap_bound(theta, lambda, c, consts);
  long n_req = -1;
  if (theta > 0.0 && theta < 1.0 && forget_count > 0)
    n_req = estimator_sample_requirement(b, lambda, lambda_min, theta, consts, forget_count,
                                         retain_count);
  if (csv) {
    std::cout.precision(12);
    std::cout << "bound,value,valid\n"
              << "uniformity_gap," << gap << ",1\n"
              << "theta_for_epsilon," << theta_eps << ",1\n"
              << "lambda_validity_threshold," << lam_thresh << ",1\n"
              << "retain_loss_gap," << gap_rep.value << "," << (gap_rep.valid ? 1 : 0) << "\n"
              << "estimator_sample_requirement," << n_req << "," << (n_req >= 0 ? 1 : 0) << "\n";
    return 0;
  }
  std::cout.precision(6);
  std::cout << "uniformity gap bound           " << gap << "\n"
            << "theta for epsilon=" << epsilon << "     " << theta_eps << "\n"
            << "lambda validity threshold      " << lam_thresh << "\n"
            << "retain loss gap bound          "
            << (gap_rep.valid ? std::to_string(gap_rep.value) : std::string("not applicable"))
            << "\n"
            << "  " << gap_rep.inputs_echo << "\n";
  if (n_req >= 0) std::cout << "estimator sample requirement   " << n_req << "\n";
  return 0;
}

int cmd_report(const std::string& dir, bool verify) {
  namespace fs = std::filesystem;
  const auto metrics_path = fs::path(dir) / "metrics.csv";
  if (fs::exists(metrics_path)) {
    for (const MetricRow& r : load_metrics_csv(metrics_path.string()))
      std::cout << std::left << std::setw(8) << to_string(r.tag) << " n=" << std::setw(7) << r.n
                << " acc=" << std::setw(9) << r.accuracy << " conf_dist=" << std::setw(10)
                << r.conf_dist_mean << " l2=" << r.l2_uniformity_mean << "\n";
  } else {
    std::cout << "no metrics.csv in " << dir << "\n";
  }
  const auto cert_path = fs::path(dir) / "certificate.txt";
  if (fs::exists(cert_path)) {
    const Certificate cert = Certificate::load(cert_path.string());
    std::cout << "certificate: sigma=" << cert.sigma << " delta_bound=" << cert.delta_bound
              << " epsilon=" << cert.epsilon << " delta=" << cert.delta
              << (cert.sigma_override ? " (sigma override)" : "") << "\n";
    if (verify) {
      const bool ok = verify_certificate(cert);
      std::cout << "certificate verification: " << (ok ? "PASS" : "FAIL") << "\n";
      if (!ok) return 1;
    }
  } else if (verify) {
    std::cout << "no certificate.txt in " << dir << "\n";
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"test-time privacy toolkit"};
  app.require_subcommand(1);

  std::string config_path, out_dir, baseline_method = "retrain", attack_kind = "pgd", dir;
  long seed = -1;
  std::vector<std::string> sets;

  auto add_common = [&](CLI::App* cmd, bool seed_required) {
    cmd->add_option("--config", config_path, "config file (key=value lines)");
    auto* s = cmd->add_option("--seed", seed, "rng seed");
    if (seed_required) s->required();
    cmd->add_option("--out", out_dir, "output directory");
    cmd->add_option("--set", sets, "extra config entries key=value")->take_all();
  };

  auto* c_run = app.add_subcommand("run", "run a pipeline described by a config file");
  add_common(c_run, false);
  auto* c_pre = app.add_subcommand("pretrain", "train the base model");
  add_common(c_pre, true);
  auto* c_fin = app.add_subcommand("finetune", "Pareto finetuning from a pretrained model");
  add_common(c_fin, true);
  auto* c_ce = app.add_subcommand("certify-exact", "certified run, exact inverse Hessian");
  add_common(c_ce, true);
  auto* c_cs = app.add_subcommand("certify-est", "certified run, inverse-Hessian estimator");
  add_common(c_cs, true);
  auto* c_co = app.add_subcommand("certify-online", "certified run, sequential forget requests");
  add_common(c_co, true);
  auto* c_base = app.add_subcommand("baseline", "retrain / synthetic / gaussian_uniform");
  add_common(c_base, true);
  c_base->add_option("--method", baseline_method, "retrain|synthetic|gaussian_uniform");
  auto* c_atk = app.add_subcommand("attack", "attack the forget inputs of a configured run");
  add_common(c_atk, true);
  c_atk->add_option("--kind", attack_kind, "gauss|fgsm|pgd");

  double theta = 0.75, lambda = 1.0, cbound = 10.0, pk = 1.0, pa = 1.0, fk = 1.0, fa = 1.0;
  double class_count = 10.0, epsilon = 0.5, lambda_min = 0.0;
  long retain_count = 1000, forget_count = 100;
  int breps = 1;
  bool csv = false, verify = false;
  auto* c_b = app.add_subcommand("bounds", "closed-form privacy/utility bound calculators");
  c_b->add_option("--theta", theta);
  c_b->add_option("--lambda", lambda);
  c_b->add_option("--c", cbound);
  c_b->add_option("--pk", pk);
  c_b->add_option("--pa", pa);
  c_b->add_option("--fk", fk);
  c_b->add_option("--fa", fa);
  c_b->add_option("--retain-count", retain_count);
  c_b->add_option("--forget-count", forget_count);
  c_b->add_option("--classes", class_count);
  c_b->add_option("--epsilon", epsilon);
  c_b->add_option("--b", breps);
  c_b->add_option("--lambda-min", lambda_min);
  c_b->add_flag("--csv", csv);

  auto* c_rep = app.add_subcommand("report", "print metrics and certificate of a finished run");
  c_rep->add_option("--dir", dir)->required();
  c_rep->add_flag("--verify-certificate", verify, "re-check the Gaussian mechanism inequality");

  CLI11_PARSE(app, argc, argv);

  try {
    if (c_run->parsed()) return run_pipeline("", config_path, seed, out_dir, sets);
    if (c_pre->parsed()) return run_pipeline("pretrain", config_path, seed, out_dir, sets);
    if (c_fin->parsed()) return run_pipeline("alg1", config_path, seed, out_dir, sets);
    if (c_ce->parsed()) return run_pipeline("alg2", config_path, seed, out_dir, sets);
    if (c_cs->parsed()) return run_pipeline("alg3", config_path, seed, out_dir, sets);
    if (c_co->parsed()) return run_pipeline("alg4", config_path, seed, out_dir, sets);
    if (c_base->parsed()) {
      std::string pipeline = baseline_method == "retrain" ? "retrain" : baseline_method;
      return run_pipeline(pipeline, config_path, seed, out_dir, sets);
    }
    if (c_atk->parsed()) {
      auto all = sets;
      all.push_back("attack.kind=" + attack_kind);
      return run_pipeline("", config_path, seed, out_dir, all);
    }
    if (c_b->parsed())
      return cmd_bounds(theta, lambda, cbound, pk, pa, fk, fa, retain_count, forget_count,
                        class_count, epsilon, breps, lambda_min, csv);
    if (c_rep->parsed()) return cmd_report(dir, verify);
  } catch (const ttp::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
