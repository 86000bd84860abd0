#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "ttp/errors.hpp"
#include "ttp/objective.hpp"
#include "ttp/optimize.hpp"
#include "ttp/rng.hpp"

using namespace ttp;

TEST_CASE("kl_to_uniform") {
  SUBCASE("uniform is zero for any k") {
    for (int k = 2; k <= 12; ++k) {
      const Vector u = Vector::Constant(k, 1.0 / k);
      CHECK(kl_to_uniform(u) == doctest::Approx(0.0).epsilon(1e-15));
    }
  }
  SUBCASE("one-hot k=10 is ln 10") {
    Vector p = Vector::Zero(10);
    p[3] = 1.0;
    CHECK(kl_to_uniform(p) == doctest::Approx(std::log(10.0)).epsilon(1e-12));
  }
  SUBCASE("(0.5, 0.25, 0.25)") {
    Vector p(3);
    p << 0.5, 0.25, 0.25;
    // ln 3 - H(p), H(p) = -(0.5 ln 0.5 + 2 * 0.25 ln 0.25)
    const double h = -(0.5 * std::log(0.5) + 0.5 * std::log(0.25));
    CHECK(kl_to_uniform(p) == doctest::Approx(std::log(3.0) - h).epsilon(1e-12));
    CHECK(kl_to_uniform(p) == doctest::Approx(0.05889151782819).epsilon(1e-9));
  }
  SUBCASE("off-simplex rejected") {
    Vector p(3);
    p << 0.5, 0.6, -0.1;
    CHECK_THROWS_AS(kl_to_uniform(p), DomainError);
    p << 0.5, 0.4, 0.2;
    CHECK_THROWS_AS(kl_to_uniform(p), DomainError);
  }
  SUBCASE("nonnegative, zero only at uniform (1e4 random points)") {
    auto rng = derive_stream(31, 0);
    for (int t = 0; t < 10000; ++t) {
      const Vector p = oracles::random_simplex_point(5, rng);
      const double v = kl_to_uniform(p);
      CHECK(v >= 0.0);
      const double linf = (p.array() - 0.2).abs().maxCoeff();
      if (v <= 1e-9) CHECK(linf < 1e-3);
    }
  }
  SUBCASE("Pinsker chain: sup distance to uniform <= sqrt(2 KL)") {
    auto rng = derive_stream(37, 0);
    for (int t = 0; t < 10000; ++t) {
      const int k = 2 + t % 7;
      const Vector p = oracles::random_simplex_point(k, rng);
      const double linf = (p.array() - 1.0 / k).abs().maxCoeff();
      CHECK(linf <= std::sqrt(2.0 * kl_to_uniform(p)) + 1e-12);
    }
  }
}

TEST_CASE("square_to_uniform") {
  SUBCASE("uniform is zero") {
    const Vector u = Vector::Constant(7, 1.0 / 7);
    CHECK(square_to_uniform(u) == doctest::Approx(0.0).epsilon(1e-15));
  }
  SUBCASE("one-hot k=2 is 0.5") {
    Vector p(2);
    p << 1.0, 0.0;
    CHECK(square_to_uniform(p) == doctest::Approx(0.5).epsilon(1e-12));
  }
  SUBCASE("one-hot k=10 is 0.9") {
    Vector p = Vector::Zero(10);
    p[0] = 1.0;
    CHECK(square_to_uniform(p) == doctest::Approx(0.9).epsilon(1e-12));
  }
}

namespace {

struct Instance {
  LabeledDataset data;
  Split split;
  ModelSpec spec;
};

Instance small_instance(std::uint64_t seed, int classes = 3, int per_class = 8, int dim = 4) {
  Instance inst;
  inst.data = make_blobs(classes, per_class, dim, 1.0, seed);
  inst.split = select_forget(inst.data, 5, seed + 1);
  inst.spec = ModelSpec::logreg(dim, classes);
  return inst;
}

}  // namespace

TEST_CASE("pareto_value") {
  auto rng = derive_stream(41, 0);
  Instance inst = small_instance(7);
  ParetoConfig cfg;
  cfg.theta = 0.6;
  cfg.lambda = 0.0;

  SUBCASE("at uniform params with lambda=0 the value is (1-theta) |D_r| ln k") {
    const ParamVector w = make_uniform_params(inst.spec);
    const double v = pareto_value(inst.spec, w, inst.split, cfg);
    const double expected =
        (1.0 - cfg.theta) * double(inst.split.retain_idx.size()) * std::log(3.0);
    CHECK(v == doctest::Approx(expected).epsilon(1e-12));
  }
  SUBCASE("affine in theta at fixed w") {
    const ParamVector w{oracles::random_vector(Eigen::Index(inst.spec.param_count()), rng),
                        inst.spec};
    auto value_at = [&](double th) {
      ParetoConfig c = cfg;
      c.theta = th;
      return pareto_value(inst.spec, w, inst.split, c);
    };
    const double v1 = value_at(0.2), v2 = value_at(0.8), vm = value_at(0.5);
    CHECK(vm == doctest::Approx(0.5 * (v1 + v2)).epsilon(1e-10));
  }
  SUBCASE("matches naive per-example recomputation") {
    cfg.lambda = 0.37;
    const ParamVector w{oracles::random_vector(Eigen::Index(inst.spec.param_count()), rng),
                        inst.spec};
    double naive = 0.0;
    for (int i : inst.split.forget_idx) {
      const Vector p = forward(inst.spec, w, inst.data.features.row(i));
      naive += cfg.theta * kl_to_uniform(p);
    }
    for (int i : inst.split.retain_idx) {
      const Vector p = forward(inst.spec, w, inst.data.features.row(i));
      naive += (1.0 - cfg.theta) * (-std::log(p[inst.data.labels[std::size_t(i)]]));
    }
    naive += 0.5 * cfg.lambda * w.values.squaredNorm();
    CHECK(pareto_value(inst.spec, w, inst.split, cfg) == doctest::Approx(naive).epsilon(1e-10));
  }
  SUBCASE("empty forget set rejected") {
    Split bad = inst.split;
    bad.forget_idx.clear();
    CHECK_THROWS_AS(pareto_value(inst.spec, make_uniform_params(inst.spec), bad, cfg),
                    DomainError);
  }
}

TEST_CASE("pareto_gradient") {
  auto rng = derive_stream(43, 0);
  Instance inst = small_instance(11);
  ParetoConfig cfg;
  cfg.theta = 0.7;
  cfg.lambda = 0.05;

  SUBCASE("matches finite differences") {
    for (int t = 0; t < 5; ++t) {
      const ParamVector w{oracles::random_vector(Eigen::Index(inst.spec.param_count()), rng, 0.4),
                          inst.spec};
      const Vector g = pareto_gradient(inst.spec, w, inst.split, cfg).values;
      const Vector fd = oracles::numerical_gradient(
          [&](const Vector& v) {
            return pareto_value(inst.spec, ParamVector{v, inst.spec}, inst.split, cfg);
          },
          w.values);
      CHECK((g - fd).norm() / std::max(1.0, fd.norm()) <= 1e-5);
    }
  }
  SUBCASE("vanishes at the unconstrained optimum of a tiny convex instance") {
    ParetoConfig convex = cfg;
    convex.forget_loss = LossKind::SquareToUniform;
    convex.lambda = 0.5;
    SolveOptions opts;
    opts.max_iters = 500;
    opts.grad_tol = 1e-10;
    const SolveResult sol = solve_pareto_full_batch(
        inst.spec, Vector::Zero(Eigen::Index(inst.spec.param_count())), inst.split, convex, opts);
    CHECK(sol.grad_norm <= 1e-6);
  }
  SUBCASE("theta=0 edge reduces to the retain gradient plus lambda w") {
    ParetoConfig edge = cfg;
    edge.theta = 0.0;
    const Vector wv = oracles::random_vector(Eigen::Index(inst.spec.param_count()), rng, 0.4);
    Vector g(wv.size());
    pareto_gradient_raw(inst.spec, wv, inst.split, edge, g, /*allow_theta_edges=*/true);
    Vector retain_grad = Vector::Zero(wv.size());
    batch_loss_grad(inst.spec, wv, inst.data.features, inst.data.labels, inst.split.retain_idx,
                    LossKind::CrossEntropy, 1.0, retain_grad);
    retain_grad += edge.lambda * wv;
    CHECK((g - retain_grad).norm() <= 1e-12);
  }
}

TEST_CASE("project_ball") {
  auto rng = derive_stream(47, 0);
  const auto spec = ModelSpec::logreg(4, 3);
  ParamVector w{oracles::random_vector(Eigen::Index(spec.param_count()), rng), spec};
  const double norm = w.values.norm();
  SUBCASE("inside the ball is untouched") {
    const ParamVector p = project_ball(w, 2.0 * norm);
    CHECK(p.values == w.values);
  }
  SUBCASE("outside scales to the boundary") {
    const double c = norm / 2.0;
    const ParamVector p = project_ball(w, c);
    CHECK(p.values.norm() == doctest::Approx(c).epsilon(1e-12));
    CHECK((p.values / c - w.values / norm).norm() <= 1e-12);
  }
  SUBCASE("idempotent") {
    const ParamVector once = project_ball(w, 1.0);
    const ParamVector twice = project_ball(once, 1.0);
    CHECK(once.values == twice.values);
  }
}

TEST_CASE("local Pareto optimality on a 2-parameter-per-class convex toy") {
  // overlapping classes keep the lambda-free cross entropy optimum finite
  LabeledDataset data;
  data.features.resize(8, 1);
  data.labels = {0, 0, 0, 0, 1, 1, 1, 1};
  for (int i = 0; i < 3; ++i) data.features(i, 0) = -1.0 - 0.1 * i;
  data.features(3, 0) = 0.4;
  for (int i = 4; i < 7; ++i) data.features(i, 0) = 1.0 + 0.1 * (i - 4);
  data.features(7, 0) = -0.4;
  data.name = "toy";
  Split split = split_from_indices(data, {0, 6});
  const auto spec = ModelSpec::logreg(1, 2);

  ParetoConfig cfg;
  cfg.theta = 0.5;
  cfg.lambda = 0.0;  // pure scalarization; the Pareto claim is about the loss pair
  cfg.forget_loss = LossKind::SquareToUniform;
  SolveOptions opts;
  opts.max_iters = 2000;
  opts.grad_tol = 1e-12;
  const SolveResult sol = solve_pareto_full_batch(spec, Vector::Zero(4), split, cfg, opts);

  auto losses_at = [&](const Vector& w) {
    Vector dummy = Vector::Zero(4);
    const double lk = batch_loss_grad(spec, w, data.features, {}, split.forget_idx,
                                      cfg.forget_loss, 1.0, dummy);
    const double la = batch_loss_grad(spec, w, data.features, data.labels, split.retain_idx,
                                      LossKind::CrossEntropy, 1.0, dummy);
    return std::make_pair(lk, la);
  };
  const auto [lk0, la0] = losses_at(sol.w);
  const double tol = 1e-9;
  int improving = 0;
  for (int a = -2; a <= 2; ++a)
    for (int b = -2; b <= 2; ++b)
      for (int c = -2; c <= 2; ++c)
        for (int d = -2; d <= 2; ++d) {
          if (a == 0 && b == 0 && c == 0 && d == 0) continue;
          Vector probe = sol.w;
          probe[0] += 0.005 * a;
          probe[1] += 0.005 * b;
          probe[2] += 0.005 * c;
          probe[3] += 0.005 * d;
          const auto [lk, la] = losses_at(probe);
          if (lk < lk0 - tol && la < la0 - tol) ++improving;
        }
  CHECK(improving == 0);
}

TEST_CASE("mean_to_sum_form matches the mean-weighted objective up to scale") {
  Instance inst = small_instance(13);
  auto rng = derive_stream(53, 0);
  const ParamVector w{oracles::random_vector(Eigen::Index(inst.spec.param_count()), rng),
                      inst.spec};
  const double theta_m = 0.75, lambda_m = 0.01;
  const auto sf = mean_to_sum_form(theta_m, lambda_m, Eigen::Index(inst.split.forget_idx.size()),
                                   Eigen::Index(inst.split.retain_idx.size()));
  ParetoConfig sum_cfg;
  sum_cfg.theta = sf.theta;
  sum_cfg.lambda = sf.lambda;
  Vector dummy = Vector::Zero(w.values.size());
  const double lk = batch_loss_grad(inst.spec, w.values, inst.data.features, {},
                                    inst.split.forget_idx, sum_cfg.forget_loss, 1.0, dummy) /
                    double(inst.split.forget_idx.size());
  const double la = batch_loss_grad(inst.spec, w.values, inst.data.features, inst.data.labels,
                                    inst.split.retain_idx, LossKind::CrossEntropy, 1.0, dummy) /
                    double(inst.split.retain_idx.size());
  const double mean_obj =
      theta_m * lk + (1 - theta_m) * la + 0.5 * lambda_m * w.values.squaredNorm();
  const double zscale = theta_m / double(inst.split.forget_idx.size()) +
                        (1 - theta_m) / double(inst.split.retain_idx.size());
  const double sum_obj = pareto_value(inst.spec, w, inst.split, sum_cfg);
  CHECK(sum_obj == doctest::Approx(mean_obj / zscale).epsilon(1e-10));
}
