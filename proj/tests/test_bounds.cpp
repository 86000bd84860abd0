#include <doctest.h>

#include <cmath>

#include "ttp/bounds.hpp"
#include "ttp/errors.hpp"
#include "ttp/rng.hpp"

using namespace ttp;

TEST_CASE("uniformity_gap_bound") {
  SUBCASE("theta -> 1 drives the bound to 0") {
    CHECK(uniformity_gap_bound(1.0 - 1e-12, 1000, 10.0) < 1e-3);
  }
  SUBCASE("theta=0.5, |D_r|=1, k=e gives sqrt(2)") {
    CHECK(uniformity_gap_bound(0.5, 1, std::exp(1.0)) ==
          doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
  }
  SUBCASE("monotone decreasing in theta") {
    double prev = std::numeric_limits<double>::infinity();
    for (double th = 0.05; th < 1.0; th += 0.05) {
      const double v = uniformity_gap_bound(th, 100, 10.0);
      CHECK(v < prev);
      prev = v;
    }
  }
  SUBCASE("theta edges rejected") {
    CHECK_THROWS_AS(uniformity_gap_bound(0.0, 10, 10.0), DomainError);
    CHECK_THROWS_AS(uniformity_gap_bound(1.0, 10, 10.0), DomainError);
  }
}

TEST_CASE("theta_for_epsilon") {
  SUBCASE("large epsilon drives the threshold to 0") {
    CHECK(theta_for_epsilon(100, 10.0, 1e6) < 1e-6);
  }
  SUBCASE("|D_r|=900, k=10, eps=0.5") {
    CHECK(theta_for_epsilon(900, 10.0, 0.5) == doctest::Approx(0.9999397).epsilon(1e-6));
  }
  SUBCASE("always in (0,1)") {
    auto rng = derive_stream(91, 0);
    std::uniform_real_distribution<double> eps(1e-3, 50.0);
    std::uniform_int_distribution<long> nr(1, 100000);
    std::uniform_int_distribution<int> k(2, 1000);
    for (int t = 0; t < 1000; ++t) {
      const double th = theta_for_epsilon(nr(rng), double(k(rng)), eps(rng));
      CHECK(th > 0.0);
      CHECK(th < 1.0);
    }
  }
  SUBCASE("nonpositive epsilon rejected") {
    CHECK_THROWS_AS(theta_for_epsilon(10, 10.0, 0.0), DomainError);
  }
  SUBCASE("the guaranteed theta inverts the gap bound") {
    const double eps = 0.37;
    const double th = theta_for_epsilon(55, 10.0, eps);
    CHECK(uniformity_gap_bound(th, 55, 10.0) == doctest::Approx(eps).epsilon(1e-9));
  }
}

TEST_CASE("lambda_validity_threshold") {
  LipschitzConstants ones;
  SUBCASE("theta=0 collapses to P") {
    CHECK(lambda_validity_threshold(0.0, 5.0, ones) == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("theta=1, C=1, unit constants: 3 + sqrt(22)") {
    CHECK(lambda_validity_threshold(1.0, 1.0, ones) ==
          doctest::Approx(3.0 + std::sqrt(22.0)).epsilon(1e-12));
    CHECK(lambda_validity_threshold(1.0, 1.0, ones) == doctest::Approx(7.690).epsilon(1e-3));
  }
  SUBCASE("increasing in C") {
    double prev = 0.0;
    for (double c = 0.5; c < 20.0; c += 0.5) {
      const double v = lambda_validity_threshold(0.6, c, ones);
      CHECK(v > prev);
      prev = v;
    }
  }
}

TEST_CASE("retain_loss_gap_bound") {
  LipschitzConstants ones;
  SUBCASE("theta=0 gives exactly 0 with a valid lambda") {
    const BoundReport rep = retain_loss_gap_bound(0.0, 2.0, 10.0, ones);
    CHECK(rep.valid);
    CHECK(rep.value == 0.0);
  }
  SUBCASE("negative discriminant flags invalid") {
    // small lambda leaves (lambda - P)^2 below 4 theta C F (2 p_k + lambda)
    const BoundReport rep = retain_loss_gap_bound(0.9, 1.5, 10.0, ones);
    CHECK_FALSE(rep.valid);
  }
  SUBCASE("hand-checked value") {
    // theta=1, C=10, consts=1, lambda=46:
    // disc = 45^2 - 4*10*48 = 105, dw = (45 - sqrt(105))/2
    const double dw = (45.0 - std::sqrt(105.0)) / 2.0;
    const BoundReport rep = retain_loss_gap_bound(1.0, 46.0, 10.0, ones);
    CHECK(rep.valid);
    CHECK(rep.value == doctest::Approx(0.5 * dw * dw + 46.0 * 10.0 * dw).epsilon(1e-12));
  }
  SUBCASE("echoes its inputs") {
    const BoundReport rep = retain_loss_gap_bound(0.25, 46.0, 10.0, ones);
    CHECK(rep.inputs_echo.find("theta=0.25") != std::string::npos);
    CHECK(rep.inputs_echo.find("lambda=46") != std::string::npos);
  }
}

TEST_CASE("estimator_sample_requirement") {
  LipschitzConstants ones;
  SUBCASE("B/(lambda+lambda_min)=10, b=1 gives ceil(20 ln 10) = 47") {
    // B = (theta p_k + lambda)/|D_f| = (0.5 + 9.5)/1 = 10 with lambda+lambda_min=1
    LipschitzConstants c = ones;
    const long n = estimator_sample_requirement(1, 9.5, -8.5, 0.5, c, 1, 1000000);
    CHECK(n == 47);
  }
  SUBCASE("floored at 1") {
    // B/(lambda+lambda_min)=1, b=1: ceil(2 ln 1) = 0 -> 1
    const long n = estimator_sample_requirement(1, 0.5, 0.5, 0.5, ones, 1, 1000000);
    CHECK(n == 1);
  }
  SUBCASE("increasing in b") {
    long prev = 0;
    for (int b = 1; b <= 64; b *= 2) {
      const long n = estimator_sample_requirement(b, 9.5, -8.5, 0.5, ones, 1, 1000000);
      CHECK(n >= prev);
      prev = n;
    }
  }
  SUBCASE("nonpositive denominator rejected") {
    CHECK_THROWS_AS(estimator_sample_requirement(1, 1.0, -1.0, 0.5, ones, 10, 10), DomainError);
  }
}
