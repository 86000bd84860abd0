// Test-only oracles, independent of the implementation paths they check.
#pragma once

#include <algorithm>
#include <functional>
#include <random>
#include <vector>

#include "ttp/numeric.hpp"

namespace oracles {

using ttp::Matrix;
using ttp::Vector;

// central finite differences of a scalar function
inline Vector numerical_gradient(const std::function<double(const Vector&)>& f, const Vector& w,
                                 double h = 1e-6) {
  Vector g(w.size());
  Vector p = w;
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    const double orig = p[i];
    p[i] = orig + h;
    const double fp = f(p);
    p[i] = orig - h;
    const double fm = f(p);
    p[i] = orig;
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

// central finite differences of a vector function along direction v
inline Vector numerical_directional(const std::function<Vector(const Vector&)>& grad,
                                    const Vector& w, const Vector& v, double h = 1e-6) {
  return (grad(w + h * v) - grad(w - h * v)) / (2.0 * h);
}

inline Vector random_vector(Eigen::Index n, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> nd(0.0, scale);
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = nd(rng);
  return v;
}

inline Vector random_simplex_point(Eigen::Index k, std::mt19937_64& rng) {
  std::exponential_distribution<double> ed(1.0);
  Vector p(k);
  for (Eigen::Index i = 0; i < k; ++i) p[i] = ed(rng);
  p /= p.sum();
  return p;
}

inline double spearman_rank_correlation(std::vector<double> a, std::vector<double> b) {
  auto ranks = [](std::vector<double>& v) {
    std::vector<std::size_t> order(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return v[x] < v[y]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) r[order[i]] = double(i);
    return r;
  };
  const auto ra = ranks(a), rb = ranks(b);
  const double n = double(ra.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    ma += ra[i];
    mb += rb[i];
  }
  ma /= n;
  mb /= n;
  double num = 0, da = 0, db = 0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    num += (ra[i] - ma) * (rb[i] - mb);
    da += (ra[i] - ma) * (ra[i] - ma);
    db += (rb[i] - mb) * (rb[i] - mb);
  }
  return num / std::sqrt(da * db);
}

}  // namespace oracles
