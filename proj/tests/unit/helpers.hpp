#pragma once

#include "minhet/analysis.hpp"
#include "minhet/minimizer.hpp"

#include <random>

namespace testing {

using namespace minhet;

inline Vec scalar(double x) { return Vec::Constant(1, x); }

inline EquilibriaSpec pm_one(double q = 0.5) { return EquilibriaSpec({scalar(-1)}, {scalar(1)}, q); }

inline DiscreteOrbit efk_guess(double L, int N, double c = 1.0) {
  return initial_guess(Grid(L, N), pm_one(), scalar(-1), scalar(1), c);
}

// Converged EFK minimizer with the tolerance the golden configs use.
inline OptimizerResult efk_minimizer(double beta, double L = 20.0, int N = 4000, double tol = 2e-9) {
  OptimizerConfig cfg;
  cfg.grad_tol = tol;
  return minimize(PotentialSpec::efk({}, beta), efk_guess(L, N), cfg);
}

inline DiscreteOrbit from_function(const Grid& g, auto&& f) {
  Mat v(1, g.intervals() + 1);
  for (int j = 0; j <= g.intervals(); ++j) v(0, j) = f(g.x(j));
  return DiscreteOrbit(g, v);
}

// W identically zero, with zero derivatives of every order.
inline PotentialSpec zero_potential(int m = 1) {
  CustomPotential c;
  c.dimension = m;
  c.value = [](const Vec&, const Vec&) { return 0.0; };
  c.gradient = [m](const Vec&, const Vec&) { return Gradient{Vec::Zero(m), Vec::Zero(m)}; };
  c.hessian = [m](const Vec&, const Vec&) {
    return HessianBlocks{Mat::Zero(m, m), Mat::Zero(m, m), Mat::Zero(m, m)};
  };
  return PotentialSpec::custom(c);
}

inline Vec random_vec(std::mt19937_64& rng, int m, double lo, double hi) {
  std::uniform_real_distribution<double> d(lo, hi);
  Vec v(m);
  for (int i = 0; i < m; ++i) v[i] = d(rng);
  return v;
}

}  // namespace testing
