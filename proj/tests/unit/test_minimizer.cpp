#include "helpers.hpp"
#include "minhet/errors.hpp"

#include <doctest.h>

#include <cmath>

using namespace testing;

namespace {

// Direct solve of the clamped fourth-difference system D4 u = 0 at j = 1..N-1,
// ghosts reflected (u_{-1} = u_1, u_{N+1} = u_{N-1}).
Vec banded_bending_solve(int n, double a_minus, double a_plus) {
  const int k = n - 1;
  Mat A = Mat::Zero(k, k);
  Vec b = Vec::Zero(k);
  const double stencil[5] = {1, -4, 6, -4, 1};
  for (int j = 1; j < n; ++j) {
    for (int o = -2; o <= 2; ++o) {
      int idx = j + o;
      if (idx < 0) idx = -idx;
      if (idx > n) idx = 2 * n - idx;
      const double c = stencil[o + 2];
      if (idx == 0) b[j - 1] -= c * a_minus;
      else if (idx == n) b[j - 1] -= c * a_plus;
      else A(j - 1, idx - 1) += c;
    }
  }
  return A.partialPivLu().solve(b);
}

}  // namespace

TEST_CASE("config validation") {
  OptimizerConfig c;
  CHECK_NOTHROW(c.validate());
  c.c1 = 1.0;
  CHECK_THROWS_AS(c.validate(), InputError);
  c = {};
  c.backtrack = 0.0;
  CHECK_THROWS_AS(c.validate(), InputError);
  c = {};
  c.memory = 0;
  CHECK_THROWS_AS(c.validate(), InputError);
  CHECK(OptimizerConfig{}.tolerance_for(400) == doctest::Approx(2e-7));
}

TEST_CASE("constant well orbit is converged at iteration 0") {
  const Grid g(5.0, 100);
  const DiscreteOrbit c(g, Mat::Constant(1, 101, 1.0));
  const OptimizerResult r = minimize(PotentialSpec::efk({}, 2.0), c);
  CHECK(r.status == OptimizerStatus::Converged);
  CHECK(r.iterations == 0);
  CHECK(r.final_energy == 0.0);
}

TEST_CASE("W = 0 reproduces the direct banded solve") {
  const Grid g(5.0, 500);
  const DiscreteOrbit start = initial_guess(g, pm_one(), scalar(-1), scalar(1), 1.0);
  OptimizerConfig cfg;
  cfg.grad_tol = 1e-10;  // roundoff floor of the gradient is about 5e-11 here
  const OptimizerResult r = minimize(zero_potential(), start, cfg);
  CHECK(r.status == OptimizerStatus::Converged);
  const Vec oracle = banded_bending_solve(500, -1.0, 1.0);
  const Vec got = r.orbit.interior().row(0).transpose();
  CHECK((got - oracle).lpNorm<Eigen::Infinity>() < 1e-8);
}

TEST_CASE("EFK beta = 3 golden problem") {
  const auto spec = PotentialSpec::efk({}, 3.0);
  const DiscreteOrbit start = efk_guess(20.0, 4000);
  OptimizerConfig cfg;
  cfg.grad_tol = 2e-9;
  const OptimizerResult r = minimize(spec, start, cfg);
  CHECK(r.status == OptimizerStatus::Converged);
  CHECK(r.final_energy <= energy(spec, start).total);
  CHECK(r.final_energy == doctest::Approx(energy(spec, r.orbit).total).epsilon(1e-14));
  // clamp preservation, bit for bit
  CHECK(r.orbit.values().col(0) == start.values().col(0));
  CHECK(r.orbit.values().col(4000) == start.values().col(4000));
  // gradient contract
  CHECK(energy_gradient(spec, r.orbit).lpNorm<Eigen::Infinity>() <= r.grad_tol);
  // monotone descent
  REQUIRE(r.energy_history.size() == static_cast<std::size_t>(r.iterations) + 1);
  for (std::size_t i = 1; i < r.energy_history.size(); ++i) CHECK(r.energy_history[i] <= r.energy_history[i - 1]);
}

TEST_CASE("status reporting without convergence") {
  OptimizerConfig cfg;
  cfg.grad_tol = 1e-12;
  cfg.max_iterations = 2;
  const OptimizerResult r = minimize(PotentialSpec::efk({}, 3.0), efk_guess(20.0, 1000), cfg);
  CHECK(r.status == OptimizerStatus::MaxIterations);
  CHECK(r.iterations == 2);
  CHECK(r.final_energy < r.initial_energy);
}

TEST_CASE("minimize rejects non-finite starting energy") {
  const auto spec = PotentialSpec::efk({FForm::Product, {scalar(-1), scalar(1)}, 1.0}, 1.0);
  Mat v = efk_guess(5.0, 100).values();
  v(0, 50) = 1e200;
  CHECK_THROWS_AS(minimize(spec, DiscreteOrbit(Grid(5.0, 100), v)), InputError);
}

TEST_CASE("determinism") {
  OptimizerConfig cfg;
  cfg.grad_tol = 1e-9;
  const auto a = minimize(PotentialSpec::efk({}, 1.0), efk_guess(20.0, 2000), cfg);
  const auto b = minimize(PotentialSpec::efk({}, 1.0), efk_guess(20.0, 2000), cfg);
  CHECK(a.orbit.values() == b.orbit.values());
  CHECK(a.iterations == b.iterations);
}

TEST_CASE("sweeps") {
  const PotentialSpec base = PotentialSpec::efk({}, 4.0);
  const DiscreteOrbit guess = efk_guess(20.0, 2000);
  OptimizerConfig cfg;
  cfg.grad_tol = 1e-9;

  const std::vector<double> betas = {4.0, 3.0, std::sqrt(8.0)};
  const auto runs = sweep(base, "beta", betas, guess, cfg);
  REQUIRE(runs.size() == 3);
  for (const auto& r : runs) {
    CHECK(r.status == OptimizerStatus::Converged);
    CHECK(std::isfinite(r.final_energy));
  }

  const std::vector<double> one = {3.0};
  const auto single = sweep(base, "beta", one, guess, cfg);
  const auto direct = minimize(base.with_parameter("beta", 3.0), guess, cfg);
  CHECK(single.front().final_energy == direct.final_energy);
  CHECK(single.front().orbit.values() == direct.orbit.values());

  const std::vector<double> bad = {3.0, 2.0, 2.5};
  CHECK_THROWS_AS(sweep(base, "beta", bad, guess, cfg), InputError);
  CHECK_THROWS_AS(sweep(base, "beta", std::vector<double>{}, guess, cfg), InputError);

  // beta = 1 tails oscillate where beta = 3 tails do not.
  const std::vector<double> pair = {3.0, 1.0};
  const auto osc = sweep(base, "beta", pair, guess, cfg);
  CHECK(classify_tail(osc[0].orbit, pm_one(), Side::Left).kind == TailKind::Monotone);
  CHECK(classify_tail(osc[1].orbit, pm_one(), Side::Left).kind == TailKind::Oscillatory);

  // warm starts do not cost more iterations in aggregate than cold starts
  const std::vector<double> near = {3.0, 2.95, 2.9, 2.85, 2.83};
  int warm = 0, cold = 0;
  for (const auto& r : sweep(base, "beta", near, guess, cfg)) warm += r.iterations;
  for (double b : near) cold += minimize(base.with_parameter("beta", b), guess, cfg).iterations;
  MESSAGE("warm-start iterations " << warm << " vs cold " << cold);
  CHECK(warm <= cold);
}

TEST_CASE("local minimality audit") {
  const auto spec = PotentialSpec::efk({}, 3.0);
  const OptimizerResult r = efk_minimizer(3.0);
  REQUIRE(r.status == OptimizerStatus::Converged);

  const AuditReport null = local_minimality_audit(spec, r.orbit, 5, 0.0, 1);
  for (double d : null.deltas) CHECK(d == 0.0);

  const AuditReport good = local_minimality_audit(spec, r.orbit, 100, 1e-2, 1);
  CHECK(good.trials == 100);
  CHECK(good.deltas.size() == 100u);
  CHECK(good.min_delta >= -1e-10);
  CHECK(good.fraction_nonnegative == 1.0);

  const AuditReport guess = local_minimality_audit(spec, efk_guess(20.0, 4000), 100, 1e-2, 1);
  CHECK(guess.min_delta < 0.0);

  const AuditReport again = local_minimality_audit(spec, r.orbit, 100, 1e-2, 1);
  CHECK(again.deltas == good.deltas);
  CHECK_THROWS_AS(local_minimality_audit(spec, r.orbit, 0, 1e-2, 1), InputError);
}
