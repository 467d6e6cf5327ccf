#include "helpers.hpp"
#include "minhet/errors.hpp"

#include <doctest.h>

#include <cmath>

using namespace testing;

namespace {

struct Named {
  const char* name;
  PotentialSpec spec;
};

std::vector<Named> builtin_families() {
  WellPotential quartic;
  WellPotential product2{FForm::Product, {Vec::Unit(2, 0), -Vec::Unit(2, 0)}, 1.0};
  WellPotential product3{FForm::Product, {Vec::Zero(3), Vec::Constant(3, 1.0), -Vec::Unit(3, 2)}, 0.7};
  WellPotential harmonic2{FForm::Harmonic, {Vec::Unit(2, 0), -Vec::Unit(2, 0), Vec::Unit(2, 1)}, 1.3};
  WellPotential triple{FForm::Product, {scalar(-1), scalar(0.9), scalar(1.1)}, 1.0};
  return {
      {"efk quartic", PotentialSpec::efk(quartic, 2.0)},
      {"multiwell quartic", PotentialSpec::multiwell(quartic)},
      {"multiwell product m=2", PotentialSpec::multiwell(product2)},
      {"efk product triple", PotentialSpec::efk(triple, 1.0)},
      {"efk harmonic m=2", PotentialSpec::efk(harmonic2, 0.5)},
      {"gefk product m=3", PotentialSpec::generalized_efk(product3, {0.5, 0.25})},
      {"gefk harmonic m=2", PotentialSpec::generalized_efk(harmonic2, {1.0, 2.0})},
  };
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

}  // namespace

TEST_CASE("eval_W reference values") {
  const Vec zero = scalar(0), one = scalar(1);
  CHECK(eval_W(PotentialSpec::efk({}, 1.0), one, zero) == 0.0);
  CHECK(eval_W(PotentialSpec::efk({}, 2.0), zero, one) == doctest::Approx(1.25).epsilon(1e-15));

  const auto product = PotentialSpec::multiwell({FForm::Product, {Vec::Unit(2, 0), -Vec::Unit(2, 0)}, 1.0});
  CHECK(eval_W(product, Vec::Unit(2, 0), Vec::Constant(2, 3.7)) == 0.0);
  CHECK_THROWS_AS(eval_W(product, scalar(1), scalar(0)), InputError);
}

TEST_CASE("grad_W and hess_W reference values") {
  const Gradient g1 = grad_W(PotentialSpec::efk({}, 1.0), scalar(1), scalar(0));
  CHECK(g1.wu[0] == 0.0);
  CHECK(g1.wv[0] == 0.0);
  const Gradient g2 = grad_W(PotentialSpec::efk({}, 2.0), scalar(0), scalar(1));
  CHECK(g2.wu[0] == 0.0);
  CHECK(g2.wv[0] == 2.0);

  for (double beta : {0.5, 3.0}) {
    for (double u : {-1.3, 0.0, 0.4, 1.0}) {
      const HessianBlocks h = hess_W(PotentialSpec::efk({}, beta), scalar(u), scalar(0.7));
      CHECK(h.vv(0, 0) == beta);
      CHECK(h.uv(0, 0) == 0.0);
      CHECK(h.uu(0, 0) == doctest::Approx(3 * u * u - 1).epsilon(1e-14));
    }
  }
  CHECK(hess_W(PotentialSpec::efk({}, 3.0), scalar(1), scalar(0)).uu(0, 0) == 2.0);
}

TEST_CASE("gradient matches central differences of W on 100 points per family") {
  std::mt19937_64 rng(7);
  const double step = 1e-6;
  for (const auto& [name, spec] : builtin_families()) {
    CAPTURE(name);
    const int m = spec.dimension();
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
      const Vec u = random_vec(rng, m, -2, 2), v = random_vec(rng, m, -2, 2);
      const Gradient g = grad_W(spec, u, v);
      for (int i = 0; i < m; ++i) {
        const Vec e = Vec::Unit(m, i) * step;
        const double fu = (eval_W(spec, u + e, v) - eval_W(spec, u - e, v)) / (2 * step);
        const double fv = (eval_W(spec, u, v + e) - eval_W(spec, u, v - e)) / (2 * step);
        worst = std::max({worst, rel_err(g.wu[i], fu), rel_err(g.wv[i], fv)});
      }
    }
    CHECK(worst < 1e-6);
  }
}

TEST_CASE("Hessian matches central differences of the gradient") {
  std::mt19937_64 rng(11);
  const double step = 1e-6;
  for (const auto& [name, spec] : builtin_families()) {
    CAPTURE(name);
    const int m = spec.dimension();
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
      const Vec u = random_vec(rng, m, -2, 2), v = random_vec(rng, m, -2, 2);
      const HessianBlocks h = hess_W(spec, u, v);
      for (int j = 0; j < m; ++j) {
        const Vec e = Vec::Unit(m, j) * step;
        const Gradient up = grad_W(spec, u + e, v), um = grad_W(spec, u - e, v);
        const Gradient vp = grad_W(spec, u, v + e), vm = grad_W(spec, u, v - e);
        for (int i = 0; i < m; ++i) {
          worst = std::max(worst, rel_err(h.uu(i, j), (up.wu[i] - um.wu[i]) / (2 * step)));
          // uv(i, j) = d^2 W / dv_i du_j
          worst = std::max(worst, rel_err(h.uv(i, j), (up.wv[i] - um.wv[i]) / (2 * step)));
          worst = std::max(worst, rel_err(h.vv(i, j), (vp.wv[i] - vm.wv[i]) / (2 * step)));
        }
      }
      CHECK(h.uu == h.uu.transpose());
      CHECK(h.vv == h.vv.transpose());
    }
    CHECK(worst < 1e-5);
  }
}

TEST_CASE("W is nonnegative and annihilated at every declared well") {
  std::mt19937_64 rng(3);
  for (const auto& [name, spec] : builtin_families()) {
    CAPTURE(name);
    const int m = spec.dimension();
    for (int trial = 0; trial < 500; ++trial)
      CHECK(eval_W(spec, random_vec(rng, m, -5, 5), random_vec(rng, m, -5, 5)) >= 0.0);
    for (const Vec& a : spec.wells()) {
      const Vec zero = Vec::Zero(m);
      CHECK(eval_W(spec, a, zero) == 0.0);
      const Gradient g = grad_W(spec, a, zero);
      CHECK(g.wu.lpNorm<Eigen::Infinity>() == 0.0);
      CHECK(g.wv.lpNorm<Eigen::Infinity>() == 0.0);
    }
  }
}

TEST_CASE("value_delta agrees with the plain difference and stays accurate for tiny steps") {
  std::mt19937_64 rng(5);
  for (const auto& [name, spec] : builtin_families()) {
    CAPTURE(name);
    const int m = spec.dimension();
    for (int trial = 0; trial < 50; ++trial) {
      const Vec u = random_vec(rng, m, -2, 2), v = random_vec(rng, m, -2, 2);
      const Vec du = random_vec(rng, m, -0.3, 0.3), dv = random_vec(rng, m, -0.3, 0.3);
      const double direct = eval_W(spec, u + du, v + dv) - eval_W(spec, u, v);
      CHECK(spec.value_delta(u, v, du, dv) == doctest::Approx(direct).epsilon(1e-10).scale(1.0));
      // First-order accuracy: for t -> 0 the ratio to the directional derivative tends to 1.
      const Gradient g = grad_W(spec, u, v);
      const double t = 1e-9;
      const double slope = g.wu.dot(du) + g.wv.dot(dv);
      if (std::abs(slope) > 1e-3)
        CHECK(spec.value_delta(u, v, t * du, t * dv) / t == doctest::Approx(slope).epsilon(1e-6));
    }
  }
}

TEST_CASE("custom potentials without second derivatives raise a capability error") {
  CustomPotential c;
  c.dimension = 1;
  c.value = [](const Vec& u, const Vec& v) { return u.squaredNorm() + v.squaredNorm(); };
  c.gradient = [](const Vec& u, const Vec& v) { return Gradient{2 * u, 2 * v}; };
  const PotentialSpec spec = PotentialSpec::custom(c);
  CHECK_FALSE(spec.has_hessian());
  CHECK(eval_W(spec, scalar(1), scalar(2)) == 5.0);
  CHECK_THROWS_AS(hess_W(spec, scalar(0), scalar(0)), CapabilityError);
}

TEST_CASE("family constructors enforce their parameter ranges") {
  CHECK_THROWS_AS(PotentialSpec::efk({}, 0.0), InputError);
  CHECK_THROWS_AS(PotentialSpec::efk({}, -1.0), InputError);
  CHECK_THROWS_AS(PotentialSpec::generalized_efk({}, {-0.1, 0.0}), InputError);
  CHECK_THROWS_AS(PotentialSpec::multiwell({FForm::Product, {}, 1.0}), InputError);
  CHECK_THROWS_AS(PotentialSpec::multiwell({FForm::Product, {scalar(0), Vec::Zero(2)}, 1.0}), InputError);

  const PotentialSpec s = PotentialSpec::efk({}, 3.0);
  CHECK(s.parameter("beta") == 3.0);
  CHECK(s.with_parameter("beta", 1.5).beta() == 1.5);
  CHECK_THROWS_AS(s.parameter("g0"), InputError);
  CHECK_THROWS_AS(s.with_parameter("beta", -2.0), InputError);
}

TEST_CASE("EquilibriaSpec enforces 0 < q < d(A-, A+)/2") {
  CHECK_NOTHROW(pm_one(0.5));
  CHECK_THROWS_AS(pm_one(1.2), InputError);
  CHECK_THROWS_AS(pm_one(1.0), InputError);
  CHECK_THROWS_AS(pm_one(0.0), InputError);
  CHECK_THROWS_AS(EquilibriaSpec({scalar(1)}, {scalar(1)}, 0.1), InputError);
  CHECK_THROWS_AS(EquilibriaSpec(std::vector<Vec>{}, {scalar(1)}, 0.1), InputError);

  const EquilibriaSpec eq({scalar(-1)}, {scalar(0.9), scalar(1.1)}, 0.5);
  CHECK(eq.separation() == doctest::Approx(1.9));
  CHECK(eq.closest_pair().second[0] == 0.9);
  CHECK(eq.plus().nearest(scalar(1.06)) == 1u);
}

TEST_CASE("validate_hypotheses flags") {
  const PotentialSpec efk = PotentialSpec::efk({}, 1.0);
  const ValidationReport ok = validate_hypotheses(efk, pm_one());
  CHECK(ok.all_passed());
  CHECK(ok.h1.samples > 0);
  CHECK(ok.h2.samples > 0);
  CHECK(ok.h3.samples > 0);

  // A fake well at 0: W(0, 0) = 1/4.
  const ValidationReport bad = validate_hypotheses(efk, EquilibriaSpec({scalar(-1)}, {scalar(0)}, 0.4));
  CHECK_FALSE(bad.h1.passed);
  CHECK_FALSE(bad.all_passed());

  // A well left out of both sets makes W vanish outside the tubes.
  const PotentialSpec triple = PotentialSpec::efk({FForm::Product, {scalar(-1), scalar(0.9), scalar(1.1)}, 1.0}, 1.0);
  const ValidationReport missing = validate_hypotheses(triple, EquilibriaSpec({scalar(-1)}, {scalar(0.9)}, 0.1));
  CHECK_FALSE(missing.h1.passed);
  CHECK(validate_hypotheses(triple, EquilibriaSpec({scalar(-1)}, {scalar(0.9), scalar(1.1)}, 0.5)).all_passed());

  const auto product = PotentialSpec::efk({FForm::Product, {Vec::Unit(2, 0), -Vec::Unit(2, 0)}, 1.0}, 2.0);
  CHECK(validate_hypotheses(product, EquilibriaSpec({-Vec::Unit(2, 0)}, {Vec::Unit(2, 0)}, 0.5)).all_passed());

  ValidationOptions o;
  o.seed = 99;
  const ValidationReport a = validate_hypotheses(efk, pm_one(), o), b = validate_hypotheses(efk, pm_one(), o);
  CHECK(a.h2.min_value == b.h2.min_value);
  CHECK(a.h3.min_value == b.h3.min_value);
}
