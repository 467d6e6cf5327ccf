#include "minhet/grid_energy.hpp"

#include "minhet/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>

namespace minhet {

Grid::Grid(double half_length, int intervals) : L_(half_length), N_(intervals) {
  if (!(half_length > 0.0) || !std::isfinite(half_length))
    throw InputError("grid: half-length L must be positive and finite");
  if (intervals < 8) throw InputError("grid: need N >= 8 intervals, got " + std::to_string(intervals));
  h_ = 2.0 * L_ / N_;
}

DiscreteOrbit::DiscreteOrbit(Grid grid, Mat values) : grid_(grid), values_(std::move(values)) {
  if (values_.cols() != grid_.intervals() + 1)
    throw InputError("orbit: expected " + std::to_string(grid_.intervals() + 1) + " nodes, got " +
                     std::to_string(values_.cols()));
  if (values_.rows() < 1) throw InputError("orbit: dimension must be positive");
  if (!values_.allFinite()) throw InputError("orbit: nodal values must be finite");
}

DiscreteOrbit DiscreteOrbit::with_interior(const Eigen::Ref<const Mat>& interior) const {
  if (interior.rows() != values_.rows() || interior.cols() != intervals() - 1)
    throw InputError("orbit: interior block has the wrong shape");
  Mat v = values_;
  v.middleCols(1, intervals() - 1) = interior;
  return DiscreteOrbit(grid_, std::move(v));
}

DiscreteOrbit initial_guess(const Grid& grid, const EquilibriaSpec& eq, const Vec& a_minus,
                            const Vec& a_plus, double core_halfwidth) {
  const int m = eq.dimension();
  if (a_minus.size() != m || a_plus.size() != m)
    throw InputError("initial_guess: clamp dimension does not match the equilibria");
  if (!(core_halfwidth > 0.0) || !(core_halfwidth < grid.half_length()))
    throw InputError("initial_guess: need 0 < core_halfwidth < L");
  if (eq.minus().distance(a_minus) > eq.q())
    throw InputError("initial_guess: a- is not within q of A-");
  if (eq.plus().distance(a_plus) > eq.q())
    throw InputError("initial_guess: a+ is not within q of A+");

  const int n = grid.intervals();
  Mat values(m, n + 1);
  const Vec jump = a_plus - a_minus;
  for (int j = 0; j <= n; ++j) {
    const double s = (grid.x(j) + core_halfwidth) / (2.0 * core_halfwidth);
    if (s <= 0.0) {
      values.col(j) = a_minus;
    } else if (s >= 1.0) {
      values.col(j) = a_plus;
    } else {
      const double s2 = s * s;
      values.col(j) = a_minus + (2.0 * s2 - s2 * s2) * jump;
    }
  }
  values.col(0) = a_minus;
  values.col(n) = a_plus;
  return DiscreteOrbit(grid, std::move(values));
}

Vec first_diff(const DiscreteOrbit& o, int j) {
  const double h = o.grid().spacing();
  return (o.node(j + 1) - o.node(j - 1)) / (2.0 * h);
}

Vec second_diff(const DiscreteOrbit& o, int j) {
  const double h = o.grid().spacing();
  return (o.node(j - 1) - 2.0 * o.node(j) + o.node(j + 1)) / (h * h);
}

Vec third_diff(const DiscreteOrbit& o, int j) {
  const double h = o.grid().spacing();
  return (o.node(j + 2) - 2.0 * o.node(j + 1) + 2.0 * o.node(j - 1) - o.node(j - 2)) /
         (2.0 * h * h * h);
}

Vec fourth_diff(const DiscreteOrbit& o, int j) {
  const double h = o.grid().spacing();
  const double h2 = h * h;
  return (o.node(j - 2) - 4.0 * o.node(j - 1) + 6.0 * o.node(j) - 4.0 * o.node(j + 1) +
          o.node(j + 2)) /
         (h2 * h2);
}

namespace {

void check_dimension(const PotentialSpec& spec, const DiscreteOrbit& orbit) {
  if (spec.dimension() != orbit.dimension())
    throw InputError("potential dimension " + std::to_string(spec.dimension()) +
                     " does not match orbit dimension " + std::to_string(orbit.dimension()));
}

bool near_boundary(int j, int n) { return j < 2 || j > n - 2; }

// Central differences with the reflected ghosts, written into preallocated buffers.
struct Stencils {
  explicit Stencils(const DiscreteOrbit& o)
      : orbit(o), h(o.grid().spacing()), d1(o.dimension()), d2(o.dimension()) {}
  void at(int j) {
    d1 = (orbit.node(j + 1) - orbit.node(j - 1)) * (0.5 / h);
    d2 = (orbit.node(j - 1) - 2.0 * orbit.node(j) + orbit.node(j + 1)) * (1.0 / (h * h));
  }
  const DiscreteOrbit& orbit;
  double h;
  Vec d1;
  Vec d2;
};

}  // namespace

EnergyBreakdown energy(const PotentialSpec& spec, const DiscreteOrbit& orbit) {
  check_dimension(spec, orbit);
  const int n = orbit.intervals();
  const double h = orbit.grid().spacing();
  Stencils st(orbit);
  double bending = 0.0;
  double pot = 0.0;
  for (int j = 0; j <= n; ++j) {
    st.at(j);
    const double w = (j == 0 || j == n) ? 0.5 * h : h;
    bending += w * 0.5 * st.d2.squaredNorm();
    pot += w * spec.value(orbit.node(j), st.d1);
  }
  return {bending + pot, bending, pot};
}

double energy_difference(const PotentialSpec& spec, const DiscreteOrbit& base,
                         const DiscreteOrbit& trial) {
  check_dimension(spec, base);
  if (trial.intervals() != base.intervals() || trial.dimension() != base.dimension())
    throw InputError("energy_difference: orbits live on different grids");
  const int n = base.intervals();
  const double h = base.grid().spacing();
  // Stencils of the increment are taken directly, not as differences of stencils.
  const DiscreteOrbit delta(base.grid(), trial.values() - base.values());
  Stencils sb(base);
  Stencils sd(delta);
  double total = 0.0;
  for (int j = 0; j <= n; ++j) {
    sb.at(j);
    sd.at(j);
    const double w = (j == 0 || j == n) ? 0.5 * h : h;
    const double bend = 0.5 * sd.d2.dot(2.0 * sb.d2 + sd.d2);
    const double pot = spec.value_delta(base.node(j), sb.d1, delta.node(j), sd.d1);
    total += w * (bend + pot);
  }
  return total;
}

Mat energy_gradient(const PotentialSpec& spec, const DiscreteOrbit& orbit) {
  check_dimension(spec, orbit);
  const int n = orbit.intervals();
  const int m = orbit.dimension();
  const double h = orbit.grid().spacing();

  // Per-node D2 and W_v, W_u at (u_j, D1_j).
  Mat d2(m, n + 1), wv(m, n + 1), wu(m, n + 1);
  Stencils st(orbit);
  Vec gu(m), gv(m);
  for (int j = 0; j <= n; ++j) {
    st.at(j);
    d2.col(j) = st.d2;
    spec.gradient(orbit.node(j), st.d1, gu, gv);
    wu.col(j) = gu;
    wv.col(j) = gv;
  }

  // Transposed stencils. The half weight at the ends cancels the factor 2 in
  // the reflected D2_0 and D2_N, and D1_0 = D1_N = 0 carries no dependence.
  Mat grad(m, n - 1);
  for (int j = 1; j < n; ++j) {
    Vec g = (d2.col(j - 1) - 2.0 * d2.col(j) + d2.col(j + 1)) / h + h * wu.col(j);
    if (j >= 2) g += 0.5 * wv.col(j - 1);
    if (j <= n - 2) g -= 0.5 * wv.col(j + 1);
    grad.col(j - 1) = g;
  }
  return grad;
}

NodalField el_residual(const PotentialSpec& spec, const DiscreteOrbit& orbit) {
  check_dimension(spec, orbit);
  if (!spec.has_hessian())
    throw CapabilityError("el_residual needs second derivatives of W");
  const int n = orbit.intervals();
  const int m = orbit.dimension();
  NodalField out{Mat(m, n + 1), std::vector<bool>(n + 1)};
  Stencils st(orbit);
  Vec gu(m), gv(m);
  Mat huu(m, m), huv(m, m), hvv(m, m);
  for (int j = 0; j <= n; ++j) {
    st.at(j);
    spec.gradient(orbit.node(j), st.d1, gu, gv);
    spec.hessian(orbit.node(j), st.d1, huu, huv, hvv);
    out.values.col(j) = fourth_diff(orbit, j) + gu - huv * st.d1 - hvv * st.d2;
    out.boundary_affected[j] = near_boundary(j, n);
  }
  return out;
}

ScalarProfile hamiltonian_profile(const PotentialSpec& spec, const DiscreteOrbit& orbit) {
  check_dimension(spec, orbit);
  const int n = orbit.intervals();
  const int m = orbit.dimension();
  ScalarProfile out{std::vector<double>(n + 1), std::vector<bool>(n + 1)};
  Stencils st(orbit);
  Vec gu(m), gv(m);
  for (int j = 0; j <= n; ++j) {
    st.at(j);
    spec.gradient(orbit.node(j), st.d1, gu, gv);
    const Vec d3 = third_diff(orbit, j);
    out.values[j] = 0.5 * st.d2.squaredNorm() - spec.value(orbit.node(j), st.d1) + gv.dot(st.d1) -
                    d3.dot(st.d1);
    out.boundary_affected[j] = near_boundary(j, n);
  }
  return out;
}

double el_residual_max(const NodalField& r) {
  double best = 0.0;
  for (int j = 0; j < r.values.cols(); ++j)
    if (!r.boundary_affected[j]) best = std::max(best, r.values.col(j).lpNorm<Eigen::Infinity>());
  return best;
}

void write_orbit_csv(std::ostream& out, const PotentialSpec& spec, const DiscreteOrbit& orbit) {
  const int m = orbit.dimension();
  const int n = orbit.intervals();
  out << 'x';
  for (const char* prefix : {"u_", "du_", "ddu_"})
    for (int i = 1; i <= m; ++i) out << ',' << prefix << i;
  out << ",H\n";
  const ScalarProfile ham = hamiltonian_profile(spec, orbit);
  char buf[32];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out << buf;
  };
  for (int j = 0; j <= n; ++j) {
    put(orbit.grid().x(j));
    const Vec d1 = first_diff(orbit, j);
    const Vec d2 = second_diff(orbit, j);
    for (int i = 0; i < m; ++i) out << ',', put(orbit.values()(i, j));
    for (int i = 0; i < m; ++i) out << ',', put(d1[i]);
    for (int i = 0; i < m; ++i) out << ',', put(d2[i]);
    out << ',';
    put(ham.values[j]);
    out << '\n';
  }
}

}  // namespace minhet
