#pragma once

#include "minhet/potential.hpp"

#include <iosfwd>
#include <vector>

namespace minhet {

/// Uniform grid x_j = -L + j h on [-L, L], j = 0..N.
class Grid {
 public:
  Grid(double half_length, int intervals);

  double half_length() const { return L_; }
  int intervals() const { return N_; }
  double spacing() const { return h_; }
  double x(int j) const { return j == N_ ? L_ : -L_ + j * h_; }

 private:
  double L_;
  int N_;
  double h_;
};

/// Nodal values u_0..u_N (one column per node) with u_0 = a- and u_N = a+
/// held fixed. Stencils extend the data by even reflection about both ends,
/// u_{-k} = u_k and u_{N+k} = u_{N-k}, which realizes u'(+-L) = 0.
class DiscreteOrbit {
 public:
  DiscreteOrbit(Grid grid, Mat values);

  const Grid& grid() const { return grid_; }
  int dimension() const { return static_cast<int>(values_.rows()); }
  int intervals() const { return grid_.intervals(); }
  const Mat& values() const { return values_; }
  Vec a_minus() const { return values_.col(0); }
  Vec a_plus() const { return values_.col(values_.cols() - 1); }

  /// Value at node j, with ghost indices -N..2N resolved by reflection.
  auto node(int j) const { return values_.col(reflect(j)); }

  /// Interior values u_1..u_{N-1} as an m x (N-1) block.
  Mat interior() const { return values_.middleCols(1, intervals() - 1); }
  /// Same boundary data, new interior block (m x (N-1)).
  DiscreteOrbit with_interior(const Eigen::Ref<const Mat>& interior) const;

 private:
  int reflect(int j) const {
    const int n = intervals();
    if (j < 0) return -j;
    if (j > n) return 2 * n - j;
    return j;
  }

  Grid grid_;
  Mat values_;
};

struct EnergyBreakdown {
  double total = 0.0;
  double bending = 0.0;
  double potential_part = 0.0;
};

/// Per-node vector field with a flag on nodes whose stencil reaches a ghost.
struct NodalField {
  Mat values;
  std::vector<bool> boundary_affected;
};

struct ScalarProfile {
  std::vector<double> values;
  std::vector<bool> boundary_affected;
};

/// Samples u0 = a- + (2 s^2 - s^4)(a+ - a-) on the core [-c, c] (s the affine
/// map of the core onto [0, 1]), constant a-/a+ outside.
DiscreteOrbit initial_guess(const Grid& grid, const EquilibriaSpec& eq, const Vec& a_minus,
                            const Vec& a_plus, double core_halfwidth);

Vec first_diff(const DiscreteOrbit& orbit, int j);
Vec second_diff(const DiscreteOrbit& orbit, int j);
Vec third_diff(const DiscreteOrbit& orbit, int j);
Vec fourth_diff(const DiscreteOrbit& orbit, int j);

EnergyBreakdown energy(const PotentialSpec& spec, const DiscreteOrbit& orbit);

/// energy(trial) - energy(base) summed node by node so that cancellation in
/// the bending term is exact and the potential term only loses precision where
/// W itself is large. Both orbits must share grid and boundary data.
double energy_difference(const PotentialSpec& spec, const DiscreteOrbit& base,
                         const DiscreteOrbit& trial);

/// dE/du_j for the interior nodes j = 1..N-1, as an m x (N-1) block.
Mat energy_gradient(const PotentialSpec& spec, const DiscreteOrbit& orbit);

/// u'''' + W_u - W_uv u' - W_vv u'' at every node; nodes 0, 1, N-1, N use
/// ghost values and are flagged.
NodalField el_residual(const PotentialSpec& spec, const DiscreteOrbit& orbit);

/// H = 1/2 |u''|^2 - W + W_v . u' - u''' . u' at every node; nodes 0, 1, N-1, N
/// are flagged.
ScalarProfile hamiltonian_profile(const PotentialSpec& spec, const DiscreteOrbit& orbit);

/// Max |residual| over unflagged nodes.
double el_residual_max(const NodalField& residual);

/// CSV columns x,u_1..u_m,du_1..du_m,ddu_1..ddu_m,H with 17 significant digits.
void write_orbit_csv(std::ostream& out, const PotentialSpec& spec, const DiscreteOrbit& orbit);

}  // namespace minhet
