#pragma once

#include "minhet/grid_energy.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace minhet {

struct OptimizerConfig {
  int max_iterations = 20000;
  /// Max-norm threshold on the energy gradient. Zero selects the default
  /// 1e-8 * sqrt(number of free entries).
  double grad_tol = 0.0;
  int memory = 10;
  double c1 = 1e-4;
  double backtrack = 0.5;
  int max_backtracks = 60;
  double step_init = 1.0;

  void validate() const;
  double tolerance_for(long free_entries) const;
};

enum class OptimizerStatus { Converged, MaxIterations, LineSearchFailure };

std::string to_string(OptimizerStatus s);

struct OptimizerResult {
  OptimizerStatus status = OptimizerStatus::MaxIterations;
  int iterations = 0;
  double initial_energy = 0.0;
  double final_energy = 0.0;
  double final_grad_norm = 0.0;
  double grad_tol = 0.0;
  DiscreteOrbit orbit;
  /// Energy after each accepted step, starting with the initial energy.
  std::vector<double> energy_history;
};

/// Limited-memory BFGS over the interior nodes with Armijo backtracking. The
/// initial inverse-Hessian model is the inverse of the banded quadratic part
/// of the energy at the clamped wells (bending plus the linearized W terms),
/// so the iteration count does not grow with the h^-4 stiffness.
OptimizerResult minimize(const PotentialSpec& spec, const DiscreteOrbit& start,
                         const OptimizerConfig& config = {});

using PotentialFamily = std::function<PotentialSpec(double)>;

/// Solves the family at each parameter in order, warm-starting from the
/// previous converged orbit. A run that does not converge sends the next one
/// back to `base`.
std::vector<OptimizerResult> sweep(const PotentialFamily& family, std::span<const double> parameters,
                                   const DiscreteOrbit& base, const OptimizerConfig& config = {});

/// Sweep over one named parameter of `spec` (see PotentialSpec::with_parameter).
std::vector<OptimizerResult> sweep(const PotentialSpec& spec, std::string_view parameter,
                                   std::span<const double> values, const DiscreteOrbit& base,
                                   const OptimizerConfig& config = {});

struct AuditReport {
  int trials = 0;
  double min_delta = 0.0;
  double fraction_nonnegative = 0.0;
  std::vector<double> deltas;
};

/// Energy change under random smooth bumps supported in random interior
/// windows. The two nodes at each window edge are left untouched.
AuditReport local_minimality_audit(const PotentialSpec& spec, const DiscreteOrbit& orbit, int trials,
                                   double amplitude, std::uint64_t seed = 1);

}  // namespace minhet
