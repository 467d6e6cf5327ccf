#pragma once

#include "minhet/grid_energy.hpp"

#include <complex>
#include <optional>
#include <string>
#include <vector>

namespace minhet {

enum class Side { Left, Right };

/// Alternating tube entries of a discrete orbit: crossings[0] is where it first
/// enters the q-tube of A+, crossings[1] where it next enters the tube of A-,
/// and so on. Abscissas are linearly interpolated between nodes. exits[i] is
/// the last exit from the opposite tube before crossings[i].
struct TransitionSequence {
  std::vector<double> crossings;
  std::vector<double> exits;
  /// Number of A- -> A+ passages.
  int count = 0;
};

TransitionSequence transitions(const DiscreteOrbit& orbit, const EquilibriaSpec& eq);

struct SpectralInfo {
  /// All 4m roots lambda of det(lambda^4 I - lambda^2 W_vv + lambda (M^T - M) + W_uu) = 0
  /// at (a, 0), where M = d^2W/dv du. M vanishes or is symmetric for every
  /// built-in family, which leaves the polynomial in mu = lambda^2.
  std::vector<std::complex<double>> roots;
  /// Smallest positive real part, 0 if no root has one.
  double slowest_stable_rate = 0.0;
  bool oscillatory = false;
  /// The (u, v) Hessian of W at (a, 0) is positive definite.
  bool nondegenerate = false;
};

SpectralInfo linearization_roots(const PotentialSpec& spec, const Vec& well);

struct ExponentialFit {
  double rate = 0.0;
  double amplitude = 0.0;
  double r_squared = 0.0;
  int points = 0;
};

struct DecayFit {
  /// Fit of d(u, A-/+) ~ K exp(-k |x|) along the tail.
  double rate = 0.0;
  double amplitude = 0.0;
  double r_squared = 0.0;
  double window_begin = 0.0;
  double window_end = 0.0;
  /// Fitted local maxima of the distance rather than every node.
  bool envelope = false;
  int points = 0;
  /// Same fit applied to |u'|.
  ExponentialFit derivative;
};

enum class FitMode { Auto, Direct, Envelope };

struct TailOptions {
  /// Nodes closer than max(boundary_nodes * h, boundary_fraction * L) to the
  /// clamped end are skipped: the clamp bends the tail away from a pure
  /// exponential there.
  int boundary_nodes = 10;
  double boundary_fraction = 0.1;
  /// Values at or below this are treated as roundoff.
  double floor = 1e-13;
  FitMode mode = FitMode::Auto;
};

/// Log-linear least squares of the distance to the well set over the outer
/// `window_fraction` of the half-domain on `side`. Throws DegenerateTail if the
/// tail is already at the roundoff floor.
DecayFit decay_fit(const DiscreteOrbit& orbit, const EquilibriaSpec& eq, Side side,
                   double window_fraction = 0.25, const TailOptions& opts = {});

enum class TailKind { Monotone, Oscillatory };
std::string to_string(TailKind k);
std::string to_string(Side s);

struct TailClass {
  TailKind kind = TailKind::Monotone;
  int sign_changes = 0;
};

/// Sign changes of (u - a) . direction between the clamped end (after the
/// boundary skip) and the last node inside the q-tube. `direction` may be
/// omitted when m = 1.
TailClass classify_tail(const DiscreteOrbit& orbit, const EquilibriaSpec& eq, Side side,
                        const std::optional<Vec>& direction = std::nullopt,
                        const TailOptions& opts = {});

struct HamiltonianStats {
  double max_abs = 0.0;
  double mean = 0.0;
  double stddev = 0.0;
};

HamiltonianStats hamiltonian_stats(const PotentialSpec& spec, const DiscreteOrbit& orbit);

struct EndpointLimits {
  Vec a_minus_hat;
  Vec a_plus_hat;
  std::size_t a_minus_id = 0;
  std::size_t a_plus_id = 0;
};

/// Nearest sample wells of A- and A+ to the tail averages of u. Throws NoLimit
/// if an average is farther than q from its well set.
EndpointLimits endpoint_limits(const DiscreteOrbit& orbit, const EquilibriaSpec& eq,
                               double window_fraction = 0.25, const TailOptions& opts = {});

/// Least squares line y = slope x + intercept with its coefficient of determination.
struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};
LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace minhet
