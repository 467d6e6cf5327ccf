#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace minhet {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using VecCRef = Eigen::Ref<const Eigen::VectorXd>;
using VecRef = Eigen::Ref<Eigen::VectorXd>;
using MatRef = Eigen::Ref<Eigen::MatrixXd>;

enum class Family { Multiwell, EFK, GeneralizedEFK, Custom };

/// Analytic form of the multiwell part F(u).
enum class FForm {
  /// 1/4 (u^2 - 1)^2, m = 1, wells fixed at -1 and +1.
  ScalarQuartic,
  /// scale * prod_i |u - a_i|^2 / (1 + |u|^2)^(N-1).
  Product,
  /// scale / sum_i |u - a_i|^-2, written as prod_i d_i / sum_i prod_{k!=i} d_k.
  Harmonic,
};

/// Descriptor of F. For Product and Harmonic, F grows like |u|^2 at infinity
/// (with constant scale for Product and scale/N for Harmonic), so
/// liminf_{|u|->inf} F = +inf.
struct WellPotential {
  FForm form = FForm::ScalarQuartic;
  std::vector<Vec> wells;
  double scale = 1.0;
};

/// G(u) = g0 + g1 |u|^2 for the generalized EFK family.
struct Coupling {
  double g0 = 1.0;
  double g1 = 0.0;
};

struct Gradient {
  Vec wu;
  Vec wv;
};

/// Second-derivative blocks. `uv(i, j)` is d^2 W / (dv_i du_j), which is the
/// matrix multiplying u' in the Euler-Lagrange equation.
struct HessianBlocks {
  Mat uu;
  Mat uv;
  Mat vv;
};

/// User-registered callbacks. `hessian` may be left empty; second-derivative
/// queries then raise CapabilityError.
struct CustomPotential {
  int dimension = 1;
  std::function<double(const Vec&, const Vec&)> value;
  std::function<Gradient(const Vec&, const Vec&)> gradient;
  std::function<HessianBlocks(const Vec&, const Vec&)> hessian;
  std::vector<Vec> wells;
};

/// A declared potential W(u, v) with its analytic derivatives.
class PotentialSpec {
 public:
  static PotentialSpec multiwell(WellPotential f);
  static PotentialSpec efk(WellPotential f, double beta);
  static PotentialSpec generalized_efk(WellPotential f, Coupling g);
  static PotentialSpec custom(CustomPotential c);

  Family family() const { return family_; }
  int dimension() const { return dim_; }
  double beta() const { return beta_; }
  const Coupling& coupling() const { return coupling_; }
  const WellPotential& well_potential() const { return f_; }

  /// Zeros of W(., 0) known to the family (the F wells, or the custom list).
  std::vector<Vec> wells() const;

  bool has_hessian() const;

  // Unchecked hot-path evaluation; callers guarantee sizes.
  double value(VecCRef u, VecCRef v) const;
  void gradient(VecCRef u, VecCRef v, VecRef wu, VecRef wv) const;
  void hessian(VecCRef u, VecCRef v, MatRef uu, MatRef uv, MatRef vv) const;
  /// W(u + du, v + dv) - W(u, v), factored where the family allows so that
  /// small increments do not cancel against W itself.
  double value_delta(VecCRef u, VecCRef v, VecCRef du, VecCRef dv) const;

  /// Named scalar parameters for sweeps: "beta" (EFK), "g0", "g1"
  /// (GeneralizedEFK), "scale" (any family with a built-in F).
  double parameter(std::string_view name) const;
  PotentialSpec with_parameter(std::string_view name, double value) const;

 private:
  PotentialSpec() = default;
  void check_f();

  Family family_ = Family::Multiwell;
  int dim_ = 1;
  WellPotential f_;
  double beta_ = 0.0;
  Coupling coupling_;
  std::shared_ptr<const CustomPotential> custom_;
};

double eval_W(const PotentialSpec& spec, VecCRef u, VecCRef v);
Gradient grad_W(const PotentialSpec& spec, VecCRef u, VecCRef v);
HessianBlocks hess_W(const PotentialSpec& spec, VecCRef u, VecCRef v);

std::string to_string(Family f);
std::string to_string(FForm f);

/// A compact well set given by sample points, optionally with an exact
/// distance function (for wells that are sampled surfaces).
struct WellSet {
  std::vector<Vec> points;
  std::function<double(const Vec&)> distance_fn;

  double distance(VecCRef u) const;
  /// Index of the nearest sample point.
  std::size_t nearest(VecCRef u) const;
};

class EquilibriaSpec {
 public:
  EquilibriaSpec(WellSet minus, WellSet plus, double q);
  EquilibriaSpec(std::vector<Vec> minus, std::vector<Vec> plus, double q);

  const WellSet& minus() const { return minus_; }
  const WellSet& plus() const { return plus_; }
  double q() const { return q_; }
  int dimension() const { return static_cast<int>(minus_.points.front().size()); }
  /// d(A-, A+) over the sample points.
  double separation() const { return separation_; }
  /// Closest pair (a-, a+) realizing the separation.
  std::pair<Vec, Vec> closest_pair() const;

 private:
  WellSet minus_;
  WellSet plus_;
  double q_;
  double separation_;
};

struct HypothesisCheck {
  bool passed = true;
  int samples = 0;
  double min_value = 0.0;
  std::string detail;
};

/// Sampling surrogates for H1-H3. Passing flags do not prove anything;
/// a failing flag is a counterexample.
struct ValidationReport {
  HypothesisCheck h1;
  HypothesisCheck h2;
  HypothesisCheck h3;
  bool all_passed() const { return h1.passed && h2.passed && h3.passed; }
};

struct ValidationOptions {
  int budget = 1000;
  std::uint64_t seed = 1;
  /// Radius of the far sphere; 0 means 10x the largest well norm (at least 10).
  double far_radius = 0.0;
  double far_threshold = 1e-6;
  double well_tolerance = 1e-12;
};

ValidationReport validate_hypotheses(const PotentialSpec& spec, const EquilibriaSpec& eq,
                                     const ValidationOptions& opts = {});

}  // namespace minhet
