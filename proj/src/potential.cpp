#include "minhet/potential.hpp"

#include "minhet/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace minhet {

namespace {

// Value, gradient and Hessian of a scalar function of u.
struct Jet {
  double val = 0.0;
  Vec grad;
  Mat hess;
};

Jet constant_jet(int m, double c) {
  return {c, Vec::Zero(m), Mat::Zero(m, m)};
}

Jet squared_distance_jet(VecCRef u, const Vec& a) {
  const int m = static_cast<int>(u.size());
  Vec diff = u - a;
  return {diff.squaredNorm(), 2.0 * diff, 2.0 * Mat::Identity(m, m)};
}

Jet multiply(const Jet& a, const Jet& b) {
  Jet r;
  r.val = a.val * b.val;
  r.grad = a.val * b.grad + b.val * a.grad;
  r.hess = a.val * b.hess + b.val * a.hess + a.grad * b.grad.transpose() +
           b.grad * a.grad.transpose();
  return r;
}

Jet divide(const Jet& a, const Jet& b) {
  const double ib = 1.0 / b.val;
  Jet r;
  r.val = a.val * ib;
  r.grad = a.grad * ib - a.val * ib * ib * b.grad;
  r.hess = a.hess * ib -
           (a.grad * b.grad.transpose() + b.grad * a.grad.transpose()) * ib * ib -
           a.val * ib * ib * b.hess +
           2.0 * a.val * ib * ib * ib * b.grad * b.grad.transpose();
  return r;
}

// (1 + |u|^2)^p
Jet bracket_power_jet(VecCRef u, int p) {
  const int m = static_cast<int>(u.size());
  if (p == 0) return constant_jet(m, 1.0);
  const double r = 1.0 + u.squaredNorm();
  const double rp2 = p >= 2 ? std::pow(r, p - 2) : 1.0 / r;
  const double rp1 = rp2 * r;
  Jet j;
  j.val = rp1 * r;
  j.grad = 2.0 * p * rp1 * u;
  j.hess = 2.0 * p * rp1 * Mat::Identity(m, m) +
           4.0 * p * (p - 1) * rp2 * (u * u.transpose());
  return j;
}

Jet f_jet(const WellPotential& f, VecCRef u) {
  const int m = static_cast<int>(u.size());
  const auto& wells = f.wells;
  const int n = static_cast<int>(wells.size());
  Jet r;
  if (f.form == FForm::Product) {
    Jet num = constant_jet(m, 1.0);
    for (const auto& a : wells) num = multiply(num, squared_distance_jet(u, a));
    r = divide(num, bracket_power_jet(u, n - 1));
  } else if (f.form == FForm::Harmonic) {
    std::vector<Jet> d;
    d.reserve(n);
    for (const auto& a : wells) d.push_back(squared_distance_jet(u, a));
    Jet num = constant_jet(m, 1.0);
    for (const auto& dj : d) num = multiply(num, dj);
    Jet den = constant_jet(m, 0.0);
    for (int i = 0; i < n; ++i) {
      Jet others = constant_jet(m, 1.0);
      for (int k = 0; k < n; ++k)
        if (k != i) others = multiply(others, d[k]);
      den.val += others.val;
      den.grad += others.grad;
      den.hess += others.hess;
    }
    r = divide(num, den);
  } else {
    const double x = u[0];
    r = {0.25 * (x * x - 1.0) * (x * x - 1.0), Vec::Constant(1, x * x * x - x),
         Mat::Constant(1, 1, 3.0 * x * x - 1.0)};
  }
  r.val *= f.scale;
  r.grad *= f.scale;
  r.hess *= f.scale;
  return r;
}

// Value, gradient and increment of F without the Hessian. d_i = |u - a_i|^2.

double sqdist(VecCRef u, const Vec& a) { return (u - a).squaredNorm(); }

// Product of x over all indices except `skip1` and `skip2`.
double product_except(const std::vector<double>& x, int skip1, int skip2 = -1) {
  double p = 1.0;
  for (int i = 0; i < static_cast<int>(x.size()); ++i)
    if (i != skip1 && i != skip2) p *= x[i];
  return p;
}

// prod x'_i - prod x_i as a telescoping sum of the per-factor increments dx.
double product_delta(const std::vector<double>& x, const std::vector<double>& dx, int skip = -1) {
  const int n = static_cast<int>(x.size());
  double total = 0.0;
  for (int k = 0; k < n; ++k) {
    if (k == skip) continue;
    double t = dx[k];
    for (int i = 0; i < n; ++i) {
      if (i == k || i == skip) continue;
      t *= i < k ? x[i] + dx[i] : x[i];
    }
    total += t;
  }
  return total;
}

double f_value(const WellPotential& f, VecCRef u) {
  const int n = static_cast<int>(f.wells.size());
  std::vector<double> d(n);
  for (int i = 0; i < n; ++i) d[i] = sqdist(u, f.wells[i]);
  const double num = product_except(d, -1);
  if (f.form == FForm::Product) return f.scale * num / std::pow(1.0 + u.squaredNorm(), n - 1);
  double den = 0.0;
  for (int i = 0; i < n; ++i) den += product_except(d, i);
  return f.scale * num / den;
}

void f_gradient(const WellPotential& f, VecCRef u, VecRef out) {
  const int n = static_cast<int>(f.wells.size());
  std::vector<double> d(n);
  for (int i = 0; i < n; ++i) d[i] = sqdist(u, f.wells[i]);
  const double num = product_except(d, -1);
  Vec dnum = Vec::Zero(u.size());
  for (int i = 0; i < n; ++i) dnum += (2.0 * product_except(d, i)) * (u - f.wells[i]);
  if (f.form == FForm::Product) {
    const double r = 1.0 + u.squaredNorm();
    const double den = std::pow(r, n - 1);
    out = f.scale * (dnum / den - (num * 2.0 * (n - 1) / (den * r)) * u);
    return;
  }
  double den = 0.0;
  Vec dden = Vec::Zero(u.size());
  for (int i = 0; i < n; ++i) {
    den += product_except(d, i);
    for (int k = 0; k < n; ++k)
      if (k != i) dden += (2.0 * product_except(d, i, k)) * (u - f.wells[k]);
  }
  out = f.scale * (dnum / den - (num / (den * den)) * dden);
}

double f_delta(const WellPotential& f, VecCRef u, VecCRef du) {
  const int n = static_cast<int>(f.wells.size());
  std::vector<double> d(n), dd(n);
  for (int i = 0; i < n; ++i) {
    d[i] = sqdist(u, f.wells[i]);
    dd[i] = du.dot(2.0 * (u - f.wells[i]) + du);
  }
  const double num = product_except(d, -1);
  const double dnum = product_delta(d, dd);
  if (f.form == FForm::Product) {
    const int p = n - 1;
    const double r = 1.0 + u.squaredNorm();
    const double dr = du.dot(2.0 * u + du);
    const double r1 = r + dr;
    double sum = 0.0;
    for (int k = 0; k < p; ++k) sum += std::pow(r1, k) * std::pow(r, p - 1 - k);
    const double den = std::pow(r, p), den1 = std::pow(r1, p);
    return f.scale * (dnum * den - num * dr * sum) / (den * den1);
  }
  double den = 0.0, dden = 0.0;
  for (int i = 0; i < n; ++i) {
    den += product_except(d, i);
    dden += product_delta(d, dd, i);
  }
  return f.scale * (dnum * den - num * dden) / (den * (den + dden));
}

void check_sizes(const PotentialSpec& spec, VecCRef u, VecCRef v) {
  if (u.size() != spec.dimension() || v.size() != spec.dimension())
    throw InputError("potential: expected vectors of length " + std::to_string(spec.dimension()) +
                     ", got " + std::to_string(u.size()) + " and " + std::to_string(v.size()));
}

}  // namespace

PotentialSpec PotentialSpec::multiwell(WellPotential f) {
  PotentialSpec s;
  s.family_ = Family::Multiwell;
  s.f_ = std::move(f);
  s.check_f();
  return s;
}

PotentialSpec PotentialSpec::efk(WellPotential f, double beta) {
  if (!(beta > 0.0)) throw InputError("EFK potential requires beta > 0");
  PotentialSpec s = multiwell(std::move(f));
  s.family_ = Family::EFK;
  s.beta_ = beta;
  return s;
}

PotentialSpec PotentialSpec::generalized_efk(WellPotential f, Coupling g) {
  if (!(g.g0 >= 0.0) || !(g.g1 >= 0.0))
    throw InputError("generalized EFK coupling requires g0 >= 0 and g1 >= 0 so that G >= 0");
  PotentialSpec s = multiwell(std::move(f));
  s.family_ = Family::GeneralizedEFK;
  s.coupling_ = g;
  return s;
}

PotentialSpec PotentialSpec::custom(CustomPotential c) {
  if (c.dimension < 1) throw InputError("custom potential: dimension must be positive");
  if (!c.value || !c.gradient) throw InputError("custom potential: value and gradient callbacks are required");
  for (const auto& a : c.wells)
    if (a.size() != c.dimension) throw InputError("custom potential: well dimension mismatch");
  PotentialSpec s;
  s.family_ = Family::Custom;
  s.dim_ = c.dimension;
  s.custom_ = std::make_shared<const CustomPotential>(std::move(c));
  return s;
}

void PotentialSpec::check_f() {
  if (!(f_.scale > 0.0)) throw InputError("F: scale must be positive");
  if (f_.form == FForm::ScalarQuartic) {
    dim_ = 1;
    return;
  }
  if (f_.wells.empty()) throw InputError("F: at least one well is required");
  const auto m = f_.wells.front().size();
  if (m < 1) throw InputError("F: wells must have positive dimension");
  for (const auto& a : f_.wells)
    if (a.size() != m) throw InputError("F: all wells must have the same dimension");
  dim_ = static_cast<int>(m);
}

std::vector<Vec> PotentialSpec::wells() const {
  if (family_ == Family::Custom) return custom_->wells;
  if (f_.form == FForm::ScalarQuartic) return {Vec::Constant(1, -1.0), Vec::Constant(1, 1.0)};
  return f_.wells;
}

bool PotentialSpec::has_hessian() const {
  return family_ != Family::Custom || static_cast<bool>(custom_->hessian);
}

double PotentialSpec::value(VecCRef u, VecCRef v) const {
  if (family_ == Family::Custom) return custom_->value(u, v);
  double f;
  if (f_.form == FForm::ScalarQuartic) {
    const double x2 = u[0] * u[0] - 1.0;
    f = 0.25 * f_.scale * x2 * x2;
  } else {
    f = f_value(f_, u);
  }
  switch (family_) {
    case Family::EFK:
      return f + 0.5 * beta_ * v.squaredNorm();
    case Family::GeneralizedEFK:
      return f + 0.5 * (coupling_.g0 + coupling_.g1 * u.squaredNorm()) * v.squaredNorm();
    default:
      return f;
  }
}

double PotentialSpec::value_delta(VecCRef u, VecCRef v, VecCRef du, VecCRef dv) const {
  if (family_ == Family::Custom) return custom_->value(u + du, v + dv) - custom_->value(u, v);
  double df;
  if (f_.form == FForm::ScalarQuartic) {
    const double x = u[0];
    const double y = x + du[0];
    df = 0.25 * f_.scale * du[0] * (x + y) * (x * x + y * y - 2.0);
  } else {
    df = f_delta(f_, u, du);
  }
  const double dvv = dv.dot(2.0 * v + dv);
  switch (family_) {
    case Family::EFK:
      return df + 0.5 * beta_ * dvv;
    case Family::GeneralizedEFK: {
      const double g_new = coupling_.g0 + coupling_.g1 * (u + du).squaredNorm();
      const double dg = coupling_.g1 * du.dot(2.0 * u + du);
      return df + 0.5 * (g_new * dvv + dg * v.squaredNorm());
    }
    default:
      return df;
  }
}

void PotentialSpec::gradient(VecCRef u, VecCRef v, VecRef wu, VecRef wv) const {
  if (family_ == Family::Custom) {
    Gradient g = custom_->gradient(u, v);
    wu = g.wu;
    wv = g.wv;
    return;
  }
  if (f_.form == FForm::ScalarQuartic) {
    wu[0] = f_.scale * (u[0] * u[0] * u[0] - u[0]);
  } else {
    f_gradient(f_, u, wu);
  }
  switch (family_) {
    case Family::EFK:
      wv = beta_ * v;
      break;
    case Family::GeneralizedEFK: {
      const double vv = v.squaredNorm();
      wu += coupling_.g1 * vv * u;
      wv = (coupling_.g0 + coupling_.g1 * u.squaredNorm()) * v;
      break;
    }
    default:
      wv.setZero();
  }
}

void PotentialSpec::hessian(VecCRef u, VecCRef v, MatRef uu, MatRef uv, MatRef vv) const {
  if (family_ == Family::Custom) {
    if (!custom_->hessian)
      throw CapabilityError("custom potential registered without second derivatives");
    HessianBlocks h = custom_->hessian(u, v);
    uu = h.uu;
    uv = h.uv;
    vv = h.vv;
    return;
  }
  const int m = dim_;
  if (f_.form == FForm::ScalarQuartic) {
    uu(0, 0) = f_.scale * (3.0 * u[0] * u[0] - 1.0);
  } else {
    uu = f_jet(f_, u).hess;
  }
  switch (family_) {
    case Family::EFK:
      uv.setZero();
      vv = beta_ * Mat::Identity(m, m);
      break;
    case Family::GeneralizedEFK:
      uu += coupling_.g1 * v.squaredNorm() * Mat::Identity(m, m);
      uv = 2.0 * coupling_.g1 * v * u.transpose();
      vv = (coupling_.g0 + coupling_.g1 * u.squaredNorm()) * Mat::Identity(m, m);
      break;
    default:
      uv.setZero();
      vv.setZero();
  }
  // exact symmetry, independent of summation order
  uu = (0.5 * (uu + uu.transpose())).eval();
  vv = (0.5 * (vv + vv.transpose())).eval();
}

double PotentialSpec::parameter(std::string_view name) const {
  if (name == "beta" && family_ == Family::EFK) return beta_;
  if (name == "g0" && family_ == Family::GeneralizedEFK) return coupling_.g0;
  if (name == "g1" && family_ == Family::GeneralizedEFK) return coupling_.g1;
  if (name == "scale" && family_ != Family::Custom) return f_.scale;
  throw InputError("potential " + to_string(family_) + " has no parameter '" + std::string(name) + "'");
}

PotentialSpec PotentialSpec::with_parameter(std::string_view name, double value) const {
  parameter(name);
  if (name == "beta") return efk(f_, value);
  if (name == "scale") {
    PotentialSpec s = *this;
    s.f_.scale = value;
    s.check_f();
    return s;
  }
  Coupling g = coupling_;
  (name == "g0" ? g.g0 : g.g1) = value;
  return generalized_efk(f_, g);
}

double eval_W(const PotentialSpec& spec, VecCRef u, VecCRef v) {
  check_sizes(spec, u, v);
  return spec.value(u, v);
}

Gradient grad_W(const PotentialSpec& spec, VecCRef u, VecCRef v) {
  check_sizes(spec, u, v);
  Gradient g{Vec::Zero(spec.dimension()), Vec::Zero(spec.dimension())};
  spec.gradient(u, v, g.wu, g.wv);
  return g;
}

HessianBlocks hess_W(const PotentialSpec& spec, VecCRef u, VecCRef v) {
  check_sizes(spec, u, v);
  const int m = spec.dimension();
  HessianBlocks h{Mat::Zero(m, m), Mat::Zero(m, m), Mat::Zero(m, m)};
  spec.hessian(u, v, h.uu, h.uv, h.vv);
  return h;
}

std::string to_string(Family f) {
  switch (f) {
    case Family::Multiwell: return "multiwell";
    case Family::EFK: return "efk";
    case Family::GeneralizedEFK: return "generalized_efk";
    case Family::Custom: return "custom";
  }
  return "unknown";
}

std::string to_string(FForm f) {
  switch (f) {
    case FForm::ScalarQuartic: return "quartic";
    case FForm::Product: return "product";
    case FForm::Harmonic: return "harmonic";
  }
  return "unknown";
}

double WellSet::distance(VecCRef u) const {
  if (distance_fn) return distance_fn(u);
  double best = std::numeric_limits<double>::infinity();
  for (const auto& a : points) best = std::min(best, (u - a).norm());
  return best;
}

std::size_t WellSet::nearest(VecCRef u) const {
  std::size_t best = 0;
  double dist = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double d = (u - points[i]).norm();
    if (d < dist) {
      dist = d;
      best = i;
    }
  }
  return best;
}

EquilibriaSpec::EquilibriaSpec(std::vector<Vec> minus, std::vector<Vec> plus, double q)
    : EquilibriaSpec(WellSet{std::move(minus), {}}, WellSet{std::move(plus), {}}, q) {}

EquilibriaSpec::EquilibriaSpec(WellSet minus, WellSet plus, double q)
    : minus_(std::move(minus)), plus_(std::move(plus)), q_(q) {
  if (minus_.points.empty() || plus_.points.empty())
    throw InputError("equilibria: A- and A+ must be nonempty");
  const auto m = minus_.points.front().size();
  if (m < 1) throw InputError("equilibria: wells must have positive dimension");
  for (const auto* set : {&minus_, &plus_})
    for (const auto& a : set->points)
      if (a.size() != m) throw InputError("equilibria: all wells must have the same dimension");
  separation_ = std::numeric_limits<double>::infinity();
  for (const auto& a : minus_.points)
    for (const auto& b : plus_.points) separation_ = std::min(separation_, (a - b).norm());
  if (!(separation_ > 0.0)) throw InputError("equilibria: A- and A+ must be disjoint");
  if (!(q_ > 0.0) || !(q_ < 0.5 * separation_))
    throw InputError("equilibria: q must satisfy 0 < q < d(A-, A+)/2 = " +
                     std::to_string(0.5 * separation_) + ", got q = " + std::to_string(q_));
}

std::pair<Vec, Vec> EquilibriaSpec::closest_pair() const {
  std::pair<Vec, Vec> best{minus_.points.front(), plus_.points.front()};
  double dist = std::numeric_limits<double>::infinity();
  for (const auto& a : minus_.points)
    for (const auto& b : plus_.points) {
      const double d = (a - b).norm();
      if (d < dist) {
        dist = d;
        best = {a, b};
      }
    }
  return best;
}

ValidationReport validate_hypotheses(const PotentialSpec& spec, const EquilibriaSpec& eq,
                                     const ValidationOptions& opts) {
  if (opts.budget < 1) throw InputError("validate_hypotheses: budget must be >= 1");
  const int m = spec.dimension();
  if (eq.dimension() != m) throw InputError("validate_hypotheses: equilibria dimension mismatch");

  std::mt19937_64 rng(opts.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto random_direction = [&] {
    Vec d(m);
    do {
      for (int i = 0; i < m; ++i) d[i] = normal(rng);
    } while (d.norm() < 1e-12);
    return Vec(d / d.norm());
  };
  auto random_in_ball = [&](double radius) {
    const double r = radius * std::pow(unit(rng), 1.0 / m);
    return Vec(r * random_direction());
  };

  double max_norm = 0.0;
  for (const auto* set : {&eq.minus(), &eq.plus()})
    for (const auto& a : set->points) max_norm = std::max(max_norm, a.norm());
  const double far = opts.far_radius > 0.0 ? opts.far_radius : std::max(10.0, 10.0 * max_norm);
  const double v_radius = 1.0 + max_norm;
  const Vec zero = Vec::Zero(m);
  ValidationReport report;

  // H1: declared wells are zeros; W(., 0) > 0 away from the tubes.
  {
    auto& h = report.h1;
    h.min_value = std::numeric_limits<double>::infinity();
    for (const auto* set : {&eq.minus(), &eq.plus()})
      for (const auto& a : set->points) {
        const double w = spec.value(a, zero);
        if (!(w <= opts.well_tolerance)) {
          h.passed = false;
          h.detail = "declared well is not a zero of W(., 0): W = " + std::to_string(w);
        }
      }
    // Zeros the family knows about come first in the sample.
    const std::vector<Vec> known = spec.wells();
    int drawn = 0;
    for (int tries = 0; drawn < opts.budget && tries < 100 * opts.budget; ++tries) {
      Vec u(m);
      if (tries < static_cast<int>(known.size())) {
        u = known[tries];
      } else {
        for (int i = 0; i < m; ++i) u[i] = far * (2.0 * unit(rng) - 1.0);
      }
      if (eq.minus().distance(u) <= eq.q() || eq.plus().distance(u) <= eq.q()) continue;
      ++drawn;
      const double w = spec.value(u, zero);
      h.min_value = std::min(h.min_value, w);
      if (!(w > 0.0) && h.passed) {
        h.passed = false;
        h.detail = "W(u, 0) vanishes outside the q-tubes";
      }
    }
    h.samples = drawn;
    if (drawn == 0) h.min_value = 0.0;
  }

  // H2 surrogate: positivity on the sphere d(u, A-) = d(A-, A+)/2.
  {
    auto& h = report.h2;
    h.min_value = std::numeric_limits<double>::infinity();
    const double radius = 0.5 * eq.separation();
    std::uniform_int_distribution<std::size_t> pick(0, eq.minus().points.size() - 1);
    int drawn = 0;
    for (int tries = 0; drawn < opts.budget && tries < 100 * opts.budget; ++tries) {
      Vec u = eq.minus().points[pick(rng)] + radius * random_direction();
      if (eq.minus().distance(u) < radius * (1.0 - 1e-12)) continue;
      ++drawn;
      const double w = spec.value(u, random_in_ball(v_radius));
      h.min_value = std::min(h.min_value, w);
      if (!(w > 0.0) && h.passed) {
        h.passed = false;
        h.detail = "W vanishes on the separating sphere around A-";
      }
    }
    h.samples = drawn;
    if (drawn == 0) h.min_value = 0.0;
  }

  // H3 surrogate: W bounded away from zero on a far sphere, uniformly in v.
  {
    auto& h = report.h3;
    h.min_value = std::numeric_limits<double>::infinity();
    for (int k = 0; k < opts.budget; ++k) {
      const double w = spec.value(far * random_direction(), random_in_ball(far));
      h.min_value = std::min(h.min_value, w);
    }
    h.samples = opts.budget;
    if (!(h.min_value > opts.far_threshold)) {
      h.passed = false;
      h.detail = "min W on |u| = " + std::to_string(far) + " is below " + std::to_string(opts.far_threshold);
    }
  }
  return report;
}

}  // namespace minhet
