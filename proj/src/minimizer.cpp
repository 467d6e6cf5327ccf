#include "minhet/minimizer.hpp"

#include "minhet/errors.hpp"

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include <algorithm>
#include <cmath>
#include <deque>
#include <optional>
#include <random>

namespace minhet {

void OptimizerConfig::validate() const {
  if (max_iterations < 0) throw InputError("optimizer: max_iterations must be >= 0");
  if (!(grad_tol >= 0.0)) throw InputError("optimizer: grad_tol must be >= 0");
  if (memory < 1) throw InputError("optimizer: memory must be >= 1");
  if (!(c1 > 0.0 && c1 < 1.0)) throw InputError("optimizer: need 0 < c1 < 1");
  if (!(backtrack > 0.0 && backtrack < 1.0)) throw InputError("optimizer: need 0 < backtrack < 1");
  if (max_backtracks < 1) throw InputError("optimizer: max_backtracks must be >= 1");
  if (!(step_init > 0.0)) throw InputError("optimizer: step_init must be positive");
}

double OptimizerConfig::tolerance_for(long free_entries) const {
  return grad_tol > 0.0 ? grad_tol : 1e-8 * std::sqrt(static_cast<double>(free_entries));
}

std::string to_string(OptimizerStatus s) {
  switch (s) {
    case OptimizerStatus::Converged: return "Converged";
    case OptimizerStatus::MaxIterations: return "MaxIterations";
    case OptimizerStatus::LineSearchFailure: return "LineSearchFailure";
  }
  return "unknown";
}

namespace {

using SpMat = Eigen::SparseMatrix<double>;

double max_symmetric_eigenvalue(const Mat& a) {
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (a + a.transpose()), Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

// Inverse of h * (sum_k w_k (D2_k^T D2_k + c_v D1_k^T D1_k) + c_u I) restricted to
// the interior nodes, applied to every component separately.
class BandedPreconditioner {
 public:
  BandedPreconditioner(const PotentialSpec& spec, const DiscreteOrbit& start) {
    const int n = start.intervals();
    const double h = start.grid().spacing();
    double cu = 0.0;
    double cv = 0.0;
    if (spec.has_hessian()) {
      const Vec zero = Vec::Zero(spec.dimension());
      for (const Vec& a : {start.a_minus(), start.a_plus()}) {
        const HessianBlocks hb = hess_W(spec, a, zero);
        cu = std::max(cu, max_symmetric_eigenvalue(hb.uu));
        cv = std::max(cv, max_symmetric_eigenvalue(hb.vv));
      }
    }
    const int dof = n - 1;
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(static_cast<std::size_t>(dof) * 9);
    // Interior index of node j, or -1 for a clamped node.
    auto idx = [n](int j) {
      if (j < 0) j = -j;
      if (j > n) j = 2 * n - j;
      return (j == 0 || j == n) ? -1 : j - 1;
    };
    auto add_row = [&](double weight, std::initializer_list<std::pair<int, double>> row) {
      // Merge coefficients of the same node (ghost reflection can repeat one).
      std::vector<std::pair<int, double>> merged;
      for (auto [j, c] : row) {
        const int i = idx(j);
        if (i < 0) continue;
        auto it = std::find_if(merged.begin(), merged.end(), [i](auto& p) { return p.first == i; });
        if (it == merged.end()) merged.emplace_back(i, c);
        else it->second += c;
      }
      for (auto [a, ca] : merged)
        for (auto [b, cb] : merged) trips.emplace_back(a, b, weight * ca * cb);
    };
    const double ih2 = 1.0 / (h * h);
    const double i2h = 0.5 / h;
    for (int k = 0; k <= n; ++k) {
      const double w = (k == 0 || k == n) ? 0.5 * h : h;
      add_row(w, {{k - 1, ih2}, {k, -2.0 * ih2}, {k + 1, ih2}});
      if (cv > 0.0 && k > 0 && k < n) add_row(w * cv, {{k - 1, -i2h}, {k + 1, i2h}});
    }
    if (cu > 0.0)
      for (int i = 0; i < dof; ++i) trips.emplace_back(i, i, h * cu);
    SpMat m(dof, dof);
    m.setFromTriplets(trips.begin(), trips.end());
    solver_.compute(m);
    if (solver_.info() != Eigen::Success) throw InputError("minimize: preconditioner factorization failed");
  }

  // Applies the inverse to an m x (N-1) block stored column-major in `x`.
  Vec apply(const Vec& x, int m) const {
    const long dof = x.size() / m;
    Vec out(x.size());
    Eigen::Map<const Mat> xin(x.data(), m, dof);
    Eigen::Map<Mat> xout(out.data(), m, dof);
    for (int i = 0; i < m; ++i) {
      Vec row = xin.row(i).transpose();
      xout.row(i) = solver_.solve(row).transpose();
    }
    return out;
  }

 private:
  Eigen::SimplicialLDLT<SpMat> solver_;
};

Vec flatten(const Mat& block) { return Eigen::Map<const Vec>(block.data(), block.size()); }

}  // namespace

OptimizerResult minimize(const PotentialSpec& spec, const DiscreteOrbit& start,
                         const OptimizerConfig& config) {
  config.validate();
  if (spec.dimension() != start.dimension())
    throw InputError("minimize: potential and orbit dimensions differ");
  const double e0 = energy(spec, start).total;
  if (!std::isfinite(e0)) throw InputError("minimize: starting energy is not finite");

  const int m = start.dimension();
  const int dof = start.intervals() - 1;
  const long free_entries = static_cast<long>(m) * dof;

  OptimizerResult result{.initial_energy = e0,
                         .grad_tol = config.tolerance_for(free_entries),
                         .orbit = start,
                         .energy_history = {e0}};

  DiscreteOrbit current = start;
  Vec x = flatten(start.interior());
  Vec g = flatten(energy_gradient(spec, current));
  double gnorm = g.lpNorm<Eigen::Infinity>();
  double e = e0;

  const BandedPreconditioner precond(spec, start);
  std::deque<Vec> s_hist, y_hist;
  std::deque<double> rho_hist;

  auto direction = [&]() -> Vec {
    Vec q = g;
    const std::size_t k = s_hist.size();
    std::vector<double> alpha(k);
    for (std::size_t i = k; i-- > 0;) {
      alpha[i] = rho_hist[i] * s_hist[i].dot(q);
      q -= alpha[i] * y_hist[i];
    }
    Vec r = precond.apply(q, m);
    if (k > 0) {
      const Vec hy = precond.apply(y_hist.back(), m);
      r *= s_hist.back().dot(y_hist.back()) / y_hist.back().dot(hy);
    }
    for (std::size_t i = 0; i < k; ++i) {
      const double b = rho_hist[i] * y_hist[i].dot(r);
      r += (alpha[i] - b) * s_hist[i];
    }
    return -r;
  };

  auto clear_memory = [&] {
    s_hist.clear();
    y_hist.clear();
    rho_hist.clear();
  };

  OptimizerStatus status = gnorm <= result.grad_tol ? OptimizerStatus::Converged
                                                     : OptimizerStatus::MaxIterations;
  int it = 0;
  while (status != OptimizerStatus::Converged && it < config.max_iterations) {
    Vec d = direction();
    double slope = g.dot(d);
    if (!(slope < 0.0)) {
      clear_memory();
      d = direction();
      slope = g.dot(d);
    }
    double alpha = config.step_init;
    bool accepted = false;
    double de = 0.0;
    Vec x_new;
    std::optional<DiscreteOrbit> trial;
    for (int bt = 0; bt <= config.max_backtracks; ++bt) {
      x_new = x + alpha * d;
      trial.emplace(current.with_interior(Eigen::Map<const Mat>(x_new.data(), m, dof)));
      de = energy_difference(spec, current, *trial);
      if (std::isfinite(de) && de <= config.c1 * alpha * slope) {
        accepted = true;
        break;
      }
      alpha *= config.backtrack;
    }
    if (!accepted) {
      if (!s_hist.empty()) {
        clear_memory();
        continue;
      }
      status = OptimizerStatus::LineSearchFailure;
      break;
    }
    ++it;
    Vec g_new = flatten(energy_gradient(spec, *trial));
    Vec s = x_new - x;
    Vec y = g_new - g;
    const double sy = s.dot(y);
    if (sy > 1e-14 * s.norm() * y.norm()) {
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(y));
      rho_hist.push_back(1.0 / sy);
      if (static_cast<int>(s_hist.size()) > config.memory) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }
    x = std::move(x_new);
    g = std::move(g_new);
    current = std::move(*trial);
    e += de;
    result.energy_history.push_back(e);
    gnorm = g.lpNorm<Eigen::Infinity>();
    if (gnorm <= result.grad_tol) status = OptimizerStatus::Converged;
  }

  result.status = status;
  result.iterations = it;
  result.final_grad_norm = gnorm;
  result.final_energy = energy(spec, current).total;
  result.orbit = std::move(current);
  return result;
}

std::vector<OptimizerResult> sweep(const PotentialFamily& family, std::span<const double> parameters,
                                   const DiscreteOrbit& base, const OptimizerConfig& config) {
  if (parameters.empty()) throw InputError("sweep: parameter list is empty");
  const bool increasing = parameters.size() < 2 || parameters[1] > parameters[0];
  for (std::size_t i = 1; i < parameters.size(); ++i) {
    if (increasing ? !(parameters[i] > parameters[i - 1]) : !(parameters[i] < parameters[i - 1]))
      throw InputError("sweep: parameter list must be strictly monotone");
  }
  std::vector<OptimizerResult> out;
  out.reserve(parameters.size());
  const DiscreteOrbit* start = &base;
  for (double p : parameters) {
    out.push_back(minimize(family(p), *start, config));
    start = out.back().status == OptimizerStatus::Converged ? &out.back().orbit : &base;
  }
  return out;
}

std::vector<OptimizerResult> sweep(const PotentialSpec& spec, std::string_view parameter,
                                   std::span<const double> values, const DiscreteOrbit& base,
                                   const OptimizerConfig& config) {
  spec.parameter(parameter);
  const std::string name(parameter);
  return sweep([&spec, name](double p) { return spec.with_parameter(name, p); }, values, base, config);
}

AuditReport local_minimality_audit(const PotentialSpec& spec, const DiscreteOrbit& orbit, int trials,
                                   double amplitude, std::uint64_t seed) {
  if (trials < 1) throw InputError("local_minimality_audit: trials must be >= 1");
  const int n = orbit.intervals();
  const int m = orbit.dimension();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const int min_width = 8;
  const int max_width = std::max(min_width, n / 4);
  std::uniform_int_distribution<int> width_dist(min_width, max_width);

  AuditReport report;
  report.trials = trials;
  report.deltas.reserve(trials);
  int nonneg = 0;
  for (int t = 0; t < trials; ++t) {
    const int width = std::min(width_dist(rng), n - 2);
    std::uniform_int_distribution<int> start_dist(1, n - 1 - width);
    const int a = start_dist(rng);
    const int b = a + width;
    Vec c0(m), c1(m);
    for (int i = 0; i < m; ++i) {
      c0[i] = normal(rng);
      c1[i] = normal(rng);
    }
    Mat values = orbit.values();
    for (int j = a + 2; j <= b - 2; ++j) {
      const double s = 2.0 * (j - a) / width - 1.0;
      const double bump = std::exp(1.0 - 1.0 / (1.0 - s * s));
      values.col(j) += amplitude * bump * (c0 + s * c1);
    }
    const double delta = energy_difference(spec, orbit, DiscreteOrbit(orbit.grid(), std::move(values)));
    report.deltas.push_back(delta);
    if (delta >= 0.0) ++nonneg;
  }
  report.min_delta = *std::min_element(report.deltas.begin(), report.deltas.end());
  report.fraction_nonnegative = static_cast<double>(nonneg) / trials;
  return report;
}

}  // namespace minhet
