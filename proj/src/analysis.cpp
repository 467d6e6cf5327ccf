#include "minhet/analysis.hpp"

#include "minhet/errors.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace minhet {

std::string to_string(TailKind k) { return k == TailKind::Monotone ? "Monotone" : "Oscillatory"; }
std::string to_string(Side s) { return s == Side::Left ? "left" : "right"; }

namespace {

double interpolate_crossing(const Grid& grid, int j, const std::vector<double>& f) {
  // f[j-1] >= 0 > f[j]
  const double t = f[j - 1] / (f[j - 1] - f[j]);
  return grid.x(j - 1) + t * grid.spacing();
}

struct NodeRange {
  int begin;
  int end;  // inclusive
};

int boundary_skip(const DiscreteOrbit& orbit, const TailOptions& opts) {
  const double h = orbit.grid().spacing();
  const int by_fraction =
      static_cast<int>(std::ceil(opts.boundary_fraction * orbit.grid().half_length() / h - 1e-9));
  return std::max(opts.boundary_nodes, by_fraction);
}

NodeRange tail_window(const DiscreteOrbit& orbit, Side side, double fraction, const TailOptions& opts) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw InputError("tail window fraction must lie in (0, 1]");
  const int n = orbit.intervals();
  const int half = n / 2;
  const int skip = boundary_skip(orbit, opts);
  const int width = static_cast<int>(std::lround(fraction * half));
  int lo = skip;
  int hi = std::min(skip + width, half);
  if (hi - lo < 2) throw InputError("tail window is empty after the boundary skip");
  if (side == Side::Left) return {lo, hi};
  return {n - hi, n - lo};
}

const WellSet& tail_set(const EquilibriaSpec& eq, Side side) {
  return side == Side::Left ? eq.minus() : eq.plus();
}

std::vector<int> local_maxima(const std::vector<double>& v, double floor) {
  std::vector<int> out;
  for (std::size_t i = 1; i + 1 < v.size(); ++i)
    if (v[i] > floor && v[i] > v[i - 1] && v[i] >= v[i + 1]) out.push_back(static_cast<int>(i));
  return out;
}

ExponentialFit fit_exponential(const std::vector<double>& x, const std::vector<double>& d, Side side,
                               bool envelope, double floor) {
  std::vector<double> xs, ys;
  if (envelope) {
    for (int i : local_maxima(d, floor)) {
      xs.push_back(x[i]);
      ys.push_back(std::log(d[i]));
    }
  } else {
    for (std::size_t i = 0; i < d.size(); ++i)
      if (d[i] > floor) {
        xs.push_back(x[i]);
        ys.push_back(std::log(d[i]));
      }
  }
  ExponentialFit fit;
  fit.points = static_cast<int>(xs.size());
  if (xs.size() < 2) return fit;
  const LineFit line = fit_line(xs, ys);
  fit.rate = side == Side::Left ? line.slope : -line.slope;
  fit.amplitude = std::exp(line.intercept);
  fit.r_squared = line.r_squared;
  return fit;
}

}  // namespace

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw InputError("fit_line: need at least two points");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (!(sxx > 0.0)) throw InputError("fit_line: abscissas are all equal");
  LineFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  const double ss_res = std::max(0.0, syy - f.slope * sxy);
  f.r_squared = syy > 0.0 ? std::clamp(1.0 - ss_res / syy, 0.0, 1.0) : 1.0;
  return f;
}

TransitionSequence transitions(const DiscreteOrbit& orbit, const EquilibriaSpec& eq) {
  if (orbit.dimension() != eq.dimension()) throw InputError("transitions: dimension mismatch");
  const int n = orbit.intervals();
  const double q = eq.q();
  std::vector<double> fm(n + 1), fp(n + 1);
  for (int j = 0; j <= n; ++j) {
    fm[j] = eq.minus().distance(orbit.values().col(j)) - q;
    fp[j] = eq.plus().distance(orbit.values().col(j)) - q;
  }
  if (fm[0] > 0.0) throw InputError("transitions: left clamp is not in the q-tube of A-");
  if (fp[n] > 0.0 && fm[n] > 0.0)
    throw InputError("transitions: right clamp is in neither q-tube");

  TransitionSequence seq;
  const Grid& grid = orbit.grid();
  int j = 0;
  bool toward_plus = true;
  while (true) {
    const std::vector<double>& target = toward_plus ? fp : fm;
    const std::vector<double>& source = toward_plus ? fm : fp;
    int k = j;
    while (k <= n && target[k] >= 0.0) ++k;
    if (k > n) break;
    if (k == 0) throw InputError("transitions: orbit starts inside both tubes");
    seq.crossings.push_back(interpolate_crossing(grid, k, target));
    // Last exit from the source tube before the entry.
    int e = k - 1;
    while (e >= 0 && source[e] > 0.0) --e;
    if (e >= 0 && e < n) {
      const double t = -source[e] / (source[e + 1] - source[e]);
      seq.exits.push_back(grid.x(e) + t * grid.spacing());
    } else {
      seq.exits.push_back(grid.x(0));
    }
    if (toward_plus) ++seq.count;
    toward_plus = !toward_plus;
    j = k;
  }
  return seq;
}

SpectralInfo linearization_roots(const PotentialSpec& spec, const Vec& well) {
  const int m = spec.dimension();
  if (well.size() != m) throw InputError("linearization_roots: well dimension mismatch");
  const Vec zero = Vec::Zero(m);
  const Gradient g = grad_W(spec, well, zero);
  if (g.wu.lpNorm<Eigen::Infinity>() > 1e-8 || g.wv.lpNorm<Eigen::Infinity>() > 1e-8)
    throw InputError("linearization_roots: (a, 0) is not a critical point of W");
  const HessianBlocks hb = hess_W(spec, well, zero);
  const Mat gyro = hb.uv.transpose() - hb.uv;

  SpectralInfo info;
  if (gyro.lpNorm<Eigen::Infinity>() <= 1e-14 * (1.0 + hb.uv.lpNorm<Eigen::Infinity>())) {
    // mu = lambda^2 solves det(mu^2 I - mu W_vv + W_uu) = 0.
    Mat c = Mat::Zero(2 * m, 2 * m);
    c.topRightCorner(m, m) = Mat::Identity(m, m);
    c.bottomLeftCorner(m, m) = -hb.uu;
    c.bottomRightCorner(m, m) = hb.vv;
    Eigen::EigenSolver<Mat> es(c, false);
    for (const auto& mu : es.eigenvalues()) {
      const std::complex<double> lam = std::sqrt(mu);
      info.roots.push_back(lam);
      info.roots.push_back(-lam);
    }
  } else {
    // lambda^4 x = lambda^2 W_vv x - lambda (M^T - M) x - W_uu x
    Mat c = Mat::Zero(4 * m, 4 * m);
    c.block(0, m, 3 * m, 3 * m) = Mat::Identity(3 * m, 3 * m);
    c.block(3 * m, 0, m, m) = -hb.uu;
    c.block(3 * m, m, m, m) = -gyro;
    c.block(3 * m, 2 * m, m, m) = hb.vv;
    Eigen::EigenSolver<Mat> es(c, false);
    for (const auto& lam : es.eigenvalues()) info.roots.push_back(lam);
  }
  std::sort(info.roots.begin(), info.roots.end(), [](auto a, auto b) {
    return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag();
  });

  double scale = 0.0;
  for (const auto& r : info.roots) scale = std::max(scale, std::abs(r));
  double slowest = std::numeric_limits<double>::infinity();
  for (const auto& r : info.roots)
    if (r.real() > 1e-12 * std::max(scale, 1.0)) slowest = std::min(slowest, r.real());
  if (std::isfinite(slowest)) {
    info.slowest_stable_rate = slowest;
    // Imaginary parts below 1e-7 |lambda| are roundoff around a double root.
    for (const auto& r : info.roots)
      if (r.real() > 0.0 && r.real() <= slowest * (1.0 + 1e-9) && std::abs(r.imag()) > 1e-7 * std::abs(r))
        info.oscillatory = true;
  }

  Mat block(2 * m, 2 * m);
  block << hb.uu, hb.uv.transpose(), hb.uv, hb.vv;
  Eigen::SelfAdjointEigenSolver<Mat> sa(0.5 * (block + block.transpose()), Eigen::EigenvaluesOnly);
  info.nondegenerate = sa.eigenvalues().minCoeff() > 1e-12;
  return info;
}

DecayFit decay_fit(const DiscreteOrbit& orbit, const EquilibriaSpec& eq, Side side,
                   double window_fraction, const TailOptions& opts) {
  if (orbit.dimension() != eq.dimension()) throw InputError("decay_fit: dimension mismatch");
  const NodeRange w = tail_window(orbit, side, window_fraction, opts);
  const WellSet& set = tail_set(eq, side);
  std::vector<double> x, d, dd;
  for (int j = w.begin; j <= w.end; ++j) {
    x.push_back(orbit.grid().x(j));
    d.push_back(set.distance(orbit.values().col(j)));
    dd.push_back(first_diff(orbit, j).norm());
  }
  const double inner = side == Side::Left ? d.back() : d.front();
  if (!(inner > opts.floor))
    throw DegenerateTail("decay_fit: " + to_string(side) + " tail is at the roundoff floor");

  bool envelope = opts.mode == FitMode::Envelope;
  if (opts.mode == FitMode::Auto) envelope = local_maxima(d, opts.floor).size() >= 2;

  const ExponentialFit main = fit_exponential(x, d, side, envelope, opts.floor);
  if (main.points < 2) throw DegenerateTail("decay_fit: too few usable points in the tail window");
  DecayFit fit;
  fit.rate = main.rate;
  fit.amplitude = main.amplitude;
  fit.r_squared = main.r_squared;
  fit.points = main.points;
  fit.envelope = envelope;
  fit.window_begin = x.front();
  fit.window_end = x.back();
  fit.derivative = fit_exponential(x, dd, side, envelope, opts.floor);
  return fit;
}

TailClass classify_tail(const DiscreteOrbit& orbit, const EquilibriaSpec& eq, Side side,
                        const std::optional<Vec>& direction, const TailOptions& opts) {
  const int m = orbit.dimension();
  if (m != eq.dimension()) throw InputError("classify_tail: dimension mismatch");
  if (!direction && m != 1) throw InputError("classify_tail: a projection direction is required for m > 1");
  const Vec dir = direction ? *direction : Vec::Ones(1);
  if (dir.size() != m) throw InputError("classify_tail: direction has the wrong dimension");

  const int n = orbit.intervals();
  const int skip = boundary_skip(orbit, opts);
  const WellSet& set = tail_set(eq, side);
  const int clamp = side == Side::Left ? 0 : n;
  const Vec a = set.points[set.nearest(orbit.values().col(clamp))];

  TailClass out;
  int last_sign = 0;
  const int step = side == Side::Left ? 1 : -1;
  for (int j = side == Side::Left ? skip : n - skip; j >= 0 && j <= n; j += step) {
    const auto u = orbit.values().col(j);
    if (set.distance(u) > eq.q()) break;
    const double p = (u - a).dot(dir);
    if (std::abs(p) <= opts.floor) continue;
    const int s = p > 0.0 ? 1 : -1;
    if (last_sign != 0 && s != last_sign) ++out.sign_changes;
    last_sign = s;
  }
  out.kind = out.sign_changes >= 2 ? TailKind::Oscillatory : TailKind::Monotone;
  return out;
}

HamiltonianStats hamiltonian_stats(const PotentialSpec& spec, const DiscreteOrbit& orbit) {
  const ScalarProfile h = hamiltonian_profile(spec, orbit);
  HamiltonianStats s;
  double sum = 0.0;
  int count = 0;
  for (std::size_t j = 0; j < h.values.size(); ++j) {
    if (h.boundary_affected[j]) continue;
    s.max_abs = std::max(s.max_abs, std::abs(h.values[j]));
    sum += h.values[j];
    ++count;
  }
  if (count == 0) return s;
  s.mean = sum / count;
  double var = 0.0;
  for (std::size_t j = 0; j < h.values.size(); ++j)
    if (!h.boundary_affected[j]) var += (h.values[j] - s.mean) * (h.values[j] - s.mean);
  s.stddev = std::sqrt(var / count);
  return s;
}

EndpointLimits endpoint_limits(const DiscreteOrbit& orbit, const EquilibriaSpec& eq,
                               double window_fraction, const TailOptions& opts) {
  if (orbit.dimension() != eq.dimension()) throw InputError("endpoint_limits: dimension mismatch");
  EndpointLimits out;
  for (Side side : {Side::Left, Side::Right}) {
    const NodeRange w = tail_window(orbit, side, window_fraction, opts);
    const Vec mean = orbit.values().middleCols(w.begin, w.end - w.begin + 1).rowwise().mean();
    const WellSet& set = tail_set(eq, side);
    if (set.distance(mean) > eq.q())
      throw NoLimit("endpoint_limits: " + to_string(side) + " tail average is not within q of its well set");
    const std::size_t id = set.nearest(mean);
    (side == Side::Left ? out.a_minus_id : out.a_plus_id) = id;
    (side == Side::Left ? out.a_minus_hat : out.a_plus_hat) = set.points[id];
  }
  return out;
}

}  // namespace minhet
