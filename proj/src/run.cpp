#include "minhet/run.hpp"

#include "minhet/errors.hpp"
#include "svg.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

namespace minhet {

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

// ---------------------------------------------------------------------------
// Config reading

int line_of(std::string_view text, std::size_t byte) {
  byte = std::min(byte, text.size());
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + byte, '\n'));
}

class Block {
 public:
  Block(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail("must be an object");
  }

  void allow(std::initializer_list<const char*> keys, const std::string& context = "") const {
    allow(std::vector<const char*>(keys), context);
  }
  void allow(const std::vector<const char*>& keys, const std::string& context = "") const {
    std::set<std::string> ok(keys.begin(), keys.end());
    for (const auto& [k, _] : j_.items())
      if (!ok.count(k)) fail("unknown key \"" + k + "\"" + context);
  }
  bool has(const char* key) const { return j_.contains(key); }
  const json& raw(const char* key) const { return j_.at(key); }
  Block block(const char* key) const { return Block(j_.at(key), at(key)); }

  double number(const char* key, std::optional<double> def = std::nullopt) const {
    if (!has(key)) return required(key, def);
    const json& v = j_.at(key);
    if (!v.is_number()) fail_key(key, "must be a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) fail_key(key, "must be finite");
    return d;
  }
  long long integer(const char* key, std::optional<long long> def = std::nullopt) const {
    if (!has(key)) return required(key, def);
    const json& v = j_.at(key);
    if (!v.is_number_integer()) fail_key(key, "must be an integer");
    return v.get<long long>();
  }
  bool boolean(const char* key, bool def) const {
    if (!has(key)) return def;
    const json& v = j_.at(key);
    if (!v.is_boolean()) fail_key(key, "must be true or false");
    return v.get<bool>();
  }
  std::string string(const char* key, std::optional<std::string> def = std::nullopt) const {
    if (!has(key)) return required(key, def);
    const json& v = j_.at(key);
    if (!v.is_string()) fail_key(key, "must be a string");
    return v.get<std::string>();
  }

  std::string at(const char* key) const { return path_.empty() ? key : path_ + "." + key; }
  [[noreturn]] void fail(const std::string& msg) const {
    throw ConfigError("config" + (path_.empty() ? std::string() : " " + path_) + ": " + msg);
  }
  [[noreturn]] void fail_key(const char* key, const std::string& msg) const {
    throw ConfigError("config " + at(key) + ": " + msg);
  }

 private:
  template <class T>
  T required(const char* key, const std::optional<T>& def) const {
    if (!def) fail_key(key, "is required");
    return *def;
  }

  const json& j_;
  std::string path_;
};

[[noreturn]] void semantic(const std::string& msg) { throw ConfigError("config: " + msg); }

Vec read_point(const json& v, const std::string& where) {
  if (v.is_number()) return Vec::Constant(1, v.get<double>());
  if (!v.is_array() || v.empty()) semantic(where + " must be a number or a nonempty array of numbers");
  Vec p(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number()) semantic(where + " must contain only numbers");
    p[static_cast<Eigen::Index>(i)] = v[i].get<double>();
  }
  if (!p.allFinite()) semantic(where + " must be finite");
  return p;
}

std::vector<Vec> read_points(const json& v, const std::string& where) {
  if (!v.is_array() || v.empty()) semantic(where + " must be a nonempty list of points");
  std::vector<Vec> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(read_point(v[i], where + "[" + std::to_string(i) + "]"));
  for (const auto& p : out)
    if (p.size() != out.front().size()) semantic(where + " mixes points of different dimension");
  return out;
}

json point_json(const Vec& p) {
  json a = json::array();
  for (Eigen::Index i = 0; i < p.size(); ++i) a.push_back(p[i]);
  return a;
}

json points_json(const std::vector<Vec>& ps) {
  json a = json::array();
  for (const auto& p : ps) a.push_back(point_json(p));
  return a;
}

Family parse_family(const std::string& s) {
  if (s == "multiwell") return Family::Multiwell;
  if (s == "efk") return Family::EFK;
  if (s == "generalized_efk") return Family::GeneralizedEFK;
  semantic("potential.family must be one of multiwell, efk, generalized_efk (got \"" + s + "\")");
}

std::string family_key(Family f) {
  switch (f) {
    case Family::Multiwell: return "multiwell";
    case Family::EFK: return "efk";
    case Family::GeneralizedEFK: return "generalized_efk";
    case Family::Custom: break;
  }
  return "custom";
}

FForm parse_form(const std::string& s) {
  if (s == "scalar_quartic") return FForm::ScalarQuartic;
  if (s == "product") return FForm::Product;
  if (s == "harmonic") return FForm::Harmonic;
  semantic("potential.form must be one of scalar_quartic, product, harmonic (got \"" + s + "\")");
}

std::string form_key(FForm f) {
  switch (f) {
    case FForm::ScalarQuartic: return "scalar_quartic";
    case FForm::Product: return "product";
    case FForm::Harmonic: return "harmonic";
  }
  return "";
}

// Rewraps library precondition failures as config errors.
template <class F>
auto checked(const std::string& where, F&& f) {
  try {
    return f();
  } catch (const ConfigError&) {
    throw;
  } catch (const InputError& e) {
    semantic(where + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Serialization helpers

json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json roots_json(const std::vector<std::complex<double>>& roots) {
  json a = json::array();
  for (const auto& r : roots) a.push_back({num(r.real()), num(r.imag())});
  return a;
}

json check_json(const HypothesisCheck& c) {
  return {{"passed", c.passed}, {"samples", c.samples}, {"min_value", num(c.min_value)}, {"detail", c.detail}};
}

json validation_json(const ValidationReport& r) {
  return {{"all_passed", r.all_passed()}, {"h1", check_json(r.h1)}, {"h2", check_json(r.h2)}, {"h3", check_json(r.h3)}};
}

std::string orbit_csv(const PotentialSpec& spec, const DiscreteOrbit& orbit) {
  std::ostringstream s;
  write_orbit_csv(s, spec, orbit);
  return s.str();
}

std::string orbit_svg(const DiscreteOrbit& orbit) {
  const int n = orbit.intervals();
  std::vector<double> x(n + 1);
  for (int j = 0; j <= n; ++j) x[j] = orbit.grid().x(j);
  std::vector<svg::Series> series;
  for (int i = 0; i < orbit.dimension(); ++i) {
    svg::Series s{"u_" + std::to_string(i + 1), std::vector<double>(n + 1)};
    for (int j = 0; j <= n; ++j) s.y[j] = orbit.values()(i, j);
    series.push_back(std::move(s));
  }
  return svg::line_plot(x, series, "Computed orbit", "x", "u");
}

std::string hamiltonian_svg(const PotentialSpec& spec, const DiscreteOrbit& orbit) {
  const ScalarProfile h = hamiltonian_profile(spec, orbit);
  std::vector<double> x;
  svg::Series s{"H", {}};
  for (int j = 0; j <= orbit.intervals(); ++j) {
    if (h.boundary_affected[j]) continue;
    x.push_back(orbit.grid().x(j));
    s.y.push_back(h.values[j]);
  }
  return svg::line_plot(x, {s}, "Hamiltonian (interior nodes)", "x", "H");
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Files written together; on failure everything already renamed into place
// is removed again.
class Emitter {
 public:
  explicit Emitter(fs::path dir) : dir_(std::move(dir)) {}
  void add(const std::string& name, std::string data) { pending_.emplace_back(name, std::move(data)); }
  std::vector<std::string> commit() {
    std::error_code ec;
    const bool existed = fs::exists(dir_, ec);
    fs::create_directories(dir_, ec);
    if (ec || !fs::is_directory(dir_))
      throw OutputError("cannot create output directory " + dir_.string() + (ec ? ": " + ec.message() : ""));
    std::vector<std::string> done;
    try {
      for (const auto& [name, data] : pending_) {
        write_file_atomic(dir_ / name, data);
        done.push_back((dir_ / name).string());
      }
    } catch (...) {
      for (const auto& f : done) fs::remove(f, ec);
      if (!existed) fs::remove(dir_, ec);
      throw;
    }
    return done;
  }

 private:
  fs::path dir_;
  std::vector<std::pair<std::string, std::string>> pending_;
};

struct PairRun {
  Vec a_minus;
  Vec a_plus;
  OptimizerResult result;
  json summary;
  int exit_code = exit_code::ok;
};

// Non-convergence outranks a hypothesis flag.
int combine_exit(int a, int b) {
  if (a == exit_code::not_converged || b == exit_code::not_converged) return exit_code::not_converged;
  return std::max(a, b);
}

int exit_for(const OptimizerResult& r, const ValidationReport& v) {
  if (r.status != OptimizerStatus::Converged) return exit_code::not_converged;
  if (!v.all_passed()) return exit_code::hypothesis;
  return exit_code::ok;
}

ValidationReport validate(const RunConfig& c, const PotentialSpec& spec, const EquilibriaSpec& eq) {
  ValidationOptions opts;
  opts.budget = c.output.validation_samples;
  opts.seed = c.output.seed;
  return validate_hypotheses(spec, eq, opts);
}

PairRun solve_pair(const RunConfig& c, const PotentialSpec& spec, const EquilibriaSpec& eq,
                   const ValidationReport& validation, const Vec& a_minus, const Vec& a_plus,
                   const DiscreteOrbit* warm = nullptr) {
  const auto t0 = std::chrono::steady_clock::now();
  const Grid grid(c.L, c.N);
  const DiscreteOrbit guess = initial_guess(grid, eq, a_minus, a_plus, c.core_halfwidth);
  const double e0 = energy(spec, guess).total;
  PairRun p{a_minus, a_plus, minimize(spec, warm ? *warm : guess, c.optimizer), {}, exit_code::ok};
  const double t_min = seconds_since(t0);
  p.summary = summarize(c, spec, eq, validation, p.result, e0);
  p.exit_code = exit_for(p.result, validation);
  p.summary["exit_code"] = p.exit_code;
  p.summary["timings"] = {{"minimize_s", t_min}, {"total_s", seconds_since(t0)}};
  return p;
}

void stage_artifacts(Emitter& em, const RunConfig& c, const PotentialSpec& spec, const PairRun& p) {
  em.add("orbit.csv", orbit_csv(spec, p.result.orbit));
  em.add("summary.json", dump(p.summary));
  if (c.output.svg) {
    em.add("orbit.svg", orbit_svg(p.result.orbit));
    em.add("hamiltonian.svg", hamiltonian_svg(spec, p.result.orbit));
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// RunConfig

PotentialSpec RunConfig::make_potential() const {
  switch (potential.family) {
    case Family::Multiwell: return PotentialSpec::multiwell(potential.f);
    case Family::EFK: return PotentialSpec::efk(potential.f, potential.beta);
    case Family::GeneralizedEFK: return PotentialSpec::generalized_efk(potential.f, potential.coupling);
    case Family::Custom: break;
  }
  throw InputError("custom potentials cannot be declared in a config");
}

EquilibriaSpec RunConfig::make_equilibria() const { return EquilibriaSpec(a_minus_set, a_plus_set, q); }

std::vector<std::pair<Vec, Vec>> RunConfig::clamp_pairs() const {
  switch (clamp) {
    case ClampMode::Explicit: return {{clamp_minus, clamp_plus}};
    case ClampMode::Closest: return {make_equilibria().closest_pair()};
    case ClampMode::AllPairs: break;
  }
  std::vector<std::pair<Vec, Vec>> out;
  for (const auto& m : a_minus_set)
    for (const auto& p : a_plus_set) out.emplace_back(m, p);
  return out;
}

json RunConfig::to_json() const {
  json pot = {{"family", family_key(potential.family)}, {"form", form_key(potential.f.form)}};
  if (potential.f.form != FForm::ScalarQuartic) {
    pot["wells"] = points_json(potential.f.wells);
    pot["scale"] = potential.f.scale;
  }
  if (potential.family == Family::EFK) pot["beta"] = potential.beta;
  if (potential.family == Family::GeneralizedEFK) {
    pot["g0"] = potential.coupling.g0;
    pot["g1"] = potential.coupling.g1;
  }
  json clamp_j;
  if (clamp == ClampMode::Closest) clamp_j = "closest";
  else if (clamp == ClampMode::AllPairs) clamp_j = "all-pairs";
  else clamp_j = {{"a_minus", point_json(clamp_minus)}, {"a_plus", point_json(clamp_plus)}};

  json j = {
      {"schema_version", kConfigSchemaVersion},
      {"potential", pot},
      {"equilibria", {{"A_minus", points_json(a_minus_set)}, {"A_plus", points_json(a_plus_set)}, {"q", q}}},
      {"domain", {{"L", L}, {"N", N}, {"core_halfwidth", core_halfwidth}, {"clamp", clamp_j}}},
      {"optimizer",
       {{"max_iterations", optimizer.max_iterations},
        {"grad_tol", optimizer.grad_tol},
        {"memory", optimizer.memory},
        {"c1", optimizer.c1},
        {"backtrack", optimizer.backtrack},
        {"max_backtracks", optimizer.max_backtracks},
        {"step_init", optimizer.step_init}}},
      {"output",
       {{"directory", output.directory},
        {"svg", output.svg},
        {"seed", output.seed},
        {"audit_trials", output.audit_trials},
        {"audit_amplitude", output.audit_amplitude},
        {"validation_samples", output.validation_samples},
        {"pair_cap", output.pair_cap}}},
  };
  if (sweep) j["sweep"] = {{"parameter", sweep->parameter}, {"values", sweep->values}};
  return j;
}

RunConfig parse_config(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end(), nullptr, true, false);
  } catch (const json::parse_error& e) {
    const int line = line_of(text, e.byte == 0 ? 0 : e.byte - 1);
    std::string msg = e.what();
    if (auto pos = msg.find("syntax error"); pos != std::string::npos) msg = msg.substr(pos);
    throw ConfigError("config: line " + std::to_string(line) + ": " + msg, line);
  }

  RunConfig c;
  const Block top(doc, "");
  top.allow({"schema_version", "potential", "equilibria", "domain", "optimizer", "sweep", "output"});
  if (top.has("schema_version") && top.string("schema_version") != kConfigSchemaVersion)
    top.fail_key("schema_version", std::string("must be \"") + kConfigSchemaVersion + "\"");

  // equilibria first: it fixes the dimension.
  const Block eqb = top.block("equilibria");
  eqb.allow({"A_minus", "A_plus", "q"});
  if (!eqb.has("A_minus")) eqb.fail_key("A_minus", "is required");
  if (!eqb.has("A_plus")) eqb.fail_key("A_plus", "is required");
  c.a_minus_set = read_points(eqb.raw("A_minus"), "equilibria.A_minus");
  c.a_plus_set = read_points(eqb.raw("A_plus"), "equilibria.A_plus");
  c.q = eqb.number("q");
  const EquilibriaSpec eq = checked("equilibria", [&] { return c.make_equilibria(); });
  const int m = eq.dimension();

  const Block pb = top.block("potential");
  c.potential.family = parse_family(pb.string("family"));
  c.potential.f.form = parse_form(pb.string("form", "scalar_quartic"));
  std::vector<const char*> keys = {"family", "form"};
  if (c.potential.f.form != FForm::ScalarQuartic) {
    keys.push_back("wells");
    keys.push_back("scale");
    if (pb.has("wells")) {
      c.potential.f.wells = read_points(pb.raw("wells"), "potential.wells");
    } else {
      c.potential.f.wells = c.a_minus_set;
      c.potential.f.wells.insert(c.potential.f.wells.end(), c.a_plus_set.begin(), c.a_plus_set.end());
    }
    c.potential.f.scale = pb.number("scale", 1.0);
  }
  if (c.potential.family == Family::EFK) {
    keys.push_back("beta");
    c.potential.beta = pb.number("beta");
  }
  if (c.potential.family == Family::GeneralizedEFK) {
    keys.push_back("g0");
    keys.push_back("g1");
    c.potential.coupling.g0 = pb.number("g0", 1.0);
    c.potential.coupling.g1 = pb.number("g1", 0.0);
  }
  pb.allow(keys, " for family " + family_key(c.potential.family) + " with form " + form_key(c.potential.f.form));
  const PotentialSpec spec = checked("potential", [&] { return c.make_potential(); });
  if (spec.dimension() != m)
    semantic("potential dimension " + std::to_string(spec.dimension()) + " does not match equilibria dimension " +
             std::to_string(m));

  const Block db = top.block("domain");
  db.allow({"L", "N", "core_halfwidth", "clamp"});
  c.L = db.number("L");
  const long long n = db.integer("N");
  if (n < 8 || n > 10'000'000) db.fail_key("N", "must lie in [8, 10000000]");
  c.N = static_cast<int>(n);
  c.core_halfwidth = db.number("core_halfwidth", 1.0);
  checked("domain", [&] { return Grid(c.L, c.N); });
  if (!(c.core_halfwidth > 0.0 && c.core_halfwidth < c.L)) db.fail_key("core_halfwidth", "must satisfy 0 < core_halfwidth < L");
  if (db.has("clamp")) {
    const json& cl = db.raw("clamp");
    if (cl.is_string()) {
      const std::string s = cl.get<std::string>();
      if (s == "closest") c.clamp = ClampMode::Closest;
      else if (s == "all-pairs") c.clamp = ClampMode::AllPairs;
      else db.fail_key("clamp", "must be \"closest\", \"all-pairs\" or {\"a_minus\", \"a_plus\"}");
    } else {
      const Block cb = db.block("clamp");
      cb.allow({"a_minus", "a_plus"});
      if (!cb.has("a_minus") || !cb.has("a_plus")) cb.fail("needs both a_minus and a_plus");
      c.clamp = ClampMode::Explicit;
      c.clamp_minus = read_point(cb.raw("a_minus"), "domain.clamp.a_minus");
      c.clamp_plus = read_point(cb.raw("a_plus"), "domain.clamp.a_plus");
      if (c.clamp_minus.size() != m || c.clamp_plus.size() != m) semantic("domain.clamp points must have dimension " + std::to_string(m));
      if (eq.minus().distance(c.clamp_minus) > c.q) semantic("domain.clamp.a_minus must lie within q of A_minus");
      if (eq.plus().distance(c.clamp_plus) > c.q) semantic("domain.clamp.a_plus must lie within q of A_plus");
    }
  }

  if (top.has("optimizer")) {
    const Block ob = top.block("optimizer");
    ob.allow({"max_iterations", "grad_tol", "memory", "c1", "backtrack", "max_backtracks", "step_init"});
    OptimizerConfig& o = c.optimizer;
    o.max_iterations = static_cast<int>(ob.integer("max_iterations", o.max_iterations));
    o.grad_tol = ob.number("grad_tol", o.grad_tol);
    o.memory = static_cast<int>(ob.integer("memory", o.memory));
    o.c1 = ob.number("c1", o.c1);
    o.backtrack = ob.number("backtrack", o.backtrack);
    o.max_backtracks = static_cast<int>(ob.integer("max_backtracks", o.max_backtracks));
    o.step_init = ob.number("step_init", o.step_init);
  }
  checked("optimizer", [&] {
    c.optimizer.validate();
    return 0;
  });

  if (top.has("sweep")) {
    const Block sb = top.block("sweep");
    sb.allow({"parameter", "values"});
    SweepConfig s;
    s.parameter = sb.string("parameter");
    if (!sb.has("values") || !sb.raw("values").is_array() || sb.raw("values").empty())
      sb.fail_key("values", "must be a nonempty list of numbers");
    for (const auto& v : sb.raw("values")) {
      if (!v.is_number() || !std::isfinite(v.get<double>())) sb.fail_key("values", "must contain only finite numbers");
      s.values.push_back(v.get<double>());
    }
    const bool up = s.values.size() < 2 || s.values[1] > s.values[0];
    for (std::size_t i = 1; i < s.values.size(); ++i)
      if (up ? !(s.values[i] > s.values[i - 1]) : !(s.values[i] < s.values[i - 1]))
        sb.fail_key("values", "must be strictly monotone");
    for (double v : s.values) checked("sweep", [&] { return spec.with_parameter(s.parameter, v); });
    c.sweep = std::move(s);
  }

  if (top.has("output")) {
    const Block ob = top.block("output");
    ob.allow({"directory", "svg", "seed", "audit_trials", "audit_amplitude", "validation_samples", "pair_cap"});
    OutputConfig& o = c.output;
    o.directory = ob.string("directory", o.directory);
    if (o.directory.empty()) ob.fail_key("directory", "must not be empty");
    o.svg = ob.boolean("svg", o.svg);
    const long long seed = ob.integer("seed", 1);
    if (seed < 0) ob.fail_key("seed", "must be nonnegative");
    o.seed = static_cast<std::uint64_t>(seed);
    o.audit_trials = static_cast<int>(ob.integer("audit_trials", o.audit_trials));
    if (o.audit_trials < 0) ob.fail_key("audit_trials", "must be nonnegative");
    o.audit_amplitude = ob.number("audit_amplitude", o.audit_amplitude);
    if (!(o.audit_amplitude > 0.0)) ob.fail_key("audit_amplitude", "must be positive");
    o.validation_samples = static_cast<int>(ob.integer("validation_samples", o.validation_samples));
    if (o.validation_samples < 1) ob.fail_key("validation_samples", "must be at least 1");
    o.pair_cap = static_cast<int>(ob.integer("pair_cap", o.pair_cap));
    if (o.pair_cap < 1) ob.fail_key("pair_cap", "must be at least 1");
  }

  if (c.clamp == ClampMode::AllPairs) {
    const std::size_t pairs = c.a_minus_set.size() * c.a_plus_set.size();
    if (pairs > static_cast<std::size_t>(c.output.pair_cap))
      semantic("all-pairs needs " + std::to_string(pairs) + " runs, above output.pair_cap = " +
               std::to_string(c.output.pair_cap));
  }
  for (const auto& [am, ap] : c.clamp_pairs())
    checked("domain.clamp", [&] { return initial_guess(Grid(c.L, c.N), eq, am, ap, c.core_halfwidth); });
  return c;
}

RunConfig load_config(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("config: cannot read " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return parse_config(s.str());
}

// ---------------------------------------------------------------------------
// Summary

json summarize(const RunConfig& config, const PotentialSpec& spec, const EquilibriaSpec& eq,
               const ValidationReport& validation, const OptimizerResult& result, double initial_guess_energy) {
  const DiscreteOrbit& orbit = result.orbit;
  const EnergyBreakdown e = energy(spec, orbit);
  json warnings = json::array();

  json s;
  s["schema_version"] = kSummarySchemaVersion;
  s["config"] = config.to_json();
  s["potential"] = {{"family", to_string(spec.family())}, {"dimension", spec.dimension()}};
  if (spec.family() == Family::EFK) s["potential"]["beta"] = spec.beta();
  s["clamp"] = {{"a_minus", point_json(orbit.a_minus())}, {"a_plus", point_json(orbit.a_plus())}};
  s["validation"] = validation_json(validation);
  s["optimizer"] = {{"status", to_string(result.status)},
                    {"iterations", result.iterations},
                    {"initial_energy", num(result.initial_energy)},
                    {"final_energy", num(result.final_energy)},
                    {"final_grad_norm", num(result.final_grad_norm)},
                    {"grad_tol", num(result.grad_tol)}};
  s["energy"] = {{"total", num(e.total)},
                 {"bending", num(e.bending)},
                 {"potential", num(e.potential_part)},
                 {"initial_guess", num(initial_guess_energy)}};

  try {
    const TransitionSequence t = transitions(orbit, eq);
    json cr = json::array(), ex = json::array();
    for (double x : t.crossings) cr.push_back(num(x));
    for (double x : t.exits) ex.push_back(num(x));
    s["transitions"] = {{"count", t.count}, {"crossings", cr}, {"exits", ex},
                        {"tube_reentries", std::max<int>(0, static_cast<int>(t.crossings.size()) - 1)}};
  } catch (const std::exception& ex) {
    s["transitions"] = {{"error", ex.what()}};
  }

  // Spectrum at the clamped wells; it also picks the decay estimator window.
  std::optional<SpectralInfo> spectra[2];
  json spectral;
  const Vec clamps[2] = {orbit.a_minus(), orbit.a_plus()};
  const char* well_keys[2] = {"a_minus", "a_plus"};
  for (int k = 0; k < 2; ++k) {
    try {
      spectra[k] = linearization_roots(spec, clamps[k]);
      spectral[well_keys[k]] = {{"well", point_json(clamps[k])},
                               {"roots", roots_json(spectra[k]->roots)},
                               {"slowest_stable_rate", num(spectra[k]->slowest_stable_rate)},
                               {"oscillatory", spectra[k]->oscillatory},
                               {"nondegenerate", spectra[k]->nondegenerate}};
      if (!spectra[k]->nondegenerate)
        warnings.push_back(std::string("well ") + well_keys[k] +
                           " is degenerate; decay rates are reported without a spectral comparison");
    } catch (const std::exception& ex) {
      spectral[well_keys[k]] = {{"well", point_json(clamps[k])}, {"error", ex.what()}};
    }
  }
  s["spectral"] = spectral;

  const int m = orbit.dimension();
  const Vec jump = orbit.a_plus() - orbit.a_minus();
  const std::optional<Vec> direction =
      m == 1 ? std::nullopt : std::optional<Vec>(jump.norm() > 0 ? Vec(jump / jump.norm()) : Vec(Vec::Unit(m, 0)));
  json tails;
  for (int k = 0; k < 2; ++k) {
    const Side side = k == 0 ? Side::Left : Side::Right;
    json t;
    const TailClass tc = classify_tail(orbit, eq, side, direction);
    t["classification"] = to_string(tc.kind);
    t["sign_changes"] = tc.sign_changes;
    const bool osc = spectra[k] && spectra[k]->oscillatory;
    const double fraction = osc ? 0.75 : 0.25;
    try {
      const DecayFit f = decay_fit(orbit, eq, side, fraction);
      json d = {{"rate", num(f.rate)},
                {"amplitude", num(f.amplitude)},
                {"r_squared", num(f.r_squared)},
                {"window", {num(f.window_begin), num(f.window_end)}},
                {"window_fraction", fraction},
                {"envelope", f.envelope},
                {"points", f.points},
                {"derivative_rate", num(f.derivative.rate)},
                {"derivative_r_squared", num(f.derivative.r_squared)}};
      if (spectra[k] && spectra[k]->nondegenerate && spectra[k]->slowest_stable_rate > 0.0) {
        const double rel = std::abs(f.rate - spectra[k]->slowest_stable_rate) / spectra[k]->slowest_stable_rate;
        d["relative_rate_error"] = num(rel);
        if (f.r_squared > 0.99 && rel > 0.15)
          warnings.push_back(to_string(side) + " decay rate differs from the linearized rate by " +
                             std::to_string(rel * 100.0) + "%");
      }
      t["decay"] = d;
    } catch (const std::exception& ex) {
      t["decay"] = {{"error", ex.what()}};
    }
    tails[to_string(side)] = t;
  }
  s["tails"] = tails;

  const HamiltonianStats hs = hamiltonian_stats(spec, orbit);
  s["hamiltonian"] = {{"max_abs", num(hs.max_abs)}, {"mean", num(hs.mean)}, {"stddev", num(hs.stddev)}};
  if (spec.has_hessian()) s["el_residual_max"] = num(el_residual_max(el_residual(spec, orbit)));

  try {
    const EndpointLimits lim = endpoint_limits(orbit, eq);
    s["endpoint_limits"] = {{"a_minus_hat", point_json(lim.a_minus_hat)},
                            {"a_plus_hat", point_json(lim.a_plus_hat)},
                            {"a_minus_id", lim.a_minus_id},
                            {"a_plus_id", lim.a_plus_id}};
  } catch (const std::exception& ex) {
    s["endpoint_limits"] = {{"error", ex.what()}};
  }

  if (config.output.audit_trials > 0) {
    const AuditReport a =
        local_minimality_audit(spec, orbit, config.output.audit_trials, config.output.audit_amplitude, config.output.seed);
    s["audit"] = {{"trials", a.trials},
                  {"amplitude", config.output.audit_amplitude},
                  {"min_delta", num(a.min_delta)},
                  {"fraction_nonnegative", num(a.fraction_nonnegative)}};
  }
  s["warnings"] = warnings;
  return s;
}

// ---------------------------------------------------------------------------
// Runs

void write_file_atomic(const fs::path& path, std::string_view data) {
  fs::path tmp = path;
  tmp += ".part";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw OutputError("cannot write " + path.string());
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    out.flush();
    if (!out) {
      std::error_code ec;
      fs::remove(tmp, ec);
      throw OutputError("cannot write " + path.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw OutputError("cannot move " + tmp.string() + " into place");
  }
}

RunOutcome run(const RunConfig& config, bool write) {
  if (config.clamp == ClampMode::AllPairs && config.clamp_pairs().size() > 1)
    throw InputError("run: config asks for all clamp pairs; use run_all_pairs");
  const auto t0 = std::chrono::steady_clock::now();
  const PotentialSpec spec = config.make_potential();
  const EquilibriaSpec eq = config.make_equilibria();
  const ValidationReport validation = validate(config, spec, eq);
  const double t_val = seconds_since(t0);
  const auto [am, ap] = config.clamp_pairs().front();
  PairRun p = solve_pair(config, spec, eq, validation, am, ap);
  p.summary["timings"]["validation_s"] = t_val;
  p.summary["timings"]["total_s"] = seconds_since(t0);

  RunOutcome out{p.exit_code, p.summary, std::move(p.result), {}};
  if (write) {
    Emitter em(config.output.directory);
    em.add("orbit.csv", orbit_csv(spec, out.result->orbit));
    em.add("summary.json", dump(out.summary));
    if (config.output.svg) {
      em.add("orbit.svg", orbit_svg(out.result->orbit));
      em.add("hamiltonian.svg", hamiltonian_svg(spec, out.result->orbit));
    }
    out.files = em.commit();
  }
  return out;
}

RunOutcome run_all_pairs(const RunConfig& config, int jobs, bool write) {
  if (jobs < 1) throw InputError("run_all_pairs: jobs must be at least 1");
  const auto pairs = config.clamp_pairs();
  if (pairs.size() > static_cast<std::size_t>(config.output.pair_cap))
    throw ConfigError("config: " + std::to_string(pairs.size()) + " clamp pairs exceed pair_cap " +
                      std::to_string(config.output.pair_cap));
  const auto t0 = std::chrono::steady_clock::now();
  const PotentialSpec spec = config.make_potential();
  const EquilibriaSpec eq = config.make_equilibria();
  const ValidationReport validation = validate(config, spec, eq);

  std::vector<std::optional<PairRun>> runs(pairs.size());
  std::vector<std::string> errors(pairs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < pairs.size();) {
      try {
        runs[i] = solve_pair(config, spec, eq, validation, pairs[i].first, pairs[i].second);
      } catch (const std::exception& ex) {
        errors[i] = ex.what();
      }
    }
  };
  const int nthreads = std::min<int>(jobs, static_cast<int>(pairs.size()));
  if (nthreads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  const auto id_in = [](const std::vector<Vec>& set, const Vec& p) {
    for (std::size_t i = 0; i < set.size(); ++i)
      if (set[i] == p) return static_cast<int>(i);
    return -1;
  };
  // Converged runs first by energy, then the rest; ties keep pair order.
  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), 0);
  auto key = [&](std::size_t i) {
    const bool ok = runs[i] && runs[i]->result.status == OptimizerStatus::Converged;
    const double e = runs[i] ? runs[i]->result.final_energy : std::numeric_limits<double>::infinity();
    return std::make_pair(ok ? 0 : 1, e);
  };
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return key(a) < key(b); });

  const bool single = pairs.size() == 1;
  json table = json::array();
  int code = exit_code::ok;
  for (std::size_t r = 0; r < order.size(); ++r) {
    const std::size_t i = order[r];
    char dir[48];
    std::snprintf(dir, sizeof dir, "pair_%02d_%02d", id_in(config.a_minus_set, pairs[i].first),
                  id_in(config.a_plus_set, pairs[i].second));
    json row = {{"rank", r + 1},
                {"a_minus", point_json(pairs[i].first)},
                {"a_plus", point_json(pairs[i].second)},
                {"a_minus_id", id_in(config.a_minus_set, pairs[i].first)},
                {"a_plus_id", id_in(config.a_plus_set, pairs[i].second)},
                {"directory", single ? "." : dir}};
    if (runs[i]) {
      row["status"] = to_string(runs[i]->result.status);
      row["iterations"] = runs[i]->result.iterations;
      row["final_energy"] = num(runs[i]->result.final_energy);
      row["exit_code"] = runs[i]->exit_code;
      code = combine_exit(code, runs[i]->exit_code);
    } else {
      row["status"] = "Error";
      row["error"] = errors[i];
      row["exit_code"] = exit_code::not_converged;
      code = exit_code::not_converged;
    }
    table.push_back(row);
  }

  json pj = {{"schema_version", kSummarySchemaVersion}, {"pairs", table}};
  const std::size_t best = order.front();
  const bool have_winner = runs[best] && runs[best]->result.status == OptimizerStatus::Converged;
  if (have_winner) {
    pj["winner"] = table.front();
    bool unique = true;
    double gap = std::numeric_limits<double>::infinity();
    if (order.size() > 1 && runs[order[1]] && runs[order[1]]->result.status == OptimizerStatus::Converged) {
      const double e0 = runs[best]->result.final_energy, e1 = runs[order[1]]->result.final_energy;
      gap = e1 - e0;
      unique = gap > 1e-8 * std::max(1.0, std::abs(e0));
    }
    pj["unique_winner"] = unique;
    pj["energy_gap"] = num(gap);
  } else {
    pj["winner"] = nullptr;
    pj["unique_winner"] = false;
    pj["energy_gap"] = nullptr;
  }
  pj["timings"] = {{"total_s", seconds_since(t0)}};

  RunOutcome out;
  out.exit_code = code;
  out.summary = pj;
  if (runs[best]) out.result = runs[best]->result;
  if (write) {
    const fs::path root = config.output.directory;
    Emitter top(root);
    std::vector<Emitter> subs;
    for (std::size_t r = 0; r < order.size(); ++r) {
      const std::size_t i = order[r];
      if (!runs[i]) continue;
      const fs::path d = single ? root : root / table[r]["directory"].get<std::string>();
      Emitter& em = single ? top : subs.emplace_back(d);
      stage_artifacts(em, config, spec, *runs[i]);
    }
    top.add("pairs.json", dump(pj));
    try {
      for (auto& em : subs) {
        auto f = em.commit();
        out.files.insert(out.files.end(), f.begin(), f.end());
      }
      auto f = top.commit();
      out.files.insert(out.files.end(), f.begin(), f.end());
    } catch (...) {
      std::error_code ec;
      for (const auto& f : out.files) fs::remove(f, ec);
      throw;
    }
  }
  return out;
}

RunOutcome run_sweep(const RunConfig& config, bool write) {
  if (!config.sweep) throw InputError("run_sweep: config has no sweep block");
  if (config.clamp == ClampMode::AllPairs && config.clamp_pairs().size() > 1)
    throw InputError("run_sweep: sweeps need a single clamp pair");
  const auto t0 = std::chrono::steady_clock::now();
  const PotentialSpec base_spec = config.make_potential();
  const EquilibriaSpec eq = config.make_equilibria();
  const auto [am, ap] = config.clamp_pairs().front();

  std::vector<PairRun> runs;
  std::vector<PotentialSpec> specs;
  std::optional<DiscreteOrbit> warm;
  int code = exit_code::ok;
  json table = json::array();
  for (std::size_t i = 0; i < config.sweep->values.size(); ++i) {
    const double value = config.sweep->values[i];
    specs.push_back(base_spec.with_parameter(config.sweep->parameter, value));
    const ValidationReport v = validate(config, specs.back(), eq);
    runs.push_back(solve_pair(config, specs.back(), eq, v, am, ap, warm ? &*warm : nullptr));
    PairRun& p = runs.back();
    p.summary["sweep_point"] = {{"parameter", config.sweep->parameter}, {"value", value}, {"index", i}};
    if (p.result.status == OptimizerStatus::Converged) warm = p.result.orbit;
    else warm.reset();

    char dir[32];
    std::snprintf(dir, sizeof dir, "sweep_%03zu", i);
    json row = {{"index", i},
                {"value", value},
                {"directory", dir},
                {"status", to_string(p.result.status)},
                {"iterations", p.result.iterations},
                {"final_energy", num(p.result.final_energy)},
                {"exit_code", p.exit_code},
                {"left_tail", p.summary["tails"]["left"]["classification"]},
                {"right_tail", p.summary["tails"]["right"]["classification"]},
                {"sign_changes_left", p.summary["tails"]["left"]["sign_changes"]},
                {"oscillatory_spectrum", p.summary["spectral"]["a_minus"].value("oscillatory", false)}};
    table.push_back(row);
    code = combine_exit(code, p.exit_code);
  }
  json sj = {{"schema_version", kSummarySchemaVersion},
             {"parameter", config.sweep->parameter},
             {"runs", table},
             {"timings", {{"total_s", seconds_since(t0)}}}};

  RunOutcome out;
  out.exit_code = code;
  out.summary = sj;
  out.result = runs.back().result;
  if (write) {
    const fs::path root = config.output.directory;
    std::vector<Emitter> subs;
    for (std::size_t i = 0; i < runs.size(); ++i)
      stage_artifacts(subs.emplace_back(root / table[i]["directory"].get<std::string>()), config, specs[i], runs[i]);
    Emitter top(root);
    top.add("sweep.json", dump(sj));
    try {
      for (auto& em : subs) {
        auto f = em.commit();
        out.files.insert(out.files.end(), f.begin(), f.end());
      }
      auto f = top.commit();
      out.files.insert(out.files.end(), f.begin(), f.end());
    } catch (...) {
      std::error_code ec;
      for (const auto& f : out.files) fs::remove(f, ec);
      throw;
    }
  }
  return out;
}

}  // namespace minhet
