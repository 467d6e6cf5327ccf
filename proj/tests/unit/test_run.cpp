#include "helpers.hpp"
#include "minhet/run.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace testing;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

const char* kMinimal = R"({
  "potential": {"family": "efk", "beta": 3},
  "equilibria": {"A_minus": [-1], "A_plus": [1], "q": 0.5},
  "domain": {"L": 20, "N": 4000}
})";

std::string with(const std::string& replace_from, const std::string& replace_to, std::string text = kMinimal) {
  const auto pos = text.find(replace_from);
  REQUIRE(pos != std::string::npos);
  text.replace(pos, replace_from.size(), replace_to);
  return text;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("minhet_unit_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string config_error(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("minimal config fills and echoes defaults") {
  const RunConfig c = parse_config(kMinimal);
  CHECK(c.potential.family == Family::EFK);
  CHECK(c.potential.beta == 3.0);
  CHECK(c.q == 0.5);
  CHECK(c.N == 4000);
  CHECK(c.core_halfwidth == 1.0);
  CHECK(c.clamp == ClampMode::Closest);
  CHECK(c.optimizer.max_iterations == 20000);
  CHECK(c.output.seed == 1u);
  const json echo = c.to_json();
  CHECK(echo["optimizer"]["memory"] == 10);
  CHECK(echo["output"]["pair_cap"] == 16);
  CHECK(echo["domain"]["clamp"] == "closest");
  CHECK(echo["schema_version"] == kConfigSchemaVersion);
  // round trip
  CHECK(parse_config(echo.dump()).to_json() == echo);
}

TEST_CASE("semantic errors name the violated invariant") {
  CHECK(config_error(with("\"q\": 0.5", "\"q\": 1.2")).find("d(A-, A+)/2") != std::string::npos);
  CHECK(config_error(with("\"beta\": 3", "\"beta\": -3")).find("beta > 0") != std::string::npos);
  CHECK(config_error(with("\"N\": 4000", "\"N\": 4")).find("N") != std::string::npos);
  CHECK(config_error(with("\"N\": 4000", "\"N\": 4000, \"core_halfwidth\": 30")).find("core_halfwidth") !=
        std::string::npos);
  CHECK(config_error(with("\"beta\": 3", "\"beta\": 3, \"g0\": 1")).find("unknown key \"g0\"") != std::string::npos);
  CHECK(config_error(with("\"domain\"", "\"colour\": 1, \"domain\"")).find("unknown key \"colour\"") !=
        std::string::npos);
  CHECK(config_error(with("\"N\": 4000", "\"N\": 4000.5")).find("integer") != std::string::npos);
  CHECK(config_error(with("\"A_plus\": [1]", "\"A_plus\": [[1, 0]]")).find("dimension") != std::string::npos);
  CHECK(config_error(with("\"N\": 4000", "\"N\": 4000, \"clamp\": {\"a_minus\": 0, \"a_plus\": 1}"))
            .find("a_minus") != std::string::npos);
}

TEST_CASE("syntax errors carry a line number") {
  const std::string broken = "{\n  \"potential\": {\"family\": \"efk\", \"beta\": 3}\n  \"equilibria\": {}\n}";
  try {
    parse_config(broken);
    FAIL("expected a syntax error");
  } catch (const ConfigError& e) {
    CHECK(e.line() == 3);
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
}

TEST_CASE("sweep blocks") {
  const RunConfig c = parse_config(
      with("\"domain\"", "\"sweep\": {\"parameter\": \"beta\", \"values\": [4, 3, 2.9, 2.83, 2.8, 2, 1]}, \"domain\""));
  REQUIRE(c.sweep);
  CHECK(c.sweep->values.size() == 7u);
  CHECK(c.sweep->values[3] == 2.83);
  CHECK(config_error(with("\"domain\"", "\"sweep\": {\"parameter\": \"beta\", \"values\": [1, 2, 2]}, \"domain\""))
            .find("monotone") != std::string::npos);
  CHECK(config_error(with("\"domain\"", "\"sweep\": {\"parameter\": \"g1\", \"values\": [1]}, \"domain\"")) != "");
  CHECK(config_error(with("\"domain\"", "\"sweep\": {\"parameter\": \"beta\", \"values\": [1, -1]}, \"domain\"")) != "");
}

TEST_CASE("all-pairs clamps respect the pair cap") {
  const std::string many = R"({
    "potential": {"family": "efk", "form": "product", "beta": 1, "wells": [-3, -2, -1, 1, 2, 3]},
    "equilibria": {"A_minus": [-3, -2, -1], "A_plus": [1, 2, 3], "q": 0.4},
    "domain": {"L": 20, "N": 400, "clamp": "all-pairs"},
    "output": {"pair_cap": 8}
  })";
  CHECK(config_error(many).find("pair_cap") != std::string::npos);
  const RunConfig ok = parse_config(with("\"pair_cap\": 8", "\"pair_cap\": 9", many));
  CHECK(ok.clamp_pairs().size() == 9u);
}

TEST_CASE("golden run writes its artifacts and is reproducible") {
  RunConfig c = parse_config(with("\"N\": 4000", "\"N\": 4000}, \"optimizer\": {\"grad_tol\": 2e-9"));
  const fs::path dir = scratch("golden");
  c.output.directory = dir.string();
  const RunOutcome r = run(c);
  CHECK(r.exit_code == exit_code::ok);
  for (const char* f : {"orbit.csv", "summary.json", "orbit.svg", "hamiltonian.svg"}) CHECK(fs::exists(dir / f));
  const json s = json::parse(slurp(dir / "summary.json"));
  CHECK(s["schema_version"] == kSummarySchemaVersion);
  CHECK(s["optimizer"]["status"] == "Converged");
  CHECK(s["transitions"]["count"] == 1);
  CHECK(s["tails"]["left"]["classification"] == "Monotone");
  CHECK(s["tails"]["right"]["classification"] == "Monotone");
  CHECK(s["hamiltonian"]["max_abs"].get<double>() <= 1e-3);
  CHECK(s["endpoint_limits"]["a_plus_hat"][0] == 1.0);
  CHECK(s.contains("timings"));

  c.output.directory = scratch("golden_again").string();
  run(c);
  json a = json::parse(slurp(dir / "summary.json")), b = json::parse(slurp(fs::path(c.output.directory) / "summary.json"));
  a.erase("timings");
  b.erase("timings");
  a["config"]["output"].erase("directory");
  b["config"]["output"].erase("directory");
  CHECK(a.dump() == b.dump());
  CHECK(slurp(dir / "orbit.csv") == slurp(fs::path(c.output.directory) / "orbit.csv"));
}

TEST_CASE("beta = 1 run reports oscillatory tails") {
  RunConfig c = parse_config(with("\"beta\": 3", "\"beta\": 1"));
  c.optimizer.grad_tol = 2e-9;
  c.N = 2000;
  const RunOutcome r = run(c, false);
  CHECK(r.exit_code == exit_code::ok);
  CHECK(r.summary["tails"]["left"]["classification"] == "Oscillatory");
  CHECK(r.summary["tails"]["right"]["classification"] == "Oscillatory");
  CHECK(r.summary["tails"]["left"]["decay"]["envelope"] == true);
}

TEST_CASE("exit codes for non-convergence and hypothesis failures") {
  RunConfig c = parse_config(kMinimal);
  c.N = 1000;
  c.optimizer.max_iterations = 1;
  c.optimizer.grad_tol = 1e-12;
  CHECK(run(c, false).exit_code == exit_code::not_converged);

  // a declared well that is not a zero of W fails H1
  RunConfig h = parse_config(R"({
    "potential": {"family": "efk", "beta": 3},
    "equilibria": {"A_minus": [-1], "A_plus": [0.8], "q": 0.5},
    "domain": {"L": 20, "N": 1000},
    "optimizer": {"grad_tol": 1e-8}
  })");
  const RunOutcome hr = run(h, false);
  CHECK(hr.summary["validation"]["all_passed"] == false);
  CHECK(hr.exit_code == (hr.summary["optimizer"]["status"] == "Converged" ? exit_code::hypothesis : exit_code::not_converged));
}

TEST_CASE("unwritable output directory leaves nothing behind") {
  const fs::path base = scratch("blocked");
  fs::create_directories(base);
  std::ofstream(base / "file") << "x";
  RunConfig c = parse_config(kMinimal);
  c.N = 400;
  c.output.directory = (base / "file" / "out").string();
  CHECK_THROWS_AS(run(c), OutputError);
  CHECK(fs::is_regular_file(base / "file"));
  int entries = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(base)) ++entries;
  CHECK(entries == 1);
}

TEST_CASE("all-pairs ranking on the triple well") {
  RunConfig c = parse_config(R"({
    "potential": {"family": "efk", "form": "product", "wells": [-1, 0.9, 1.1], "beta": 1},
    "equilibria": {"A_minus": [-1], "A_plus": [0.9, 1.1], "q": 0.5},
    "domain": {"L": 40, "N": 4000, "clamp": "all-pairs"},
    "optimizer": {"grad_tol": 1e-9}
  })");
  const fs::path dir = scratch("pairs");
  c.output.directory = dir.string();
  const RunOutcome r = run_all_pairs(c, 2);
  CHECK(r.exit_code == exit_code::ok);
  const json p = json::parse(slurp(dir / "pairs.json"));
  REQUIRE(p["pairs"].size() == 2u);
  CHECK(p["pairs"][0]["final_energy"].get<double>() < p["pairs"][1]["final_energy"].get<double>());
  CHECK(p["unique_winner"] == true);
  CHECK(p["winner"]["a_plus"] == p["pairs"][0]["a_plus"]);
  for (const auto& row : p["pairs"]) CHECK(fs::exists(dir / row["directory"].get<std::string>() / "summary.json"));

  // serial and parallel rankings agree
  const RunOutcome serial = run_all_pairs(c, 1, false);
  CHECK(serial.summary["pairs"] == r.summary["pairs"]);
}

TEST_CASE("a single-pair config routed to run_all_pairs matches run") {
  RunConfig c = parse_config(kMinimal);
  c.N = 1000;
  c.optimizer.grad_tol = 1e-9;
  const RunOutcome a = run(c, false);
  const RunOutcome b = run_all_pairs(c, 1, false);
  REQUIRE(b.result);
  CHECK(b.result->final_energy == a.result->final_energy);
  CHECK(b.result->orbit.values() == a.result->orbit.values());
  CHECK(b.summary["pairs"].size() == 1u);
}

TEST_CASE("sweep runs warm-start and write one directory per value") {
  RunConfig c = parse_config(
      with("\"domain\"", "\"sweep\": {\"parameter\": \"beta\", \"values\": [3, 2, 1]}, \"domain\""));
  c.N = 1000;
  c.optimizer.grad_tol = 1e-9;
  c.output.audit_trials = 0;
  const fs::path dir = scratch("sweep");
  c.output.directory = dir.string();
  const RunOutcome r = run_sweep(c);
  CHECK(r.exit_code == exit_code::ok);
  const json s = json::parse(slurp(dir / "sweep.json"));
  REQUIRE(s["runs"].size() == 3u);
  CHECK(s["runs"][0]["left_tail"] == "Monotone");
  CHECK(s["runs"][2]["left_tail"] == "Oscillatory");
  for (const auto& row : s["runs"]) CHECK(fs::exists(dir / row["directory"].get<std::string>() / "orbit.csv"));
}

TEST_CASE("summary energy equals the trapezoid sum of the CSV") {
  RunConfig c = parse_config(kMinimal);
  c.N = 1000;
  c.optimizer.grad_tol = 1e-9;
  const fs::path dir = scratch("csv");
  c.output.directory = dir.string();
  c.output.svg = false;
  const RunOutcome r = run(c);
  CHECK_FALSE(fs::exists(dir / "orbit.svg"));
  std::istringstream in(slurp(dir / "orbit.csv"));
  std::string line;
  std::getline(in, line);
  std::vector<std::array<double, 4>> rows;
  while (std::getline(in, line)) {
    std::array<double, 4> row{};
    std::istringstream cells(line);
    std::string cell;
    for (int k = 0; k < 4 && std::getline(cells, cell, ','); ++k) row[k] = std::stod(cell);
    rows.push_back(row);
  }
  const double h = rows[1][0] - rows[0][0];
  double total = 0.0;
  for (std::size_t j = 0; j < rows.size(); ++j) {
    const auto [x, u, du, ddu] = rows[j];
    const double w = (j == 0 || j + 1 == rows.size()) ? 0.5 * h : h;
    total += w * (0.5 * ddu * ddu + 0.25 * (u * u - 1) * (u * u - 1) + 1.5 * du * du);
  }
  const double e = r.summary["optimizer"]["final_energy"].get<double>();
  CHECK(std::abs(total - e) / e < 1e-10);
}
