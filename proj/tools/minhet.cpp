// Command-line front end: solve, sweep, pairs and validate on a JSON config.

#include "minhet/errors.hpp"
#include "minhet/run.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

namespace {

struct Options {
  std::string config;
  std::string out;
  int jobs = 1;
  long long seed = -1;
  bool no_svg = false;
};

void add_common(CLI::App* cmd, Options& o, bool outputs) {
  cmd->add_option("config", o.config, "Problem config (JSON)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--seed", o.seed, "Seed for hypothesis sampling and the minimality audit")->check(CLI::NonNegativeNumber);
  if (!outputs) return;
  cmd->add_option("--out", o.out, "Output directory (overrides output.directory)");
  cmd->add_option("--jobs", o.jobs, "Clamp pairs solved in parallel")->check(CLI::PositiveNumber);
  cmd->add_flag("--no-svg", o.no_svg, "Skip the SVG plots");
}

minhet::RunConfig load(const Options& o) {
  minhet::RunConfig c = minhet::load_config(o.config);
  if (!o.out.empty()) c.output.directory = o.out;
  if (o.seed >= 0) c.output.seed = static_cast<std::uint64_t>(o.seed);
  if (o.no_svg) c.output.svg = false;
  return c;
}

void report_run(const minhet::RunOutcome& r) {
  const auto& s = r.summary;
  std::printf("status %s  iterations %d  energy %.12g  |grad| %.3e\n", s["optimizer"]["status"].get<std::string>().c_str(),
              s["optimizer"]["iterations"].get<int>(), s["optimizer"]["final_energy"].get<double>(),
              s["optimizer"]["final_grad_norm"].get<double>());
  if (s["transitions"].contains("count")) std::printf("transitions %d\n", s["transitions"]["count"].get<int>());
  for (const char* side : {"left", "right"}) {
    const auto& t = s["tails"][side];
    std::printf("%s tail %s (%d sign changes)", side, t["classification"].get<std::string>().c_str(),
                t["sign_changes"].get<int>());
    if (t["decay"].contains("rate")) std::printf(", decay rate %.5g", t["decay"]["rate"].get<double>());
    std::printf("\n");
  }
  std::printf("max |H| %.3e  hypotheses %s\n", s["hamiltonian"]["max_abs"].get<double>(),
              s["validation"]["all_passed"].get<bool>() ? "passed" : "FAILED");
}

void report_files(const minhet::RunOutcome& r) {
  for (const auto& f : r.files) std::printf("wrote %s\n", f.c_str());
}

int solve(const Options& o) {
  const minhet::RunConfig c = load(o);
  if (c.clamp == minhet::ClampMode::AllPairs) {
    const auto r = minhet::run_all_pairs(c, o.jobs);
    report_files(r);
    return r.exit_code;
  }
  const auto r = minhet::run(c);
  report_run(r);
  report_files(r);
  return r.exit_code;
}

int sweep(const Options& o) {
  const minhet::RunConfig c = load(o);
  if (!c.sweep) throw minhet::ConfigError("config: sweep block is required for the sweep command");
  const auto r = minhet::run_sweep(c);
  for (const auto& row : r.summary["runs"])
    std::printf("%s = %-10.6g %-18s iterations %-6d energy %.12g  tails %s/%s\n", c.sweep->parameter.c_str(),
                row["value"].get<double>(), row["status"].get<std::string>().c_str(), row["iterations"].get<int>(),
                row["final_energy"].get<double>(), row["left_tail"].get<std::string>().c_str(),
                row["right_tail"].get<std::string>().c_str());
  report_files(r);
  return r.exit_code;
}

int pairs(const Options& o) {
  const minhet::RunConfig c = load(o);
  const auto r = minhet::run_all_pairs(c, o.jobs);
  for (const auto& row : r.summary["pairs"])
    std::printf("#%d  %s -> %s  %s  energy %s\n", row["rank"].get<int>(), row["a_minus"].dump().c_str(),
                row["a_plus"].dump().c_str(), row["status"].get<std::string>().c_str(),
                row.contains("final_energy") ? row["final_energy"].dump().c_str() : "-");
  if (!r.summary["winner"].is_null())
    std::printf("winner %s -> %s%s\n", r.summary["winner"]["a_minus"].dump().c_str(),
                r.summary["winner"]["a_plus"].dump().c_str(), r.summary["unique_winner"].get<bool>() ? "" : " (tie)");
  report_files(r);
  return r.exit_code;
}

int validate(const Options& o) {
  const minhet::RunConfig c = load(o);
  minhet::ValidationOptions vo;
  vo.budget = c.output.validation_samples;
  vo.seed = c.output.seed;
  const auto report = minhet::validate_hypotheses(c.make_potential(), c.make_equilibria(), vo);
  const nlohmann::json j = {{"config", c.to_json()},
                            {"h1", {{"passed", report.h1.passed}, {"detail", report.h1.detail}}},
                            {"h2", {{"passed", report.h2.passed}, {"detail", report.h2.detail}}},
                            {"h3", {{"passed", report.h3.passed}, {"detail", report.h3.detail}}}};
  std::cout << j.dump(2) << "\n";
  return report.all_passed() ? minhet::exit_code::ok : minhet::exit_code::hypothesis;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Minimal heteroclinic orbits of fourth-order variational systems"};
  app.require_subcommand(1);
  Options o;
  auto* solve_cmd = app.add_subcommand("solve", "Solve one problem (all-pairs configs run every clamp pair)");
  auto* sweep_cmd = app.add_subcommand("sweep", "Warm-started parameter sweep");
  auto* pairs_cmd = app.add_subcommand("pairs", "Solve every clamp pair and rank them by energy");
  auto* validate_cmd = app.add_subcommand("validate", "Parse the config and sample hypotheses H1-H3");
  add_common(solve_cmd, o, true);
  add_common(sweep_cmd, o, true);
  add_common(pairs_cmd, o, true);
  add_common(validate_cmd, o, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : minhet::exit_code::config;
  }

  try {
    if (*solve_cmd) return solve(o);
    if (*sweep_cmd) return sweep(o);
    if (*pairs_cmd) return pairs(o);
    return validate(o);
  } catch (const minhet::InputError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return minhet::exit_code::config;
  } catch (const minhet::OutputError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return minhet::exit_code::config;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "internal error: %s\n", e.what());
    return 1;
  }
}
