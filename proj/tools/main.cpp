// Command-line front end: solve policies/equilibria, run mechanism
// comparisons, or execute the certification suite against a scenario config.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "toushare/harness.hpp"
#include "toushare/market.hpp"

namespace {

struct Overrides {
  std::string config;
  std::string data;
  std::string out;
  std::string mechanisms;
  std::uint64_t seed = 0;
  std::size_t days = 0;
  std::size_t samples = 0;
  double eta_in = 0.0;
  double eta_out = 0.0;
};

void add_common_flags(CLI::App* cmd, Overrides& ov) {
  cmd->add_option("--config", ov.config, "scenario JSON")->required();
  cmd->add_option("--data", ov.data, "meter CSV overriding the scenario data source");
  cmd->add_option("--out", ov.out, "output directory override");
  cmd->add_option("--seed", ov.seed, "seed override");
  cmd->add_option("--days", ov.days, "simulated days override");
  cmd->add_option("--samples", ov.samples, "solver sample count override");
  cmd->add_option("--mechanisms", ov.mechanisms, "comma-separated mechanism list override");
  cmd->add_option("--eta-in", ov.eta_in, "charge efficiency override");
  cmd->add_option("--eta-out", ov.eta_out, "discharge efficiency override");
}

toushare::Scenario load_with_overrides(const Overrides& ov) {
  toushare::Scenario sc = toushare::load_scenario_file(ov.config);
  if (!ov.data.empty()) {
    auto profiles = toushare::ingest_load_csv(ov.data, sc.schedule);
    sc.model = toushare::DemandModel(std::move(profiles), sc.schedule.trading_periods());
  }
  if (!ov.out.empty()) sc.out_dir = ov.out;
  if (ov.seed != 0) sc.seed = ov.seed;
  if (ov.days != 0) sc.days = ov.days;
  if (ov.samples != 0) sc.samples = ov.samples;
  if (!ov.mechanisms.empty()) {
    sc.mechanisms.clear();
    std::string rest = ov.mechanisms;
    while (!rest.empty()) {
      const auto comma = rest.find(',');
      sc.mechanisms.push_back(toushare::parse_mechanism(rest.substr(0, comma)));
      rest = comma == std::string::npos ? "" : rest.substr(comma + 1);
    }
  }
  if (ov.eta_in != 0.0) sc.efficiency.eta_in = ov.eta_in;
  if (ov.eta_out != 0.0) sc.efficiency.eta_out = ov.eta_out;
  if (!sc.efficiency.valid()) throw std::invalid_argument("efficiency must be in (0, 1]");
  return sc;
}

int run_solve(const Overrides& ov) {
  const auto sc = load_with_overrides(ov);
  const toushare::McOptions mc{sc.samples, sc.seed};
  const auto eq = toushare::solve_equilibrium(sc.schedule, sc.model, sc.efficiency, mc);
  const std::string json = toushare::equilibrium_report_json(eq);
  std::printf("%s\n", json.c_str());
  if (!ov.out.empty()) {
    std::filesystem::create_directories(sc.out_dir);
    std::ofstream f(std::filesystem::path(sc.out_dir) / "equilibrium.json");
    f << json << "\n";
  }
  return 0;
}

int run_simulate(const Overrides& ov) {
  const auto sc = load_with_overrides(ov);
  const auto report = toushare::run_scenario(sc);
  toushare::emit_plot_data(report, sc.out_dir);
  std::printf("%-18s %12s %14s %14s %8s\n", "mechanism", "capacity_kwh", "cost_cents",
              "profit_cents", "saving");
  for (const auto& r : report.rows)
    std::printf("%-18s %12.3f %14.3f %14.3f %7.2f%%%s\n", toushare::to_string(r.mechanism).c_str(),
                r.capacity_kwh, r.mean_cost_cents, r.profit_cents, 100.0 * r.saving_fraction,
                r.marked ? "  [marked]" : "");
  for (const auto& note : report.notes) std::printf("note: %s\n", note.c_str());
  std::printf("wrote %s\n", sc.out_dir.c_str());
  return 0;
}

int run_validate(const Overrides& ov) {
  const auto sc = load_with_overrides(ov);
  const auto summary = toushare::certify_scenario(sc);
  for (const auto& c : summary.checks)
    std::printf("%-24s %s  %s\n", c.name.c_str(), c.passed ? "PASS" : "FAIL", c.detail.c_str());
  return summary.all_passed() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Time-of-use storage sharing simulator"};
  app.require_subcommand(1);

  Overrides ov;
  auto* solve = app.add_subcommand("solve", "solve the sharing equilibrium and print it");
  auto* simulate = app.add_subcommand("simulate", "run the mechanism comparison and emit plots");
  auto* validate = app.add_subcommand("validate", "run the certification suite");
  add_common_flags(solve, ov);
  add_common_flags(simulate, ov);
  add_common_flags(validate, ov);

  CLI11_PARSE(app, argc, argv);

  try {
    if (solve->parsed()) return run_solve(ov);
    if (simulate->parsed()) return run_simulate(ov);
    if (validate->parsed()) return run_validate(ov);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 2;
}
