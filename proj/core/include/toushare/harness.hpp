#pragma once

// Scenario runner: loads a config + data source, runs the requested storage
// mechanisms over a shared stream of realized days, and emits comparison
// tables and plot data.

#include <cstdint>
#include <string>
#include <vector>

#include "toushare/demand.hpp"
#include "toushare/game.hpp"
#include "toushare/policy.hpp"
#include "toushare/schedule.hpp"

namespace toushare {

enum class Mechanism { no_storage, no_sharing, two_tier_division, sharing, offline_optimal };

std::string to_string(Mechanism m);
Mechanism parse_mechanism(const std::string& name);

// Per-firm lognormal daily energies with a shared multiplicative day factor
// (cross-firm correlation knob) and a per-firm scale jitter (heterogeneity
// knob). Both factors are mean-one, so log_mean/log_sd set the marginals up
// to the extra variance the factors add. The draw is materialized into a
// day-aligned empirical model so solvers and paired simulation see one law.
struct SyntheticSpec {
  int firms = 2;
  std::size_t days = 1000;           // empirical history length
  std::vector<double> log_mean;      // flat-indexed, [0] off peak
  std::vector<double> log_sd;        // same shape
  double day_factor_sd = 0.0;
  double heterogeneity = 0.0;
  std::uint64_t seed = 1;
};

DemandModel synthesize_community(const SyntheticSpec& spec, int trading_periods);

struct Scenario {
  ToUSchedule schedule;
  DemandModel model;
  std::vector<Mechanism> mechanisms;
  std::size_t days = 1000;
  std::uint64_t seed = 1;
  std::size_t samples = 200000;
  EfficiencyPair efficiency;
  std::vector<int> community_sizes;  // sweep; empty => whole community only
  int sweep_repetitions = 30;
  std::string out_dir = "out";
};

// Config JSON: schedule (path or inline), data ({"csv": path} or
// {"synthetic": {...}}), mechanisms, days, seed, samples, efficiency,
// community_sizes, sweep_repetitions, out_dir. Relative paths resolve
// against base_dir.
Scenario load_scenario(const std::string& json_text, const std::string& base_dir);
Scenario load_scenario_file(const std::string& path);

struct MechanismRow {
  Mechanism mechanism = Mechanism::no_storage;
  double capacity_kwh = 0.0;
  double mean_cost_cents = 0.0;  // daily, amortized capacity included
  double cost_se_cents = 0.0;
  double profit_cents = 0.0;  // paired daily saving vs no_storage
  double profit_se_cents = 0.0;
  double saving_fraction = 0.0;
  bool marked = false;  // sharing row with a non-passing alignment verdict
  std::vector<std::string> notes;
};

struct PairDelta {
  Mechanism a = Mechanism::no_storage;
  Mechanism b = Mechanism::no_storage;
  double cost_delta_cents = 0.0;  // mean daily cost(a) - cost(b), paired
  double se_cents = 0.0;
};

struct SweepCell {
  int community_size = 0;
  Mechanism mechanism = Mechanism::no_storage;
  double capacity_mean_kwh = 0.0;
  double capacity_variance = 0.0;
  double profit_mean_cents = 0.0;
  double profit_variance = 0.0;
};

struct ComparisonReport {
  std::vector<MechanismRow> rows;
  std::vector<PairDelta> deltas;
  std::vector<SweepCell> sweep;
  CorrelationResult correlations;  // empty unless day-aligned with >= 2 firms
  std::size_t days = 0;
  std::uint64_t seed = 0;
  std::vector<std::string> notes;
};

// Runs every requested mechanism over one shared realized-day stream, then
// the community-size sweep over seeded subsets of the same days.
ComparisonReport run_scenario(const Scenario& scenario);

// report.json, figure6_capacity.csv, figure6_profit.csv, figure7_costs.csv,
// correlations.csv under out_dir (created if missing).
void emit_plot_data(const ComparisonReport& report, const std::string& out_dir);
std::string report_json(const ComparisonReport& report);

// One independent 2-tier sharing instance per non-off-peak period; capacities
// add across sub-problems. Periods whose spread cannot recover the amortized
// storage price end up with zero capacity.
struct TwoTierDecomposition {
  struct Sub {
    int flat = 1;
    double spread_cents = 0.0;
    double capacity_kwh = 0.0;
  };
  std::vector<Sub> subs;
  double total_capacity_kwh = 0.0;
};

TwoTierDecomposition decompose_two_tier(const ToUSchedule& sched, const DemandModel& model,
                                        const EfficiencyPair& eff, const McOptions& mc = {});

// Certification suite the `validate` command runs: budget balance, welfare
// certificate, price-law conformance, first-order residual, alignment, best
// response for the largest investor, and singleton rationality.
struct CertificationSummary {
  struct Check {
    std::string name;
    bool passed = false;
    std::string detail;
  };
  std::vector<Check> checks;
  bool all_passed() const {
    for (const auto& c : checks)
      if (!c.passed) return false;
    return true;
  }
};

CertificationSummary certify_scenario(const Scenario& scenario);

}  // namespace toushare
