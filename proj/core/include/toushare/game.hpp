#pragma once

// Capacity decision game on top of the sharing market: the collective
// capacity root, per-firm equilibrium allocations from band-conditional
// means, alignment verification, and the stability certificates.

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "toushare/demand.hpp"
#include "toushare/policy.hpp"
#include "toushare/schedule.hpp"

namespace toushare {

enum class AlignmentVerdict { pass, inconclusive, fail };
std::string to_string(AlignmentVerdict v);

// Finite-difference slope of a firm's band-conditional demand share between
// two adjacent capacity grid points. Nonnegative slopes everywhere are the
// sufficient condition for the allocation below to be a Nash equilibrium.
struct AlignmentSlope {
  int firm = 0;
  int rd_index = 1;  // ramp-down tier, 1-based
  double r_lo_kwh = 0.0;
  double r_hi_kwh = 0.0;
  double slope = 0.0;
  double std_error = 0.0;
  AlignmentVerdict verdict = AlignmentVerdict::inconclusive;
};

struct AlignmentReport {
  std::vector<AlignmentSlope> slopes;
  AlignmentVerdict overall = AlignmentVerdict::pass;
  std::vector<std::string> notes;  // trimmed grid points, vacuous cases
  bool passed() const { return overall == AlignmentVerdict::pass; }
};

struct EquilibriumResult {
  double collective_capacity_kwh = 0.0;
  std::vector<double> reservations_kwh;  // collective ramp-up floors M*
  std::vector<std::string> firm_ids;
  std::vector<double> allocations_kwh;     // C_i*, same order as firm_ids
  std::vector<double> allocation_se_kwh;   // band-estimator standard errors
  std::vector<double> rho_weights;         // one per ramp-down tier, sum 1
  std::optional<std::pair<double, double>> lambda_weights;  // 3-tier peak-only case
  double renormalization = 1.0;            // capacity / raw allocation sum
  double foc_residual_cents = 0.0;         // storage price minus fresh-sample premium at the root
  double foc_residual_se = 0.0;
  AlignmentReport alignment;
  std::vector<std::string> warnings;
};

// Capacity root for the pooled model. The equilibrium invests exactly the
// collective optimum, so this simply delegates to the standalone solver.
double collective_capacity(const ToUSchedule& sched, const DemandModel& collective,
                           const EfficiencyPair& eff, const McOptions& mc = {},
                           std::vector<double>* reservations_out = nullptr,
                           std::vector<std::string>* warnings_out = nullptr);

// Full equilibrium: capacity root on the summed demand paths, then per-firm
// allocations as the rho-weighted conditional means of each firm's share of
// the collective sum at the root. Includes the alignment report and the
// first-order residual measured on an independent sample set.
EquilibriumResult solve_equilibrium(const ToUSchedule& sched, const DemandModel& firms,
                                    const EfficiencyPair& eff, const McOptions& mc = {},
                                    const BandOptions& band = {});

// Slope check for each firm and ramp-down tier over a grid of capacity
// candidates (stored kWh). An empty grid picks interior quantiles of each
// conditioning sum. Slopes below -2 SE fail, slopes within 2 SE of zero are
// inconclusive, never silently passed.
AlignmentReport check_alignment(const ToUSchedule& sched, const DemandModel& firms,
                                const EfficiencyPair& eff,
                                std::vector<double> capacity_grid_kwh = {},
                                const McOptions& mc = {}, const BandOptions& band = {});

struct DeviationPoint {
  double multiplier = 1.0;
  double capacity_kwh = 0.0;
  double mean_cost_cents = 0.0;  // expected daily cost incl. amortized capacity
  double diff_cents = 0.0;       // deviation minus equilibrium, paired days
  double diff_se = 0.0;
  bool weakly_costlier = true;  // diff >= -3 SE
};

struct BestResponseCertificate {
  int firm = 0;
  double equilibrium_cost_cents = 0.0;
  double foc_residual_cents = 0.0;
  double foc_residual_se = 0.0;
  bool foc_ok = true;
  std::vector<DeviationPoint> deviations;
  bool passed = false;
};

// Simulates the sharing market over `days` realized days with everyone else
// held at the equilibrium and the given firm's capacity scaled through
// {0.5, 0.8, 0.9, 1.1, 1.2, 1.5}. All deviations share one day stream, so
// differences are paired. Also restates the first-order residual test.
BestResponseCertificate verify_best_response(int firm, const EquilibriumResult& eq,
                                             const ToUSchedule& sched, const DemandModel& firms,
                                             const EfficiencyPair& eff, std::size_t days,
                                             std::uint64_t seed, const McOptions& mc = {});

struct CoalitionCheck {
  std::vector<int> members;
  double grand_cost_cents = 0.0;     // members' summed daily cost inside the pool
  double defect_cost_cents = 0.0;    // the same members running their own pool
  double defect_capacity_kwh = 0.0;  // capacity the defecting pool would build
  double diff_se = 0.0;
  bool stable = true;  // defect cost >= grand cost - 3 SE
};

struct CoalitionCertificate {
  std::vector<CoalitionCheck> checks;
  bool stable = false;
};

// For each block of the partition, compares the members' summed cost at the
// grand equilibrium against the block seceding to operate a merged pool of
// its own (capacity solved on the block's demand alone, same realized days).
// Stable when no block improves beyond 3 SE.
CoalitionCertificate coalition_stability(const std::vector<std::vector<int>>& partition,
                                         const EquilibriumResult& eq, const ToUSchedule& sched,
                                         const DemandModel& firms, const EfficiencyPair& eff,
                                         std::size_t days, std::uint64_t seed,
                                         const McOptions& mc = {});

std::string equilibrium_report_json(const EquilibriumResult& eq);

}  // namespace toushare
