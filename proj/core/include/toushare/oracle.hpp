#pragma once

// Brute-force references used to certify the analytic solvers: hindsight
// dispatch, exact dynamic programming on small discretized instances, and an
// exhaustive joint-state social optimum. No Monte Carlo anywhere in here;
// probabilities are carried exactly so equivalence checks can use 1e-9.

#include <string>
#include <vector>

#include "toushare/demand.hpp"
#include "toushare/policy.hpp"
#include "toushare/schedule.hpp"

namespace toushare {

// Demand lives on the grid {0, delta, ..., K*delta}. pmf[firm][flat][level]
// is the mass at level*delta, flats 0..p+q (0 = off peak).
class DiscretizedInstance {
 public:
  DiscretizedInstance(ToUSchedule schedule, double delta,
                      std::vector<std::vector<std::vector<double>>> pmf, int capacity_levels);

  const ToUSchedule& schedule() const { return schedule_; }
  double delta() const { return delta_; }
  int capacity_levels() const { return capacity_levels_; }
  int firm_count() const { return static_cast<int>(pmf_.size()); }
  const std::vector<std::vector<double>>& firm_pmf(int firm) const {
    return pmf_[static_cast<std::size_t>(firm)];
  }

  // Collective per-period pmf (levels add across firms).
  std::vector<double> collective_pmf(int flat) const;
  double off_peak_mean_kwh() const;

  DemandModel to_demand_model() const;
  DemandModel to_demand_model(const std::vector<int>& firm_indices) const;

  std::string to_json() const;
  static DiscretizedInstance from_json(const std::string& text);

 private:
  ToUSchedule schedule_;
  double delta_;
  std::vector<std::vector<std::vector<double>>> pmf_;
  int capacity_levels_;
};

struct DpSolution {
  double expected_cost_cents = 0.0;  // at the best capacity, incl. pi_s*C and off-peak demand
  double best_capacity_kwh = 0.0;
  std::vector<double> cost_by_capacity_cents;  // index = capacity level
  // Structure of the optimal policy at the best capacity:
  // actions[k-1][s][y] = discharge level chosen in trading period k.
  std::vector<std::vector<std::vector<int>>> actions;
  std::vector<double> ru_thresholds_kwh;  // implied M_1..M_p
  bool thresholds_consistent = false;     // RU actions fit a threshold, RD actions are greedy
};

// Exact value iteration over (period, collective storage level), capacity
// searched on the instance grid. Ties in the capacity argmin go to the
// smaller C; ties in the discharge argmin go to the larger discharge.
DpSolution dp_optimal_policy(const DiscretizedInstance& instance);

// Expected daily cost of running the collective at a fixed capacity level
// (V_1 + amortized capacity + off-peak demand), in cents.
double dp_expected_cost(const DiscretizedInstance& instance, int capacity_level);

// Exact expected total cost over all state-contingent joint discharge
// policies. With sharing, any firm's storage may serve any demand; without,
// each firm is capped by its own demand. n <= 3 firms.
double exhaustive_social_optimum(const DiscretizedInstance& instance,
                                 const std::vector<int>& capacity_levels, bool sharing_enabled);

// Hindsight-optimal day cost: allocate the deliverable stored energy to
// periods in descending rate order (skipping rates at or below the effective
// floor), buy the rest at period rates, refill at the off-peak rate.
double offline_optimal_cost(const std::vector<double>& demand_by_flat, double capacity_kwh,
                            const ToUSchedule& sched, const EfficiencyPair& eff);
double offline_optimal_cost(const RealizedDay& realized, double capacity_kwh,
                            const ToUSchedule& sched, const EfficiencyPair& eff);

}  // namespace toushare
