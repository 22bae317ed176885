#pragma once

// Optimal (M,C) arbitrage control for one decision-maker (a firm or the
// pooled collective) against a single-peaked schedule.
//
// All storage math runs in "stored-equivalent" units: a demand of y kWh
// consumes z = y/eta_out stored kWh, and the break-even value of a stored
// kWh is the effective floor pi_l/(eta_in*eta_out). With unit efficiencies
// this is the identity fold, so perfect-efficiency results are reproduced
// bit for bit on shared samples.

#include <optional>
#include <string>
#include <vector>

#include "toushare/demand.hpp"
#include "toushare/schedule.hpp"
#include "toushare/stats.hpp"

namespace toushare {

struct EfficiencyPair {
  double eta_in = 1.0;
  double eta_out = 1.0;

  bool valid() const {
    return eta_in > 0.0 && eta_in <= 1.0 && eta_out > 0.0 && eta_out <= 1.0;
  }
  bool is_unit() const { return eta_in == 1.0 && eta_out == 1.0; }
  // Value floor of a stored kWh, in the same unit as `off_peak`.
  double effective_floor(double off_peak) const { return off_peak / (eta_in * eta_out); }
};

// Peak-period arbitrage must beat the round trip: pi_peak*eta_out - pi_l/eta_in > 0.
bool arbitrage_viable(const ToUSchedule& sched, const EfficiencyPair& eff);

struct ReservationPolicy {
  double capacity_kwh = 0.0;
  std::vector<double> reservations_kwh;  // M_1..M_p, one per ramp-up period
  EfficiencyPair efficiency;

  // Reservation for ramp-up period j (1-based), clamped into [0, C];
  // ramp-down periods and j > p have no floor.
  double floor_for(int flat, int ramp_up_count) const;

  // Invariant check: C >= M_1 >= ... >= M_p >= 0, all finite.
  bool well_formed() const;

  std::string to_json() const;
  static ReservationPolicy from_json(const std::string& text);
};

// One day of (M,C) operation for a single decision-maker.
struct TrajectoryStep {
  int flat = 0;
  double demand_kwh = 0.0;
  double delivered_kwh = 0.0;   // served from storage (load side)
  double purchased_kwh = 0.0;   // bought from the grid at the period rate
  double stored_after_kwh = 0.0;
};

// Walks trading periods 1..p+q: serve demand from storage down to the
// period floor, buy any remainder at the period rate. `floors_kwh` has one
// entry per trading period (reservations for ramp-ups, 0 for ramp-downs).
std::vector<TrajectoryStep> reservation_trajectory(const std::vector<double>& trading_demand_kwh,
                                                   double start_stored_kwh,
                                                   const std::vector<double>& floors_kwh,
                                                   const EfficiencyPair& eff);

struct DayLedger {
  std::vector<TrajectoryStep> steps;      // trading periods, in order
  double off_peak_demand_kwh = 0.0;
  double off_peak_demand_cents = 0.0;
  double purchase_cents = 0.0;            // trading-period grid buys
  double discharged_kwh = 0.0;            // stored units drawn down today
  double recharge_kwh = 0.0;              // grid-side refill = discharged/eta_in
  double recharge_cents = 0.0;
  double total_cents = 0.0;
};

DayLedger simulate_standalone_day(const ReservationPolicy& policy, const ToUSchedule& sched,
                                  const std::vector<double>& demand_by_flat);
DayLedger simulate_standalone_day(const ReservationPolicy& policy, const ToUSchedule& sched,
                                  const RealizedDay& realized);

// Piecewise-constant curve v -> average first-purchase premium when trading
// starts from stored level v. Built once per window from a sample matrix,
// then queried in O(log n).
class PremiumCurve {
 public:
  PremiumCurve() = default;
  PremiumCurve(std::vector<double> xs, std::vector<double> mean_level,
               std::vector<double> sq_level, std::size_t samples);

  // Expected premium in tenths of a cent per stored kWh (eta_out factored out).
  double value(double v) const;
  Estimate estimate(double v) const;  // std_error NaN unless built with second moments
  double max_support() const { return xs_.empty() ? 0.0 : xs_.back(); }
  bool empty() const { return xs_.empty(); }

 private:
  std::vector<double> xs_;
  std::vector<double> mean_;  // level on [xs_[i], xs_[i+1])
  std::vector<double> sq_;
  std::size_t samples_ = 0;
};

struct ReservationSolve {
  std::vector<double> reservations_kwh;
  std::vector<std::string> warnings;
};

struct CapacitySolve {
  double capacity_kwh = 0.0;
  std::vector<std::string> warnings;
};

struct ThreeTierClosedForm {
  double reservation_kwh = 0.0;
  double capacity_kwh = 0.0;
};

// Monte-Carlo / exact evaluator for the fixed-point conditions. Holds a
// stored-equivalent demand matrix (or, for fully discrete models, exact
// per-period pmfs) for the one decision-maker it was built for.
class ArbitrageEngine {
 public:
  ArbitrageEngine(const ToUSchedule& sched, const DemandModel& collective_model,
                  EfficiencyPair eff, McOptions mc = {});
  // Pre-drawn energy demands (kWh, one column per trading period).
  ArbitrageEngine(const ToUSchedule& sched, SampleMatrix energy_demand_kwh, EfficiencyPair eff);

  const ToUSchedule& schedule() const { return sched_; }
  const EfficiencyPair& efficiency() const { return eff_; }
  bool exact_mode() const { return exact_; }
  std::size_t samples() const { return z_.rows; }
  double effective_floor_tenths() const { return floor_tenths_; }

  // Premium curve over trading periods from_flat+1..p+q given ramp-up floors
  // M_1..M_p (entries beyond from_flat are the ones that matter).
  PremiumCurve premium_curve(int from_flat, const std::vector<double>& reservations_kwh,
                             bool with_std_error = false) const;

  // Exact counterpart on fully discrete models (unit efficiency only).
  double exact_premium(int from_flat, const std::vector<double>& reservations_kwh,
                       double state_kwh) const;

  // Average premium at state v: MC curve or exact sweep, whichever mode applies.
  double premium(int from_flat, const std::vector<double>& reservations_kwh,
                 double state_kwh) const;

  // Pr(first grid purchase in periods from_flat+1..p+q happens at k), one
  // entry per k, with binomial standard errors. Sum <= 1; the residual is
  // "never buys".
  std::vector<Estimate> first_purchase_profile(int from_flat,
                                               const std::vector<double>& reservations_kwh,
                                               double state_kwh) const;

  // Marginal revenue of reserving at level M in ramp-up period j, cents/kWh:
  // sum_{k>j} (pi_k*eta_out - pi_l/eta_in) P_j^k.
  double marginal_revenue(int j, double reservation_kwh,
                          const std::vector<double>& downstream_kwh) const;

  // Backward fixed-point solve for M*_1..M*_p (empty when p = 0).
  ReservationSolve solve_reservations() const;
  // Root of the amortized-cost balance given solved reservations.
  CapacitySolve solve_capacity(const std::vector<double>& reservations_kwh) const;

  // Expected daily policy cost in cents, exact mode only (discrete demands,
  // independent periods).
  double exact_policy_cost(const ReservationPolicy& policy, double off_peak_mean_kwh) const;

  // High quantile of the total stored-equivalent trading demand (capacity bracket).
  double stored_demand_quantile(double prob) const;

 private:
  struct Pmf {
    std::vector<double> values;  // stored-equivalent, nonnegative
    std::vector<double> probs;
  };

  void fold_matrix(SampleMatrix energy);
  std::vector<double> window_floors(int from_flat,
                                    const std::vector<double>& reservations_kwh) const;
  double exact_grid_limit() const;  // one past the largest reachable grid state

  ToUSchedule sched_;
  EfficiencyPair eff_;
  SampleMatrix z_{0, 0};          // stored-equivalent demand, row = sample
  double floor_tenths_ = 0.0;     // pi_l/(eta_in*eta_out), tenths of a cent
  bool exact_ = false;
  std::vector<Pmf> pmfs_;         // per trading period, exact mode only
};

Estimate first_purchase_prob(const ToUSchedule& sched, const DemandModel& model,
                             const EfficiencyPair& eff, int j, int k,
                             const std::vector<double>& reservations_kwh, double state_kwh,
                             const McOptions& mc = {});

// 3-tier special case (one ramp-up, one ramp-down): reservation and capacity
// as explicit fractiles of the demand law.
ThreeTierClosedForm closed_form_three_tier(const ToUSchedule& sched, const DemandModel& model,
                                           const McOptions& mc = {});

}  // namespace toushare
