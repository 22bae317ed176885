#pragma once

// Aggregator-side sharing market: pooled dispatch under the collective (M,C)
// policy, per-period clearing prices, and per-firm settlement. The price in a
// deficit period is the grid rate itself, so the aggregator's books balance
// structurally; surplus prices come from forward first-purchase premiums.

#include <string>
#include <vector>

#include "toushare/demand.hpp"
#include "toushare/policy.hpp"
#include "toushare/schedule.hpp"

namespace toushare {

struct FirmSettlement {
  std::string firm_id;
  std::vector<double> net_procurement_kwh;  // per trading period; negative = supplies
  double trading_cash_cents = 0.0;          // sum of price * net procurement
  double recharge_cents = 0.0;
  double off_peak_cents = 0.0;
  double total_cents = 0.0;
};

struct MarketOutcome {
  std::vector<double> prices_cents;        // per trading period
  std::vector<bool> deficit;               // pricing branch taken per period
  std::vector<TrajectoryStep> collective;  // pooled dispatch
  std::vector<FirmSettlement> firms;
  std::vector<double> capacities_kwh;      // as settled
  double aggregator_net_cents = 0.0;       // collected minus paid to the grid
  double clamp_overshoot_cents = 0.0;      // worst raw excess past [pi_l, pi_tau]
};

class SharingMarket {
 public:
  SharingMarket(const ToUSchedule& sched, const DemandModel& collective_model,
                EfficiencyPair eff, McOptions mc = {});

  const ToUSchedule& schedule() const { return sched_; }
  const EfficiencyPair& efficiency() const { return eff_; }
  const std::vector<double>& collective_reservations() const { return reservations_; }
  const std::vector<std::string>& warnings() const { return warnings_; }

  // Posted price for period `flat` given the realized collective demand and
  // the pre-dispatch stored level. Grid rate exactly when the pool cannot
  // cover the demand; otherwise the forward premium from the post-dispatch
  // state, clamped into [pi_l, pi_flat].
  double clearing_price_cents(int flat, double collective_demand_kwh, double stored_before_kwh,
                              bool* deficit_out = nullptr, double* raw_overshoot = nullptr) const;

  // One day of pooled operation and settlement. capacities_kwh: one entry per
  // firm in the realized day, summing to the pool capacity.
  MarketOutcome settle_day(const RealizedDay& realized,
                           const std::vector<double>& capacities_kwh) const;

 private:
  ToUSchedule sched_;
  EfficiencyPair eff_;
  std::vector<double> reservations_;
  std::vector<PremiumCurve> forward_;  // [flat-1]: premium over flats flat+1..p+q
  std::vector<std::string> warnings_;
};

// One-shot price without building a market (test/CLI convenience).
double clearing_price(const ToUSchedule& sched, const DemandModel& collective_model,
                      const EfficiencyPair& eff, int flat, double collective_demand_kwh,
                      double stored_before_kwh, const std::vector<double>& reservations_kwh,
                      const McOptions& mc = {});

// Collective partial-peak reservation for the 3-tier ramp-up mechanism:
// the (pi_2 - pi_1)/(pi_2 - pi_l) fractile of peak demand.
double rus_reservation(const ToUSchedule& sched, const DemandModel& collective_model,
                       const McOptions& mc = {});

struct WelfareCertificate {
  bool passed = false;
  double settled_total_cents = 0.0;
  double standalone_total_cents = 0.0;
  double difference_cents = 0.0;
};

// Settled firm totals must reproduce the collective standalone cost on the
// same realization, period by period in aggregate.
WelfareCertificate social_cost_certificate(const SharingMarket& market,
                                           const RealizedDay& realized,
                                           const MarketOutcome& outcome);

// CSV export: one row per (day, firm) and one per day.
void write_settlement_csv(const std::string& firms_path, const std::string& days_path,
                          const std::vector<MarketOutcome>& outcomes);

}  // namespace toushare
