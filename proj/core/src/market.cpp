#include "toushare/market.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace toushare {

SharingMarket::SharingMarket(const ToUSchedule& sched, const DemandModel& model,
                             EfficiencyPair eff, McOptions mc)
    : sched_(sched), eff_(eff) {
  ArbitrageEngine engine(sched, model, eff, mc);
  ReservationSolve solve = engine.solve_reservations();
  reservations_ = std::move(solve.reservations_kwh);
  warnings_ = std::move(solve.warnings);
  const int trading = sched.trading_periods();
  forward_.reserve(static_cast<std::size_t>(trading));
  for (int flat = 1; flat <= trading; ++flat)
    forward_.push_back(engine.premium_curve(flat, reservations_));
}

double SharingMarket::clearing_price_cents(int flat, double demand, double stored_before,
                                           bool* deficit_out, double* raw_overshoot) const {
  const int trading = sched_.trading_periods();
  if (flat < 1 || flat > trading) throw std::invalid_argument("price is set per trading period");
  const int p = sched_.ramp_up_count();
  const double floor_kwh =
      flat <= p && flat <= static_cast<int>(reservations_.size())
          ? reservations_[static_cast<std::size_t>(flat - 1)]
          : 0.0;
  const double deliverable = std::max(0.0, stored_before - floor_kwh) * eff_.eta_out;
  const double rate_cents = static_cast<double>(sched_.rate_tenths(flat)) / 10.0;

  if (demand >= deliverable) {
    if (deficit_out) *deficit_out = true;
    return rate_cents;  // grid rate, exactly
  }
  if (deficit_out) *deficit_out = false;

  const double stored_after = stored_before - demand / eff_.eta_out;
  const double floor_tenths =
      eff_.effective_floor(static_cast<double>(sched_.off_peak_tenths()));
  const double raw_tenths =
      floor_tenths + forward_[static_cast<std::size_t>(flat - 1)].value(stored_after);
  double price = raw_tenths / 10.0;

  const double off_cents = static_cast<double>(sched_.off_peak_tenths()) / 10.0;
  if (raw_overshoot)
    *raw_overshoot = std::max({0.0, price - rate_cents, off_cents - price});
  price = std::clamp(price, off_cents, rate_cents);
  return price;
}

MarketOutcome SharingMarket::settle_day(const RealizedDay& realized,
                                        const std::vector<double>& capacities_kwh) const {
  const int trading = sched_.trading_periods();
  const std::size_t n = realized.demand.size();
  if (capacities_kwh.size() != n)
    throw std::invalid_argument("one capacity per firm required");
  for (const auto& firm : realized.demand)
    if (static_cast<int>(firm.size()) != trading + 1)
      throw std::invalid_argument("realized day must cover off-peak plus every trading period");

  MarketOutcome out;
  out.capacities_kwh = capacities_kwh;
  out.firms.resize(n);
  double pool = 0.0;
  std::vector<double> stored(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (capacities_kwh[i] < 0.0) throw std::invalid_argument("capacities must be nonnegative");
    stored[i] = capacities_kwh[i];
    pool += capacities_kwh[i];
    out.firms[i].firm_id = "firm" + std::to_string(i);
    out.firms[i].net_procurement_kwh.assign(static_cast<std::size_t>(trading), 0.0);
  }

  const int p = sched_.ramp_up_count();
  std::vector<double> floors(static_cast<std::size_t>(trading), 0.0);
  for (int k = 1; k <= p && k <= static_cast<int>(reservations_.size()); ++k)
    floors[static_cast<std::size_t>(k - 1)] = reservations_[static_cast<std::size_t>(k - 1)];

  const std::vector<double> trading_demand(realized.collective.begin() + 1,
                                           realized.collective.end());
  out.collective = reservation_trajectory(trading_demand, pool, floors, eff_);

  double balance_tenths = 0.0;
  std::vector<double> trading_cash_tenths(n, 0.0);
  double u_prev = pool;
  for (int k = 1; k <= trading; ++k) {
    const TrajectoryStep& step = out.collective[static_cast<std::size_t>(k - 1)];
    bool deficit = false;
    double overshoot = 0.0;
    const double price =
        clearing_price_cents(k, step.demand_kwh, u_prev, &deficit, &overshoot);
    out.prices_cents.push_back(price);
    out.deficit.push_back(deficit);
    out.clamp_overshoot_cents = std::max(out.clamp_overshoot_cents, overshoot);

    // Physical discharge is split pro rata by current stored energy; the last
    // firm takes the rounding remainder so the pool total stays exact.
    const double drop = u_prev - step.stored_after_kwh;
    std::vector<double> firm_drop(n, 0.0);
    if (drop > 0.0 && u_prev > 0.0) {
      double assigned = 0.0;
      for (std::size_t i = 0; i + 1 < n; ++i) {
        firm_drop[i] = drop * (stored[i] / u_prev);
        assigned += firm_drop[i];
      }
      firm_drop[n - 1] = drop - assigned;
    }

    const double price_tenths = price * 10.0;
    double collected_tenths = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      stored[i] -= firm_drop[i];
      const double net = realized.demand[i][static_cast<std::size_t>(k)] -
                         firm_drop[i] * eff_.eta_out;
      out.firms[i].net_procurement_kwh[static_cast<std::size_t>(k - 1)] = net;
      const double cash = price_tenths * net;
      trading_cash_tenths[i] += cash;
      collected_tenths += cash;
    }
    balance_tenths += collected_tenths -
                      static_cast<double>(sched_.rate_tenths(k)) * step.purchased_kwh;
    u_prev = step.stored_after_kwh;
  }

  const double off_tenths = static_cast<double>(sched_.off_peak_tenths());
  for (std::size_t i = 0; i < n; ++i) {
    FirmSettlement& firm = out.firms[i];
    firm.trading_cash_cents = trading_cash_tenths[i] / 10.0;
    firm.recharge_cents = off_tenths * (capacities_kwh[i] - stored[i]) / eff_.eta_in / 10.0;
    firm.off_peak_cents = off_tenths * realized.demand[i][0] / 10.0;
    firm.total_cents = firm.trading_cash_cents + firm.recharge_cents + firm.off_peak_cents;
  }
  out.aggregator_net_cents = balance_tenths / 10.0;
  return out;
}

double clearing_price(const ToUSchedule& sched, const DemandModel& model,
                      const EfficiencyPair& eff, int flat, double demand, double stored_before,
                      const std::vector<double>& reservations_kwh, const McOptions& mc) {
  const int p = sched.ramp_up_count();
  const double floor_kwh = flat >= 1 && flat <= p &&
                                   flat <= static_cast<int>(reservations_kwh.size())
                               ? reservations_kwh[static_cast<std::size_t>(flat - 1)]
                               : 0.0;
  const double deliverable = std::max(0.0, stored_before - floor_kwh) * eff.eta_out;
  const double rate_cents = static_cast<double>(sched.rate_tenths(flat)) / 10.0;
  if (demand >= deliverable) return rate_cents;

  ArbitrageEngine engine(sched, model, eff, mc);
  const double stored_after = stored_before - demand / eff.eta_out;
  const double raw = engine.effective_floor_tenths() +
                     engine.premium(flat, reservations_kwh, stored_after);
  const double off_cents = static_cast<double>(sched.off_peak_tenths()) / 10.0;
  return std::clamp(raw / 10.0, off_cents, rate_cents);
}

double rus_reservation(const ToUSchedule& sched, const DemandModel& model, const McOptions& mc) {
  if (sched.ramp_up_count() != 1 || sched.ramp_down_count() != 1)
    throw std::invalid_argument("collective reservation rule needs one ramp-up and one ramp-down");
  const double off = static_cast<double>(sched.off_peak_tenths());
  const double partial = static_cast<double>(sched.rate_tenths(1));
  const double peak = static_cast<double>(sched.rate_tenths(2));
  return aggregate_quantile(model, {2}, (peak - partial) / (peak - off), mc);
}

WelfareCertificate social_cost_certificate(const SharingMarket& market,
                                           const RealizedDay& realized,
                                           const MarketOutcome& outcome) {
  WelfareCertificate cert;
  for (const auto& firm : outcome.firms) cert.settled_total_cents += firm.total_cents;

  ReservationPolicy policy;
  policy.capacity_kwh = 0.0;
  for (double c : outcome.capacities_kwh) policy.capacity_kwh += c;
  policy.reservations_kwh = market.collective_reservations();
  policy.efficiency = market.efficiency();
  cert.standalone_total_cents =
      simulate_standalone_day(policy, market.schedule(), realized.collective).total_cents;

  cert.difference_cents = cert.settled_total_cents - cert.standalone_total_cents;
  cert.passed = std::abs(cert.difference_cents) < 1e-9;
  return cert;
}

void write_settlement_csv(const std::string& firms_path, const std::string& days_path,
                          const std::vector<MarketOutcome>& outcomes) {
  std::ofstream firms(firms_path);
  std::ofstream days(days_path);
  if (!firms || !days) throw std::runtime_error("cannot open settlement CSV for writing");

  const std::size_t periods = outcomes.empty() ? 0 : outcomes.front().prices_cents.size();
  firms << "day_id,firm_id";
  for (std::size_t t = 1; t <= periods; ++t) firms << ",net_kwh_" << t;
  firms << ",trading_cash_cents,recharge_cents,off_peak_cents,total_cents\n";
  days << "day_id";
  for (std::size_t t = 1; t <= periods; ++t) days << ",price_cents_" << t;
  days << ",aggregator_net_cents\n";

  for (std::size_t d = 0; d < outcomes.size(); ++d) {
    const MarketOutcome& o = outcomes[d];
    for (const auto& firm : o.firms) {
      firms << d << ',' << firm.firm_id;
      for (double v : firm.net_procurement_kwh) firms << ',' << v;
      firms << ',' << firm.trading_cash_cents << ',' << firm.recharge_cents << ','
            << firm.off_peak_cents << ',' << firm.total_cents << '\n';
    }
    days << d;
    for (double pr : o.prices_cents) days << ',' << pr;
    days << ',' << o.aggregator_net_cents << '\n';
  }
}

}  // namespace toushare
