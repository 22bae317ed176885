#include "toushare/policy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

#include "json.hpp"

namespace toushare {

using nlohmann::json;

bool arbitrage_viable(const ToUSchedule& sched, const EfficiencyPair& eff) {
  const double peak = static_cast<double>(sched.rate_tenths(sched.ramp_up_count() + 1));
  const double off = static_cast<double>(sched.off_peak_tenths());
  return peak * eff.eta_out - off / eff.eta_in > 0.0;
}

// --- ReservationPolicy ------------------------------------------------------

double ReservationPolicy::floor_for(int flat, int ramp_up_count) const {
  if (flat < 1 || flat > ramp_up_count) return 0.0;
  const std::size_t idx = static_cast<std::size_t>(flat - 1);
  if (idx >= reservations_kwh.size()) return 0.0;
  return std::clamp(reservations_kwh[idx], 0.0, capacity_kwh);
}

bool ReservationPolicy::well_formed() const {
  if (!std::isfinite(capacity_kwh) || capacity_kwh < 0.0) return false;
  double prev = capacity_kwh;
  for (double m : reservations_kwh) {
    if (!std::isfinite(m) || m < 0.0 || m > prev) return false;
    prev = m;
  }
  return efficiency.valid();
}

std::string ReservationPolicy::to_json() const {
  json j;
  j["capacity_kwh"] = capacity_kwh;
  j["reservations_kwh"] = reservations_kwh;
  j["eta_in"] = efficiency.eta_in;
  j["eta_out"] = efficiency.eta_out;
  return j.dump(2);
}

ReservationPolicy ReservationPolicy::from_json(const std::string& text) {
  json j = json::parse(text);
  ReservationPolicy p;
  p.capacity_kwh = j.at("capacity_kwh").get<double>();
  p.reservations_kwh = j.at("reservations_kwh").get<std::vector<double>>();
  p.efficiency.eta_in = j.at("eta_in").get<double>();
  p.efficiency.eta_out = j.at("eta_out").get<double>();
  if (!p.efficiency.valid()) throw std::runtime_error("efficiencies must lie in (0,1]");
  return p;
}

// --- daily operation ---------------------------------------------------------

std::vector<TrajectoryStep> reservation_trajectory(const std::vector<double>& trading_demand_kwh,
                                                   double start_stored_kwh,
                                                   const std::vector<double>& floors_kwh,
                                                   const EfficiencyPair& eff) {
  if (trading_demand_kwh.size() != floors_kwh.size())
    throw std::invalid_argument("one floor per trading period required");
  std::vector<TrajectoryStep> steps;
  steps.reserve(trading_demand_kwh.size());
  double stored = start_stored_kwh;
  for (std::size_t i = 0; i < trading_demand_kwh.size(); ++i) {
    const double demand = trading_demand_kwh[i];
    const double headroom = std::max(0.0, stored - floors_kwh[i]);
    const double deliverable = headroom * eff.eta_out;
    TrajectoryStep step;
    step.flat = static_cast<int>(i) + 1;
    step.demand_kwh = demand;
    if (demand >= deliverable) {
      step.delivered_kwh = deliverable;
      stored -= headroom;  // exact drop, no eta round trip in the state update
    } else {
      step.delivered_kwh = demand;
      stored -= demand / eff.eta_out;
    }
    step.purchased_kwh = demand - step.delivered_kwh;
    step.stored_after_kwh = stored;
    steps.push_back(step);
  }
  return steps;
}

DayLedger simulate_standalone_day(const ReservationPolicy& policy, const ToUSchedule& sched,
                                  const std::vector<double>& demand_by_flat) {
  const int p = sched.ramp_up_count();
  const int trading = sched.trading_periods();
  if (static_cast<int>(demand_by_flat.size()) != trading + 1)
    throw std::invalid_argument("demand vector must cover off-peak plus every trading period");

  std::vector<double> floors(static_cast<std::size_t>(trading), 0.0);
  for (int k = 1; k <= trading; ++k)
    floors[static_cast<std::size_t>(k - 1)] = policy.floor_for(k, p);
  const std::vector<double> trading_demand(demand_by_flat.begin() + 1, demand_by_flat.end());

  DayLedger ledger;
  ledger.steps =
      reservation_trajectory(trading_demand, policy.capacity_kwh, floors, policy.efficiency);

  double purchase_tenths = 0.0;
  for (const auto& step : ledger.steps)
    purchase_tenths += static_cast<double>(sched.rate_tenths(step.flat)) * step.purchased_kwh;

  const double off_tenths = static_cast<double>(sched.off_peak_tenths());
  const double final_stored = ledger.steps.empty() ? policy.capacity_kwh
                                                   : ledger.steps.back().stored_after_kwh;
  ledger.discharged_kwh = policy.capacity_kwh - final_stored;
  ledger.recharge_kwh = ledger.discharged_kwh / policy.efficiency.eta_in;
  ledger.recharge_cents = off_tenths * ledger.recharge_kwh / 10.0;
  ledger.off_peak_demand_kwh = demand_by_flat[0];
  ledger.off_peak_demand_cents = off_tenths * demand_by_flat[0] / 10.0;
  ledger.purchase_cents = purchase_tenths / 10.0;
  ledger.total_cents =
      ledger.purchase_cents + ledger.recharge_cents + ledger.off_peak_demand_cents;
  return ledger;
}

DayLedger simulate_standalone_day(const ReservationPolicy& policy, const ToUSchedule& sched,
                                  const RealizedDay& realized) {
  return simulate_standalone_day(policy, sched, realized.collective);
}

// --- PremiumCurve -------------------------------------------------------------

PremiumCurve::PremiumCurve(std::vector<double> xs, std::vector<double> mean_level,
                           std::vector<double> sq_level, std::size_t samples)
    : xs_(std::move(xs)), mean_(std::move(mean_level)), sq_(std::move(sq_level)),
      samples_(samples) {}

double PremiumCurve::value(double v) const {
  if (xs_.empty() || v < xs_.front()) return 0.0;
  const auto it = std::upper_bound(xs_.begin(), xs_.end(), v);
  return mean_[static_cast<std::size_t>(it - xs_.begin()) - 1];
}

Estimate PremiumCurve::estimate(double v) const {
  Estimate e{value(v), std::numeric_limits<double>::quiet_NaN()};
  if (sq_.empty() || samples_ == 0) return e;
  double m2 = 0.0;
  if (!xs_.empty() && v >= xs_.front()) {
    const auto it = std::upper_bound(xs_.begin(), xs_.end(), v);
    m2 = sq_[static_cast<std::size_t>(it - xs_.begin()) - 1];
  }
  const double var = std::max(0.0, m2 - e.value * e.value);
  e.std_error = std::sqrt(var / static_cast<double>(samples_));
  return e;
}

// --- ArbitrageEngine -----------------------------------------------------------

ArbitrageEngine::ArbitrageEngine(const ToUSchedule& sched, const DemandModel& model,
                                 EfficiencyPair eff, McOptions mc)
    : sched_(sched), eff_(eff) {
  if (!eff_.valid()) throw std::invalid_argument("efficiencies must lie in (0,1]");
  if (model.trading_periods() != sched.trading_periods())
    throw std::invalid_argument("model and schedule disagree on trading period count");
  floor_tenths_ = eff_.effective_floor(static_cast<double>(sched.off_peak_tenths()));
  fold_matrix(model.draw_collective(mc.samples, mc.seed));

  if (model.fully_discrete() && eff_.is_unit()) {
    exact_ = true;
    pmfs_.resize(static_cast<std::size_t>(sched.trading_periods()));
    for (int t = 1; t <= sched.trading_periods(); ++t) {
      std::map<double, double> acc{{0.0, 1.0}};
      for (int f = 0; f < model.firm_count(); ++f) {
        const auto& dist = model.firm(f).per_period[static_cast<std::size_t>(t)];
        std::map<double, double> next;
        for (const auto& [v, pr] : acc)
          for (std::size_t i = 0; i < dist.discrete_values().size(); ++i)
            next[v + dist.discrete_values()[i]] += pr * dist.discrete_probs()[i];
        acc = std::move(next);
      }
      Pmf pmf;
      for (const auto& [v, pr] : acc) {
        if (std::abs(v - std::round(v)) > 1e-9)
          throw std::logic_error("exact solver requires integer demand grids");
        pmf.values.push_back(std::round(v));
        pmf.probs.push_back(pr);
      }
      pmfs_[static_cast<std::size_t>(t - 1)] = std::move(pmf);
    }
  }
}

ArbitrageEngine::ArbitrageEngine(const ToUSchedule& sched, SampleMatrix energy_demand_kwh,
                                 EfficiencyPair eff)
    : sched_(sched), eff_(eff) {
  if (!eff_.valid()) throw std::invalid_argument("efficiencies must lie in (0,1]");
  if (static_cast<int>(energy_demand_kwh.cols) != sched.trading_periods())
    throw std::invalid_argument("sample matrix must have one column per trading period");
  floor_tenths_ = eff_.effective_floor(static_cast<double>(sched.off_peak_tenths()));
  fold_matrix(std::move(energy_demand_kwh));
}

void ArbitrageEngine::fold_matrix(SampleMatrix energy) {
  for (double& v : energy.a) v /= eff_.eta_out;
  z_ = std::move(energy);
}

std::vector<double> ArbitrageEngine::window_floors(
    int /*from_flat*/, const std::vector<double>& reservations_kwh) const {
  std::vector<double> floors(static_cast<std::size_t>(sched_.trading_periods()), 0.0);
  const int p = sched_.ramp_up_count();
  for (int k = 1; k <= p && k <= static_cast<int>(reservations_kwh.size()); ++k)
    floors[static_cast<std::size_t>(k - 1)] =
        std::max(0.0, reservations_kwh[static_cast<std::size_t>(k - 1)]);
  return floors;
}

PremiumCurve ArbitrageEngine::premium_curve(int from_flat,
                                            const std::vector<double>& reservations_kwh,
                                            bool with_std_error) const {
  const int trading = sched_.trading_periods();
  if (from_flat < 0 || from_flat > trading)
    throw std::invalid_argument("window start out of range");
  const auto floors = window_floors(from_flat, reservations_kwh);
  const int p = sched_.ramp_up_count();
  for (int k = from_flat + 2; k <= p; ++k)
    if (floors[static_cast<std::size_t>(k - 1)] > floors[static_cast<std::size_t>(k - 2)] + 1e-9)
      throw std::invalid_argument("reservations must be non-increasing across ramp-up periods");

  // A unit sitting below a floor is held there, untouched, until the floors
  // fall to its level; only then does it enter the ordinary absorption walk.
  // Floors are non-increasing, so the held stretch is a prefix of the window's
  // ramp-up periods and the state axis splits into one band per prefix length.
  struct Event {
    double x;
    double dm;
    double dq;
  };
  std::vector<Event> events;
  events.reserve(z_.rows * static_cast<std::size_t>(trading - from_flat) * 2);

  const int bands = std::max(0, p - from_flat);
  const double inf = std::numeric_limits<double>::infinity();
  for (std::size_t row = 0; row < z_.rows; ++row) {
    for (int held = 0; held <= bands; ++held) {
      const double hi =
          held == 0 ? inf : floors[static_cast<std::size_t>(from_flat + held - 1)];
      const double lo =
          held == bands ? 0.0 : floors[static_cast<std::size_t>(from_flat + held)];
      if (lo >= hi) continue;
      double cum = 0.0;
      double barrier = lo;
      for (int k = from_flat + held + 1; k <= trading; ++k) {
        const double z = z_.at(row, static_cast<std::size_t>(k - 1));
        if (z <= 0.0) continue;  // a slack period cannot force the first purchase
        cum += z;
        const double trigger = cum + floors[static_cast<std::size_t>(k - 1)];
        if (trigger <= barrier) continue;
        const double w = static_cast<double>(sched_.rate_tenths(k)) - floor_tenths_;
        const double top = std::min(trigger, hi);
        events.push_back({barrier, w, with_std_error ? w * w : 0.0});
        events.push_back({top, -w, with_std_error ? -w * w : 0.0});
        if (trigger >= hi) break;  // the whole band is absorbed by this period
        barrier = trigger;
      }
    }
  }

  std::sort(events.begin(), events.end(),
            [](const Event& a, const Event& b) { return a.x < b.x; });

  std::vector<double> xs, mean, sq;
  const double n = static_cast<double>(z_.rows);
  double cm = 0.0, cq = 0.0;
  for (std::size_t i = 0; i < events.size();) {
    const double x = events[i].x;
    for (; i < events.size() && events[i].x == x; ++i) {
      cm += events[i].dm;
      cq += events[i].dq;
    }
    xs.push_back(x);
    mean.push_back(cm / n);
    sq.push_back(cq / n);
  }
  if (!with_std_error) sq.clear();
  return PremiumCurve(std::move(xs), std::move(mean), std::move(sq), z_.rows);
}

double ArbitrageEngine::exact_premium(int from_flat, const std::vector<double>& reservations_kwh,
                                      double state_kwh) const {
  if (!exact_) throw std::logic_error("exact premium requires a fully discrete model");
  const int trading = sched_.trading_periods();
  const auto floors = window_floors(from_flat, reservations_kwh);

  std::map<double, double> alive{{state_kwh, 1.0}};
  double premium = 0.0;
  for (int k = from_flat + 1; k <= trading; ++k) {
    const auto& pmf = pmfs_[static_cast<std::size_t>(k - 1)];
    const double theta = floors[static_cast<std::size_t>(k - 1)];
    const double w = static_cast<double>(sched_.rate_tenths(k)) - floor_tenths_;
    std::map<double, double> next;
    for (const auto& [s, pr] : alive) {
      for (std::size_t i = 0; i < pmf.values.size(); ++i) {
        const double y = pmf.values[i];
        const double pp = pr * pmf.probs[i];
        if (pp == 0.0) continue;
        if (y <= 0.0) {
          next[s] += pp;  // zero demand: nothing happens
        } else if (s < theta) {
          // Floor above the stock: dispatch is blocked, so the purchase here is
          // not one the marginal unit could displace. Held, nothing drains.
          next[s] += pp;
        } else if (s >= y + theta) {
          next[s - y] += pp;  // fully served from storage
        } else {
          premium += w * pp;  // first strict deficit the unit could have covered
        }
      }
    }
    alive = std::move(next);
  }
  return premium;
}

double ArbitrageEngine::premium(int from_flat, const std::vector<double>& reservations_kwh,
                                double state_kwh) const {
  if (exact_) return exact_premium(from_flat, reservations_kwh, state_kwh);
  // Direct walk; agrees with premium_curve(...).value() on the same samples.
  const int trading = sched_.trading_periods();
  const auto floors = window_floors(from_flat, reservations_kwh);
  double total = 0.0;
  for (std::size_t row = 0; row < z_.rows; ++row) {
    double stock = state_kwh;
    for (int k = from_flat + 1; k <= trading; ++k) {
      const double theta = floors[static_cast<std::size_t>(k - 1)];
      if (stock < theta) continue;  // floor blocks dispatch: held, nothing drains
      const double z = z_.at(row, static_cast<std::size_t>(k - 1));
      if (z <= 0.0) continue;
      if (stock < z + theta) {
        total += static_cast<double>(sched_.rate_tenths(k)) - floor_tenths_;
        break;
      }
      stock -= z;
    }
  }
  return total / static_cast<double>(z_.rows);
}

std::vector<Estimate> ArbitrageEngine::first_purchase_profile(
    int from_flat, const std::vector<double>& reservations_kwh, double state_kwh) const {
  const int trading = sched_.trading_periods();
  if (from_flat < 0 || from_flat >= trading)
    throw std::invalid_argument("window start out of range");
  const auto floors = window_floors(from_flat, reservations_kwh);
  for (std::size_t i = 1; i < reservations_kwh.size(); ++i)
    if (reservations_kwh[i] > reservations_kwh[i - 1] + 1e-9)
      throw std::invalid_argument("reservations must be non-increasing across ramp-up periods");

  std::vector<std::size_t> counts(static_cast<std::size_t>(trading - from_flat), 0);
  for (std::size_t row = 0; row < z_.rows; ++row) {
    double cum = 0.0;
    for (int k = from_flat + 1; k <= trading; ++k) {
      const double z = z_.at(row, static_cast<std::size_t>(k - 1));
      if (z <= 0.0) continue;
      cum += z;
      if (state_kwh < cum + floors[static_cast<std::size_t>(k - 1)]) {
        ++counts[static_cast<std::size_t>(k - from_flat - 1)];
        break;
      }
    }
  }
  std::vector<Estimate> out;
  const double n = static_cast<double>(z_.rows);
  for (std::size_t c : counts) {
    const double p = static_cast<double>(c) / n;
    out.push_back({p, std::sqrt(std::max(0.0, p * (1.0 - p)) / n)});
  }
  return out;
}

double ArbitrageEngine::marginal_revenue(int j, double reservation_kwh,
                                         const std::vector<double>& downstream_kwh) const {
  const int p = sched_.ramp_up_count();
  if (j < 1 || j > p) throw std::invalid_argument("marginal revenue is defined on ramp-up periods");
  std::vector<double> res(static_cast<std::size_t>(p), 0.0);
  res[static_cast<std::size_t>(j - 1)] = reservation_kwh;
  for (int k = j + 1; k <= p; ++k) {
    const std::size_t src = static_cast<std::size_t>(k - j - 1);
    res[static_cast<std::size_t>(k - 1)] = src < downstream_kwh.size() ? downstream_kwh[src] : 0.0;
  }
  // Internal premiums carry (pi_k - pi_l/(eta_i*eta_o)); scale to (pi_k*eta_o - pi_l/eta_i).
  return premium(j, res, reservation_kwh) * eff_.eta_out / 10.0;
}

ReservationSolve ArbitrageEngine::solve_reservations() const {
  const int p = sched_.ramp_up_count();
  ReservationSolve out;
  out.reservations_kwh.assign(static_cast<std::size_t>(p), 0.0);
  if (p == 0) return out;
  if (exact_)
    out.warnings.push_back("discrete demand grid: fixed point may be non-unique; "
                           "smallest optimizer returned");

  for (int j = p; j >= 1; --j) {
    const double target = static_cast<double>(sched_.rate_tenths(j)) - floor_tenths_;
    double solved = 0.0;
    if (target <= 0.0) {
      // Stored energy is worth more than this period's rate: never discharge here.
      solved = exact_ ? exact_grid_limit() : stored_demand_quantile(1.0);
      out.warnings.push_back("ramp-up period " + std::to_string(j) +
                             " is below the effective storage floor; reserving everything");
    } else if (exact_) {
      const double limit = exact_grid_limit();
      double m = 0.0;
      while (m < limit &&
             exact_premium(j, out.reservations_kwh, m) > target + 1e-9) {
        m += 1.0;
      }
      solved = m;
    } else {
      const PremiumCurve curve = premium_curve(j, out.reservations_kwh, true);
      if (curve.value(0.0) < target) {
        solved = 0.0;
      } else {
        // Monotonicity sanity: MR must not rise beyond MC noise.
        const double span = std::max(curve.max_support(), 1e-9);
        Estimate prev = curve.estimate(0.0);
        for (int g = 1; g <= 16; ++g) {
          const Estimate cur = curve.estimate(span * static_cast<double>(g) / 16.0);
          if (cur.value > prev.value + 4.0 * (cur.std_error + prev.std_error) + 1e-12)
            throw std::runtime_error(
                "marginal revenue is not monotone: Assumption 7 violated or sample count too low");
          prev = cur;
        }
        double lo = 0.0, hi = span;
        while (hi - lo > 1e-4) {
          const double mid = 0.5 * (lo + hi);
          (curve.value(mid) > target ? lo : hi) = mid;
        }
        solved = 0.5 * (lo + hi);
      }
    }
    if (j < p && solved < out.reservations_kwh[static_cast<std::size_t>(j)]) {
      solved = out.reservations_kwh[static_cast<std::size_t>(j)];
      out.warnings.push_back("reservation ordering enforced at period " + std::to_string(j));
    }
    out.reservations_kwh[static_cast<std::size_t>(j - 1)] = solved;
  }
  return out;
}

CapacitySolve ArbitrageEngine::solve_capacity(const std::vector<double>& reservations_kwh) const {
  CapacitySolve out;
  const double target = static_cast<double>(sched_.storage_cost_tenths());
  if (!arbitrage_viable(sched_, eff_))
    out.warnings.push_back("peak arbitrage does not cover the round-trip cost");

  if (exact_) {
    out.warnings.push_back("discrete demand grid: fixed point may be non-unique; "
                           "smallest optimizer returned");
    const double limit = exact_grid_limit();
    double c = 0.0;
    while (c < limit && exact_premium(0, reservations_kwh, c) > target + 1e-9) c += 1.0;
    out.capacity_kwh = c;
    if (c == 0.0 && exact_premium(0, reservations_kwh, 0.0) <= target + 1e-9)
      out.warnings.push_back("amortized storage cost exceeds achievable marginal benefit");
    if (!reservations_kwh.empty() && c < reservations_kwh.front())
      out.warnings.push_back("capacity sits below the top reservation; floors bind at capacity");
    return out;
  }

  const PremiumCurve curve = premium_curve(0, reservations_kwh, false);
  if (curve.value(0.0) < target) {
    out.capacity_kwh = 0.0;
    out.warnings.push_back("amortized storage cost exceeds achievable marginal benefit; "
                           "no investment");
    return out;
  }
  double hi = stored_demand_quantile(0.9999);
  if (curve.value(hi) >= target) hi = std::max(hi, curve.max_support() + 1e-6);
  double lo = 0.0;
  while (hi - lo > 1e-4) {
    const double mid = 0.5 * (lo + hi);
    (curve.value(mid) > target ? lo : hi) = mid;
  }
  out.capacity_kwh = 0.5 * (lo + hi);
  if (!reservations_kwh.empty() && out.capacity_kwh < reservations_kwh.front())
    out.warnings.push_back("capacity sits below the top reservation; floors bind at capacity");
  return out;
}

double ArbitrageEngine::exact_policy_cost(const ReservationPolicy& policy,
                                          double off_peak_mean_kwh) const {
  if (!exact_) throw std::logic_error("exact policy cost requires a fully discrete model");
  const int p = sched_.ramp_up_count();
  const double off = static_cast<double>(sched_.off_peak_tenths());

  std::map<double, double> states{{policy.capacity_kwh, 1.0}};
  double cost_tenths = off * off_peak_mean_kwh;
  for (int k = 1; k <= sched_.trading_periods(); ++k) {
    const auto& pmf = pmfs_[static_cast<std::size_t>(k - 1)];
    const double theta = policy.floor_for(k, p);
    const double rate = static_cast<double>(sched_.rate_tenths(k));
    std::map<double, double> next;
    for (const auto& [s, pr] : states) {
      for (std::size_t i = 0; i < pmf.values.size(); ++i) {
        const double y = pmf.values[i];
        const double pp = pr * pmf.probs[i];
        if (pp == 0.0) continue;
        const double served = std::min(y, std::max(0.0, s - theta));
        cost_tenths += pp * rate * (y - served);
        next[s - served] += pp;
      }
    }
    states = std::move(next);
  }
  double expected_final = 0.0;
  for (const auto& [s, pr] : states) expected_final += s * pr;
  cost_tenths += off * (policy.capacity_kwh - expected_final);
  return cost_tenths / 10.0;
}

double ArbitrageEngine::stored_demand_quantile(double prob) const {
  std::vector<double> sums(z_.rows, 0.0);
  for (std::size_t r = 0; r < z_.rows; ++r)
    for (std::size_t c = 0; c < z_.cols; ++c) sums[r] += z_.at(r, c);
  return quantile(std::move(sums), prob);
}

double ArbitrageEngine::exact_grid_limit() const {
  double total = 0.0;
  for (const auto& pmf : pmfs_)
    if (!pmf.values.empty()) total += pmf.values.back();
  return total + 1.0;
}

// --- free functions -----------------------------------------------------------

Estimate first_purchase_prob(const ToUSchedule& sched, const DemandModel& model,
                             const EfficiencyPair& eff, int j, int k,
                             const std::vector<double>& reservations_kwh, double state_kwh,
                             const McOptions& mc) {
  if (k <= j || k > sched.trading_periods())
    throw std::invalid_argument("need j < k <= number of trading periods");
  ArbitrageEngine engine(sched, model, eff, mc);
  const auto profile = engine.first_purchase_profile(j, reservations_kwh, state_kwh);
  return profile[static_cast<std::size_t>(k - j - 1)];
}

ThreeTierClosedForm closed_form_three_tier(const ToUSchedule& sched, const DemandModel& model,
                                           const McOptions& mc) {
  if (sched.ramp_up_count() != 1 || sched.ramp_down_count() != 1)
    throw std::invalid_argument("closed form needs exactly one ramp-up and one ramp-down period");
  const double off = static_cast<double>(sched.off_peak_tenths());
  const double mid = static_cast<double>(sched.rate_tenths(1));
  const double high = static_cast<double>(sched.rate_tenths(2));
  const double storage = static_cast<double>(sched.storage_cost_tenths());

  const SampleMatrix m = model.draw_collective(mc.samples, mc.seed);
  std::vector<double> ramp_down(m.rows);
  for (std::size_t r = 0; r < m.rows; ++r) ramp_down[r] = m.at(r, 1);

  ThreeTierClosedForm out;
  out.reservation_kwh = quantile(std::move(ramp_down), (high - mid) / (high - off));

  if (mid - off <= storage) {
    out.capacity_kwh = 0.0;
    return out;
  }
  std::vector<double> conditional;
  for (std::size_t r = 0; r < m.rows; ++r)
    if (m.at(r, 1) > out.reservation_kwh) conditional.push_back(m.at(r, 0) + m.at(r, 1));
  if (conditional.empty())
    throw std::runtime_error("conditioning event has no samples; reservation at support edge");
  out.capacity_kwh = quantile(std::move(conditional), (mid - off - storage) / (mid - off));
  return out;
}

}  // namespace toushare
