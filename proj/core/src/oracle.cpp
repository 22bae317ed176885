#include "toushare/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>

#include "json.hpp"

namespace toushare {

using nlohmann::json;

DiscretizedInstance::DiscretizedInstance(ToUSchedule schedule, double delta,
                                         std::vector<std::vector<std::vector<double>>> pmf,
                                         int capacity_levels)
    : schedule_(std::move(schedule)), delta_(delta), pmf_(std::move(pmf)),
      capacity_levels_(capacity_levels) {
  if (delta_ <= 0.0) throw std::invalid_argument("grid step must be positive");
  if (pmf_.empty()) throw std::invalid_argument("instance needs at least one firm");
  const std::size_t flats = static_cast<std::size_t>(schedule_.trading_periods()) + 1;
  for (const auto& firm : pmf_) {
    if (firm.size() != flats)
      throw std::invalid_argument("each firm needs a pmf for every flat period");
    for (const auto& dist : firm) {
      double total = 0.0;
      for (double m : dist) {
        if (m < 0.0) throw std::invalid_argument("negative probability mass");
        total += m;
      }
      if (std::abs(total - 1.0) > 1e-9)
        throw std::invalid_argument("probability masses must sum to 1");
    }
  }
}

std::vector<double> DiscretizedInstance::collective_pmf(int flat) const {
  std::vector<double> acc{1.0};
  for (const auto& firm : pmf_) {
    const auto& dist = firm[static_cast<std::size_t>(flat)];
    std::vector<double> next(acc.size() + dist.size() - 1, 0.0);
    for (std::size_t a = 0; a < acc.size(); ++a)
      for (std::size_t b = 0; b < dist.size(); ++b) next[a + b] += acc[a] * dist[b];
    acc = std::move(next);
  }
  return acc;
}

double DiscretizedInstance::off_peak_mean_kwh() const {
  double mean = 0.0;
  for (const auto& firm : pmf_)
    for (std::size_t level = 0; level < firm[0].size(); ++level)
      mean += firm[0][level] * static_cast<double>(level) * delta_;
  return mean;
}

DemandModel DiscretizedInstance::to_demand_model() const {
  std::vector<int> all(static_cast<std::size_t>(firm_count()));
  std::iota(all.begin(), all.end(), 0);
  return to_demand_model(all);
}

DemandModel DiscretizedInstance::to_demand_model(const std::vector<int>& firm_indices) const {
  std::vector<FirmProfile> firms;
  for (int fi : firm_indices) {
    const auto& firm = pmf_.at(static_cast<std::size_t>(fi));
    FirmProfile profile;
    profile.firm_id = "f" + std::to_string(fi);
    for (const auto& dist : firm) {
      std::vector<double> values, probs;
      for (std::size_t level = 0; level < dist.size(); ++level) {
        if (dist[level] <= 0.0) continue;
        values.push_back(static_cast<double>(level) * delta_);
        probs.push_back(dist[level]);
      }
      // Renormalize away the 1e-9 slack admitted by the constructor.
      const double total = std::accumulate(probs.begin(), probs.end(), 0.0);
      for (double& p : probs) p /= total;
      profile.per_period.push_back(DemandDistribution::discrete(values, probs));
    }
    firms.push_back(std::move(profile));
  }
  return DemandModel(std::move(firms), schedule_.trading_periods());
}

std::string DiscretizedInstance::to_json() const {
  json j;
  j["delta"] = delta_;
  j["capacity_levels"] = capacity_levels_;
  const auto& spec = schedule_.spec();
  j["schedule"]["off_peak_rate_cents"] = spec.off_peak_rate_cents;
  j["schedule"]["ramp_up_cents"] = spec.ramp_up_cents;
  j["schedule"]["ramp_down_cents"] = spec.ramp_down_cents;
  j["schedule"]["storage_cost_cents_per_kwh_day"] = spec.storage_cost_cents;
  j["pmf"] = pmf_;
  return j.dump(2);
}

DiscretizedInstance DiscretizedInstance::from_json(const std::string& text) {
  json j = json::parse(text);
  const auto& js = j.at("schedule");
  ToUSchedule sched = ToUSchedule::from_rates(
      js.at("off_peak_rate_cents").get<double>(),
      js.at("ramp_up_cents").get<std::vector<double>>(),
      js.at("ramp_down_cents").get<std::vector<double>>(),
      js.at("storage_cost_cents_per_kwh_day").get<double>());
  return DiscretizedInstance(std::move(sched), j.at("delta").get<double>(),
                             j.at("pmf").get<std::vector<std::vector<std::vector<double>>>>(),
                             j.at("capacity_levels").get<int>());
}

// --- collective DP ------------------------------------------------------------

namespace {

struct DpTables {
  double cost_tenths = 0.0;                       // V_1(C) + recharge terminal, no pi_s/off yet
  std::vector<std::vector<std::vector<int>>> actions;  // [k-1][s][y]
};

DpTables dp_at_capacity(const DiscretizedInstance& inst,
                        const std::vector<std::vector<double>>& collective, int cap) {
  const ToUSchedule& sched = inst.schedule();
  const int trading = sched.trading_periods();
  const double delta = inst.delta();
  const double off = static_cast<double>(sched.off_peak_tenths());

  // Terminal: refill whatever was discharged at the off-peak rate.
  std::vector<double> value(static_cast<std::size_t>(cap) + 1);
  for (int s = 0; s <= cap; ++s)
    value[static_cast<std::size_t>(s)] = off * static_cast<double>(cap - s) * delta;

  DpTables out;
  out.actions.assign(static_cast<std::size_t>(trading), {});
  for (int k = trading; k >= 1; --k) {
    const auto& pmf = collective[static_cast<std::size_t>(k)];
    const double rate = static_cast<double>(sched.rate_tenths(k));
    std::vector<double> next(static_cast<std::size_t>(cap) + 1, 0.0);
    auto& acts = out.actions[static_cast<std::size_t>(k - 1)];
    acts.assign(static_cast<std::size_t>(cap) + 1,
                std::vector<int>(pmf.size(), 0));
    for (int s = 0; s <= cap; ++s) {
      double expect = 0.0;
      for (std::size_t y = 0; y < pmf.size(); ++y) {
        if (pmf[y] == 0.0) continue;
        const int d_max = std::min<int>(static_cast<int>(y), s);
        double best = 0.0;
        int best_d = 0;
        for (int d = 0; d <= d_max; ++d) {
          const double c = rate * static_cast<double>(static_cast<int>(y) - d) * delta +
                           value[static_cast<std::size_t>(s - d)];
          if (d == 0 || c <= best) {  // ties go to the larger discharge
            best = c;
            best_d = d;
          }
        }
        acts[static_cast<std::size_t>(s)][y] = best_d;
        expect += pmf[y] * best;
      }
      next[static_cast<std::size_t>(s)] = expect;
    }
    value = std::move(next);
  }
  out.cost_tenths = value[static_cast<std::size_t>(cap)];
  return out;
}

}  // namespace

double dp_expected_cost(const DiscretizedInstance& inst, int capacity_level) {
  std::vector<std::vector<double>> collective;
  for (int flat = 0; flat <= inst.schedule().trading_periods(); ++flat)
    collective.push_back(inst.collective_pmf(flat));
  const DpTables t = dp_at_capacity(inst, collective, capacity_level);
  const double tenths =
      t.cost_tenths +
      static_cast<double>(inst.schedule().storage_cost_tenths()) *
          static_cast<double>(capacity_level) * inst.delta() +
      static_cast<double>(inst.schedule().off_peak_tenths()) * inst.off_peak_mean_kwh();
  return tenths / 10.0;
}

DpSolution dp_optimal_policy(const DiscretizedInstance& inst) {
  const ToUSchedule& sched = inst.schedule();
  const int trading = sched.trading_periods();

  std::vector<std::vector<double>> collective;
  std::size_t y_levels = 0;
  for (int flat = 0; flat <= trading; ++flat) {
    collective.push_back(inst.collective_pmf(flat));
    y_levels = std::max(y_levels, collective.back().size());
  }
  const double states = static_cast<double>(inst.capacity_levels() + 1) *
                        static_cast<double>(y_levels) * static_cast<double>(trading) *
                        static_cast<double>(inst.capacity_levels() + 1);
  if (states > 1e7) throw std::runtime_error("discretized state space too large");

  DpSolution sol;
  double best = 0.0;
  int best_cap = 0;
  DpTables best_tables;
  for (int cap = 0; cap <= inst.capacity_levels(); ++cap) {
    DpTables t = dp_at_capacity(inst, collective, cap);
    const double tenths =
        t.cost_tenths +
        static_cast<double>(sched.storage_cost_tenths()) * static_cast<double>(cap) *
            inst.delta() +
        static_cast<double>(sched.off_peak_tenths()) * inst.off_peak_mean_kwh();
    sol.cost_by_capacity_cents.push_back(tenths / 10.0);
    if (cap == 0 || tenths < best - 1e-9) {  // strict improvement keeps the smallest argmin
      best = tenths;
      best_cap = cap;
      best_tables = std::move(t);
    }
  }
  sol.expected_cost_cents = best / 10.0;
  sol.best_capacity_kwh = static_cast<double>(best_cap) * inst.delta();
  sol.actions = std::move(best_tables.actions);

  // Policy structure at the best capacity: RD must be greedy, RU must fit a
  // single threshold per period. Zero-probability demand levels never reach
  // the action optimizer, so their table slots are meaningless placeholders.
  sol.thresholds_consistent = true;
  const int p = sched.ramp_up_count();
  for (int k = trading; k > p; --k) {
    const auto& acts = sol.actions[static_cast<std::size_t>(k - 1)];
    const auto& pmf = collective[static_cast<std::size_t>(k)];
    for (int s = 0; s < static_cast<int>(acts.size()); ++s)
      for (int y = 0; y < static_cast<int>(acts[static_cast<std::size_t>(s)].size()); ++y)
        if (pmf[static_cast<std::size_t>(y)] > 0.0 &&
            acts[static_cast<std::size_t>(s)][static_cast<std::size_t>(y)] != std::min(y, s))
          sol.thresholds_consistent = false;
  }
  for (int k = 1; k <= p; ++k) {
    const auto& acts = sol.actions[static_cast<std::size_t>(k - 1)];
    const auto& pmf = collective[static_cast<std::size_t>(k)];
    // A binding observation (discharge stopped short of demand) leaves s - d
    // units behind; states at or below the floor hold everything, so only the
    // largest residual identifies the floor itself.
    int floor_level = 0;
    for (int s = 0; s < static_cast<int>(acts.size()); ++s)
      for (int y = 0; y < static_cast<int>(acts[static_cast<std::size_t>(s)].size()); ++y) {
        if (pmf[static_cast<std::size_t>(y)] == 0.0) continue;
        const int d = acts[static_cast<std::size_t>(s)][static_cast<std::size_t>(y)];
        if (d < std::min(y, s)) floor_level = std::max(floor_level, s - d);
      }
    // Validate the full table against min(y, max(0, s - M)).
    for (int s = 0; s < static_cast<int>(acts.size()); ++s)
      for (int y = 0; y < static_cast<int>(acts[static_cast<std::size_t>(s)].size()); ++y)
        if (pmf[static_cast<std::size_t>(y)] > 0.0 &&
            acts[static_cast<std::size_t>(s)][static_cast<std::size_t>(y)] !=
                std::min(y, std::max(0, s - floor_level)))
          sol.thresholds_consistent = false;
    sol.ru_thresholds_kwh.push_back(static_cast<double>(floor_level) * inst.delta());
  }
  return sol;
}

// --- exhaustive joint optimum ---------------------------------------------------

double exhaustive_social_optimum(const DiscretizedInstance& inst,
                                 const std::vector<int>& capacity_levels, bool sharing_enabled) {
  const int n = inst.firm_count();
  if (n > 3) throw std::invalid_argument("exhaustive optimum supports at most 3 firms");
  if (static_cast<int>(capacity_levels.size()) != n)
    throw std::invalid_argument("one capacity per firm required");
  const ToUSchedule& sched = inst.schedule();
  const int trading = sched.trading_periods();
  const double delta = inst.delta();
  const double off = static_cast<double>(sched.off_peak_tenths());

  std::size_t state_count = 1, combo_count = 1;
  for (int f = 0; f < n; ++f) {
    state_count *= static_cast<std::size_t>(capacity_levels[static_cast<std::size_t>(f)]) + 1;
    combo_count *= inst.firm_pmf(f)[1].size();
  }
  if (static_cast<double>(state_count) * static_cast<double>(combo_count) * state_count *
          static_cast<double>(trading) >
      5e8)
    throw std::runtime_error("joint state space too large for exhaustive search");

  // Joint state encoded in mixed radix over per-firm levels.
  std::vector<int> radix(static_cast<std::size_t>(n));
  for (int f = 0; f < n; ++f)
    radix[static_cast<std::size_t>(f)] = capacity_levels[static_cast<std::size_t>(f)] + 1;
  auto encode = [&](const std::vector<int>& s) {
    std::size_t code = 0;
    for (int f = n - 1; f >= 0; --f)
      code = code * static_cast<std::size_t>(radix[static_cast<std::size_t>(f)]) +
             static_cast<std::size_t>(s[static_cast<std::size_t>(f)]);
    return code;
  };
  auto decode = [&](std::size_t code) {
    std::vector<int> s(static_cast<std::size_t>(n));
    for (int f = 0; f < n; ++f) {
      s[static_cast<std::size_t>(f)] =
          static_cast<int>(code % static_cast<std::size_t>(radix[static_cast<std::size_t>(f)]));
      code /= static_cast<std::size_t>(radix[static_cast<std::size_t>(f)]);
    }
    return s;
  };

  std::vector<double> value(state_count);
  for (std::size_t code = 0; code < state_count; ++code) {
    const auto s = decode(code);
    double refill = 0.0;
    for (int f = 0; f < n; ++f)
      refill += static_cast<double>(capacity_levels[static_cast<std::size_t>(f)] -
                                    s[static_cast<std::size_t>(f)]);
    value[code] = off * refill * delta;
  }

  for (int k = trading; k >= 1; --k) {
    const double rate = static_cast<double>(sched.rate_tenths(k));
    std::vector<double> next(state_count, 0.0);
    for (std::size_t code = 0; code < state_count; ++code) {
      const auto s = decode(code);
      double expect = 0.0;
      // Enumerate the joint demand combo across firms.
      std::vector<std::size_t> y(static_cast<std::size_t>(n), 0);
      for (;;) {
        double py = 1.0;
        int y_total = 0;
        for (int f = 0; f < n; ++f) {
          py *= inst.firm_pmf(f)[static_cast<std::size_t>(k)][y[static_cast<std::size_t>(f)]];
          y_total += static_cast<int>(y[static_cast<std::size_t>(f)]);
        }
        if (py > 0.0) {
          // Enumerate per-firm discharges.
          std::vector<int> d(static_cast<std::size_t>(n), 0);
          double best = -1.0;
          for (;;) {
            int d_total = 0;
            bool feasible = true;
            for (int f = 0; f < n; ++f) {
              const int df = d[static_cast<std::size_t>(f)];
              if (df > s[static_cast<std::size_t>(f)] ||
                  (!sharing_enabled && df > static_cast<int>(y[static_cast<std::size_t>(f)])))
                feasible = false;
              d_total += df;
            }
            if (feasible && d_total <= y_total) {
              auto s2 = s;
              for (int f = 0; f < n; ++f) s2[static_cast<std::size_t>(f)] -= d[static_cast<std::size_t>(f)];
              const double c = rate * static_cast<double>(y_total - d_total) * delta +
                               value[encode(s2)];
              if (best < 0.0 || c < best) best = c;
            }
            int f = 0;
            for (; f < n; ++f) {
              if (d[static_cast<std::size_t>(f)] < s[static_cast<std::size_t>(f)]) {
                ++d[static_cast<std::size_t>(f)];
                break;
              }
              d[static_cast<std::size_t>(f)] = 0;
            }
            if (f == n) break;
          }
          expect += py * best;
        }
        int f = 0;
        for (; f < n; ++f) {
          if (y[static_cast<std::size_t>(f)] + 1 <
              inst.firm_pmf(f)[static_cast<std::size_t>(k)].size()) {
            ++y[static_cast<std::size_t>(f)];
            break;
          }
          y[static_cast<std::size_t>(f)] = 0;
        }
        if (f == n) break;
      }
      next[code] = expect;
    }
    value = std::move(next);
  }

  std::vector<int> full(static_cast<std::size_t>(n));
  for (int f = 0; f < n; ++f) full[static_cast<std::size_t>(f)] = capacity_levels[static_cast<std::size_t>(f)];
  double tenths = value[encode(full)] + off * inst.off_peak_mean_kwh();
  for (int f = 0; f < n; ++f)
    tenths += static_cast<double>(sched.storage_cost_tenths()) *
              static_cast<double>(capacity_levels[static_cast<std::size_t>(f)]) * delta;
  return tenths / 10.0;
}

// --- hindsight dispatch ----------------------------------------------------------

double offline_optimal_cost(const std::vector<double>& demand_by_flat, double capacity_kwh,
                            const ToUSchedule& sched, const EfficiencyPair& eff) {
  const int trading = sched.trading_periods();
  if (static_cast<int>(demand_by_flat.size()) != trading + 1)
    throw std::invalid_argument("demand vector must cover off-peak plus every trading period");
  if (capacity_kwh < 0.0) throw std::invalid_argument("capacity must be nonnegative");

  const double off = static_cast<double>(sched.off_peak_tenths());
  const double floor = eff.effective_floor(off);

  std::vector<int> order(static_cast<std::size_t>(trading));
  std::iota(order.begin(), order.end(), 1);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return sched.rate_tenths(a) > sched.rate_tenths(b); });

  double deliverable = capacity_kwh * eff.eta_out;
  double tenths = off * demand_by_flat[0];
  std::vector<double> served(static_cast<std::size_t>(trading) + 1, 0.0);
  for (int flat : order) {
    if (static_cast<double>(sched.rate_tenths(flat)) <= floor) continue;
    const double take = std::min(demand_by_flat[static_cast<std::size_t>(flat)], deliverable);
    served[static_cast<std::size_t>(flat)] = take;
    deliverable -= take;
  }
  double delivered_total = 0.0;
  for (int flat = 1; flat <= trading; ++flat) {
    const std::size_t i = static_cast<std::size_t>(flat);
    tenths += static_cast<double>(sched.rate_tenths(flat)) * (demand_by_flat[i] - served[i]);
    delivered_total += served[i];
  }
  tenths += off * delivered_total / (eff.eta_in * eff.eta_out);  // refill the discharged cells
  return tenths / 10.0;
}

double offline_optimal_cost(const RealizedDay& realized, double capacity_kwh,
                            const ToUSchedule& sched, const EfficiencyPair& eff) {
  return offline_optimal_cost(realized.collective, capacity_kwh, sched, eff);
}

}  // namespace toushare
