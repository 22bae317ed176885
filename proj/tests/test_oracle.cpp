#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "toushare/demand.hpp"
#include "toushare/oracle.hpp"
#include "toushare/policy.hpp"
#include "toushare/schedule.hpp"

using namespace toushare;

namespace {

ToUSchedule three_tier() { return ToUSchedule::from_rates(13.0, {28.0}, {52.0}, 14.0); }
ToUSchedule two_tier() { return ToUSchedule::from_rates(13.0, {}, {52.0}, 14.0); }

std::vector<double> die_pmf() {
  return std::vector<double>(6, 1.0 / 6.0);
}

std::vector<double> zero_pmf() { return {1.0}; }

DiscretizedInstance die_newsvendor() {
  return DiscretizedInstance(two_tier(), 1.0, {{zero_pmf(), die_pmf()}}, 6);
}

DiscretizedInstance die_pair() {
  return DiscretizedInstance(three_tier(), 1.0, {{zero_pmf(), die_pmf(), die_pmf()}}, 12);
}

}  // namespace

TEST_CASE("hindsight dispatch fills the priciest periods first") {
  EfficiencyPair unit;
  const ToUSchedule sched = three_tier();
  const std::vector<double> day{0.0, 3.0, 4.0};

  // Five stored kWh cover the whole peak and a third of the ramp-up.
  CHECK(offline_optimal_cost(day, 5.0, sched, unit) == doctest::Approx(121.0).epsilon(1e-12));
  CHECK(offline_optimal_cost(day, 0.0, sched, unit) == doctest::Approx(292.0).epsilon(1e-12));
  // Past the day total, extra capacity is never cycled.
  CHECK(offline_optimal_cost(day, 7.0, sched, unit) == doctest::Approx(91.0).epsilon(1e-12));
  CHECK(offline_optimal_cost(day, 9.5, sched, unit) == doctest::Approx(91.0).epsilon(1e-12));

  // Against every integer split of the stored budget across the two periods.
  for (int c = 0; c <= 8; ++c) {
    double best = 1e18;
    for (int a1 = 0; a1 <= 3; ++a1)
      for (int a2 = 0; a2 <= 4; ++a2) {
        if (a1 + a2 > c) continue;
        best = std::min(best, (280.0 * (3 - a1) + 520.0 * (4 - a2) + 130.0 * (a1 + a2)) / 10.0);
      }
    CHECK(offline_optimal_cost(day, static_cast<double>(c), sched, unit) ==
          doctest::Approx(best).epsilon(1e-12));
  }
  for (double c = 0.0; c < 8.0; c += 0.5)
    CHECK(offline_optimal_cost(day, c + 0.5, sched, unit) <=
          offline_optimal_cost(day, c, sched, unit) + 1e-12);

  // Hindsight never loses to the online reservation policy on the same day.
  ReservationPolicy policy;
  policy.capacity_kwh = 5.0;
  policy.reservations_kwh = {240.0 / 39.0};
  CHECK(offline_optimal_cost(day, 5.0, sched, unit) <=
        simulate_standalone_day(policy, sched, day).total_cents + 1e-12);

  const RealizedDay split = RealizedDay::from_demand({{0.0, 1.0, 2.0}, {0.0, 2.0, 2.0}});
  CHECK(offline_optimal_cost(split, 5.0, sched, unit) ==
        doctest::Approx(121.0).epsilon(1e-12));

  CHECK_THROWS_AS(offline_optimal_cost({0.0, 1.0}, 2.0, sched, unit), std::invalid_argument);
  CHECK_THROWS_AS(offline_optimal_cost(day, -1.0, sched, unit), std::invalid_argument);
}

TEST_CASE("hindsight dispatch respects conversion losses and the effective floor") {
  EfficiencyPair lossy{0.9, 0.8};
  // Peak demand 4 kWh consumes the whole 5-kWh store at 80% discharge.
  CHECK(offline_optimal_cost({0.0, 3.0, 4.0}, 5.0, three_tier(), lossy) ==
        doctest::Approx(84.0 + 13.0 * 5.0 / 0.9).epsilon(1e-12));

  // A ramp-up rate below the refill break-even is never served from storage.
  const ToUSchedule cheap_ru = ToUSchedule::from_rates(13.0, {15.0}, {52.0}, 1.0);
  CHECK(offline_optimal_cost({0.0, 2.0, 1.0}, 10.0, cheap_ru, lossy) ==
        doctest::Approx(30.0 + 13.0 * (1.0 / 0.8) / 0.9).epsilon(1e-12));
}

TEST_CASE("value iteration reproduces the newsvendor optimum") {
  const DiscretizedInstance inst = die_newsvendor();
  const DpSolution dp = dp_optimal_policy(inst);

  CHECK(dp.best_capacity_kwh == 3.0);
  CHECK(dp.expected_cost_cents == doctest::Approx(94.0).epsilon(1e-9));
  CHECK(dp.cost_by_capacity_cents[0] == doctest::Approx(130.0).epsilon(1e-9));
  CHECK(dp.cost_by_capacity_cents[3] == doctest::Approx(94.0).epsilon(1e-9));
  CHECK(dp.ru_thresholds_kwh.empty());
  CHECK(dp.thresholds_consistent);
  CHECK(dp_expected_cost(inst, 3) == doctest::Approx(94.0).epsilon(1e-9));
  CHECK(dp_expected_cost(inst, 0) == doctest::Approx(130.0).epsilon(1e-9));

  // The engine's closed-loop solution lands on the same point.
  EfficiencyPair unit;
  ArbitrageEngine engine(two_tier(), inst.to_demand_model(), unit);
  REQUIRE(engine.exact_mode());
  CHECK(engine.solve_capacity({}).capacity_kwh == dp.best_capacity_kwh);
}

TEST_CASE("value iteration on the two-period instance matches the reservation engine") {
  const DiscretizedInstance inst = die_pair();
  const DpSolution dp = dp_optimal_policy(inst);
  CHECK(dp.best_capacity_kwh == 4.0);
  REQUIRE(dp.ru_thresholds_kwh.size() == 1);
  CHECK(dp.ru_thresholds_kwh[0] == 3.0);
  CHECK(dp.thresholds_consistent);

  EfficiencyPair unit;
  ArbitrageEngine engine(three_tier(), inst.to_demand_model(), unit);
  ReservationPolicy policy;
  policy.reservations_kwh = {3.0};
  policy.capacity_kwh = 4.0;
  const double engine_total = engine.exact_policy_cost(policy, 0.0) + 14.0 * 4.0;
  CHECK(engine_total == doctest::Approx(dp.expected_cost_cents).epsilon(1e-9));

  // No reservation level beats the DP optimum at the same capacity.
  for (double m = 0.0; m <= 5.0; m += 1.0) {
    ReservationPolicy alt;
    alt.reservations_kwh = {m};
    alt.capacity_kwh = 4.0;
    CHECK(dp_expected_cost(inst, 4) <=
          engine.exact_policy_cost(alt, 0.0) + 14.0 * 4.0 + 1e-9);
  }
}

TEST_CASE("value iteration with no demand buys nothing") {
  const DiscretizedInstance inst(two_tier(), 1.0, {{zero_pmf(), zero_pmf()}}, 3);
  const DpSolution dp = dp_optimal_policy(inst);
  CHECK(dp.best_capacity_kwh == 0.0);
  CHECK(dp.expected_cost_cents == 0.0);
  REQUIRE(dp.cost_by_capacity_cents.size() == 4);
  // Idle storage still pays the amortized 14 cents per kWh-day it occupies.
  for (int c = 0; c <= 3; ++c)
    CHECK(dp.cost_by_capacity_cents[static_cast<std::size_t>(c)] ==
          doctest::Approx(14.0 * c).epsilon(1e-12));
  CHECK(dp.thresholds_consistent);
}

TEST_CASE("joint-state enumeration separates pooled from private storage") {
  // Firm a: fair-die peak demand. Firm b: no demand, all the storage.
  const DiscretizedInstance inst(two_tier(), 1.0,
                                 {{zero_pmf(), die_pmf()}, {zero_pmf(), zero_pmf()}}, 6);
  const double shared = exhaustive_social_optimum(inst, {0, 3}, true);
  const double isolated = exhaustive_social_optimum(inst, {0, 3}, false);

  // Pooled, b's storage serves a's demand: the collective newsvendor cost.
  CHECK(shared == doctest::Approx(94.0).epsilon(1e-9));
  // Isolated, b may never discharge past its own zero demand.
  CHECK(isolated == doctest::Approx(130.0 + 42.0).epsilon(1e-9));

  // A single decision-maker gains nothing from the sharing flag.
  const DiscretizedInstance solo = die_newsvendor();
  CHECK(exhaustive_social_optimum(solo, {3}, true) ==
        doctest::Approx(dp_expected_cost(solo, 3)).epsilon(1e-9));
  CHECK(exhaustive_social_optimum(solo, {3}, false) ==
        doctest::Approx(dp_expected_cost(solo, 3)).epsilon(1e-9));

  // Merging two live firms' capacity reproduces the collective optimum.
  const DiscretizedInstance pair = die_pair();
  const double merged = exhaustive_social_optimum(
      DiscretizedInstance(three_tier(), 1.0,
                          {{zero_pmf(), die_pmf(), die_pmf()},
                           {zero_pmf(), zero_pmf(), zero_pmf()}},
                          12),
      {1, 3}, true);
  CHECK(merged == doctest::Approx(dp_expected_cost(pair, 4)).epsilon(1e-9));

  CHECK_THROWS_AS(exhaustive_social_optimum(inst, {0}, true), std::invalid_argument);
  const DiscretizedInstance four(
      two_tier(), 1.0,
      {{zero_pmf(), die_pmf()}, {zero_pmf(), die_pmf()}, {zero_pmf(), die_pmf()},
       {zero_pmf(), die_pmf()}},
      6);
  CHECK_THROWS_AS(exhaustive_social_optimum(four, {1, 1, 1, 1}, true), std::invalid_argument);
}

TEST_CASE("discretized instances round-trip through JSON") {
  const DiscretizedInstance inst = refs::random_unit_grid_instance(12);
  const std::string text = inst.to_json();
  const DiscretizedInstance back = DiscretizedInstance::from_json(text);
  CHECK(back.to_json() == text);
  CHECK(back.delta() == inst.delta());
  CHECK(back.capacity_levels() == inst.capacity_levels());
  CHECK(back.firm_count() == inst.firm_count());
  CHECK(back.firm_pmf(0) == inst.firm_pmf(0));
  CHECK(back.schedule().trading_periods() == inst.schedule().trading_periods());
  CHECK(back.schedule().off_peak_tenths() == inst.schedule().off_peak_tenths());
}

TEST_CASE("the reservation engine is cost-optimal on random discrete instances") {
  EfficiencyPair unit;
  int invested = 0, priced_out = 0, with_ramp_up = 0, floor_bound = 0;
  for (std::uint64_t seed = 1; seed <= 25; ++seed) {
    CAPTURE(seed);
    const DiscretizedInstance inst = refs::random_unit_grid_instance(seed);
    const DpSolution dp = dp_optimal_policy(inst);
    CHECK(dp.thresholds_consistent);

    ArbitrageEngine engine(inst.schedule(), inst.to_demand_model(), unit);
    REQUIRE(engine.exact_mode());
    const ReservationSolve res = engine.solve_reservations();
    const CapacitySolve cap = engine.solve_capacity(res.reservations_kwh);
    const double amortized_per_kwh =
        static_cast<double>(inst.schedule().storage_cost_tenths()) / 10.0;

    CHECK(cap.capacity_kwh == dp.best_capacity_kwh);

    // The solved policy must hit the DP optimum in expected cost. Threshold
    // values themselves are compared through cost, not elementwise: a floor
    // that never binds (ample capacity, or capacity below the fixed point)
    // admits many equivalent parameterizations.
    ReservationPolicy policy;
    policy.capacity_kwh = cap.capacity_kwh;
    policy.reservations_kwh = res.reservations_kwh;
    const double engine_total =
        engine.exact_policy_cost(policy, inst.off_peak_mean_kwh()) +
        amortized_per_kwh * cap.capacity_kwh;
    CHECK(engine_total == doctest::Approx(dp.expected_cost_cents).epsilon(1e-9));

    // The DP's own extracted thresholds describe the same dispatch.
    ReservationPolicy dp_policy;
    dp_policy.capacity_kwh = dp.best_capacity_kwh;
    dp_policy.reservations_kwh = dp.ru_thresholds_kwh;
    const double dp_total =
        engine.exact_policy_cost(dp_policy, inst.off_peak_mean_kwh()) +
        amortized_per_kwh * dp.best_capacity_kwh;
    CHECK(dp_total == doctest::Approx(dp.expected_cost_cents).epsilon(1e-9));

    if (cap.capacity_kwh > 0.0) ++invested; else ++priced_out;
    if (inst.schedule().ramp_up_count() > 0) ++with_ramp_up;
    if (!res.reservations_kwh.empty() && cap.capacity_kwh < res.reservations_kwh.front())
      ++floor_bound;
  }
  // The generator must exercise both investment regimes, real ramp-ups, and
  // optima where the capacity lands below the unconstrained reservation.
  CHECK(invested >= 5);
  CHECK(priced_out >= 1);
  CHECK(with_ramp_up >= 5);
  CHECK(floor_bound >= 3);
}
