#include "toushare/game.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "json.hpp"
#include "toushare/market.hpp"
#include "toushare/parallel.hpp"
#include "toushare/rng.hpp"
#include "toushare/stats.hpp"

namespace toushare {

namespace {

constexpr std::uint64_t kFreshSalt = 0x517cc1b727220a95ULL;

std::vector<int> flats_through(int last) {
  std::vector<int> flats(static_cast<std::size_t>(last));
  std::iota(flats.begin(), flats.end(), 1);
  return flats;
}

SampleMatrix sum_matrices(const std::vector<SampleMatrix>& per_firm) {
  if (per_firm.empty()) throw std::invalid_argument("no firms to sum");
  SampleMatrix out(per_firm.front().rows, per_firm.front().cols);
  for (const auto& m : per_firm)
    for (std::size_t k = 0; k < out.a.size(); ++k) out.a[k] += m.a[k];
  return out;
}

// Sorted samples of the collective sum over trading periods 1..last.
std::vector<double> sorted_partial_sums(const SampleMatrix& collective, int last) {
  std::vector<double> sums(collective.rows, 0.0);
  for (std::size_t r = 0; r < collective.rows; ++r) {
    const double* row = collective.row(r);
    double s = 0.0;
    for (int c = 0; c < last; ++c) s += row[c];
    sums[r] = s;
  }
  std::sort(sums.begin(), sums.end());
  return sums;
}

std::vector<PrefixConstraint> prefix_constraints(const ToUSchedule& sched,
                                                 const std::vector<double>& reservations_kwh,
                                                 double capacity_kwh, double eta_out) {
  std::vector<PrefixConstraint> cons;
  for (int n = 1; n <= sched.ramp_up_count(); ++n) {
    PrefixConstraint c;
    c.flat_periods = flats_through(n);
    c.upper_bound = (capacity_kwh - reservations_kwh[static_cast<std::size_t>(n - 1)]) * eta_out;
    cons.push_back(std::move(c));
  }
  return cons;
}

// Demanding more conditional hits than ~1% of the pool forces the band so
// wide that the mean is dragged toward the bulk of the density; the bias
// grows with the square of the width, so keep the band narrow and let the
// standard error carry the uncertainty instead.
BandOptions scaled_band(const BandOptions& band, std::size_t samples) {
  BandOptions b = band;
  b.min_hits = std::min(b.min_hits, std::max<std::size_t>(50, samples / 100));
  return b;
}

AlignmentVerdict worse(AlignmentVerdict a, AlignmentVerdict b) {
  if (a == AlignmentVerdict::fail || b == AlignmentVerdict::fail) return AlignmentVerdict::fail;
  if (a == AlignmentVerdict::inconclusive || b == AlignmentVerdict::inconclusive)
    return AlignmentVerdict::inconclusive;
  return AlignmentVerdict::pass;
}

AlignmentVerdict slope_verdict(double slope, double se) {
  if (slope < -2.0 * se) return AlignmentVerdict::fail;
  if (slope > 2.0 * se) return AlignmentVerdict::pass;
  return AlignmentVerdict::inconclusive;
}

// Slope sweep shared by check_alignment and solve_equilibrium (which already
// holds drawn matrices). grid_y is in energy units; empty means interior
// quantiles of each tier's conditioning sum.
AlignmentReport alignment_on(const ToUSchedule& sched, const EfficiencyPair& eff,
                             const std::vector<SampleMatrix>& per_firm,
                             const SampleMatrix& collective,
                             const std::vector<double>& reservations_kwh,
                             const std::vector<double>& grid_y, const BandOptions& band_in) {
  AlignmentReport rep;
  const BandOptions band = scaled_band(band_in, per_firm.front().rows);
  const int n = static_cast<int>(per_firm.size());
  const int p = sched.ramp_up_count();
  const int q = sched.ramp_down_count();
  if (n <= 1) {
    rep.notes.push_back("single firm: its conditional share is the whole sum, slope 1");
    return rep;
  }

  // With few rows the bands must widen to collect min_hits, so a fine grid
  // would only produce overlapping bands; space the points by band mass.
  const bool coarse = per_firm.front().rows < 20 * band.min_hits;

  for (int j = 1; j <= q; ++j) {
    const auto flats = flats_through(p + j);
    std::vector<double> points = grid_y;
    if (points.empty()) {
      const auto sums = sorted_partial_sums(collective, p + j);
      if (coarse)
        for (double prob : {0.25, 0.5, 0.75}) points.push_back(quantile_sorted(sums, prob));
      else
        for (double prob : {0.2, 0.35, 0.5, 0.65, 0.8})
          points.push_back(quantile_sorted(sums, prob));
    }
    std::sort(points.begin(), points.end());
    points.erase(std::unique(points.begin(), points.end(),
                             [](double a, double b) { return std::abs(a - b) < 1e-12; }),
                 points.end());
    if (points.size() < 2) {
      rep.notes.push_back("tier " + std::to_string(j) +
                          ": conditioning sum too degenerate for a slope grid");
      rep.overall = worse(rep.overall, AlignmentVerdict::inconclusive);
      continue;
    }

    for (int i = 0; i < n; ++i) {
      std::vector<std::pair<double, BandMeanResult>> usable;
      for (double r_y : points) {
        try {
          auto cons = prefix_constraints(sched, reservations_kwh, r_y / eff.eta_out, eff.eta_out);
          usable.emplace_back(
              r_y, conditional_mean_band_on(per_firm, i, flats, flats, r_y, cons, band));
        } catch (const std::runtime_error&) {
          rep.notes.push_back("firm " + std::to_string(i) + " tier " + std::to_string(j) +
                              ": grid point " + std::to_string(r_y / eff.eta_out) +
                              " kWh trimmed (conditioning event too rare)");
        }
      }
      if (usable.size() < 2) {
        rep.notes.push_back("firm " + std::to_string(i) + " tier " + std::to_string(j) +
                            ": fewer than two usable grid points, slope unresolved");
        rep.overall = worse(rep.overall, AlignmentVerdict::inconclusive);
        continue;
      }
      for (std::size_t g = 0; g + 1 < usable.size(); ++g) {
        const auto& [ra, ba] = usable[g];
        const auto& [rb, bb] = usable[g + 1];
        // Wide or edge-truncated bands center away from the nominal grid
        // point, so the realized conditioning means are the honest abscissas.
        const double dr = bb.conditioning_mean - ba.conditioning_mean;
        AlignmentSlope s;
        s.firm = i;
        s.rd_index = j;
        s.r_lo_kwh = ra / eff.eta_out;
        s.r_hi_kwh = rb / eff.eta_out;
        if (dr > 0.25 * (rb - ra)) {
          s.slope = (bb.value - ba.value) / dr;
          s.std_error = std::hypot(ba.std_error, bb.std_error) / dr;
          s.verdict = slope_verdict(s.slope, s.std_error);
        } else {
          s.verdict = AlignmentVerdict::inconclusive;
          rep.notes.push_back("firm " + std::to_string(i) + " tier " + std::to_string(j) +
                              ": bands around adjacent grid points overlap almost fully, slope "
                              "unresolved");
        }
        rep.overall = worse(rep.overall, s.verdict);
        rep.slopes.push_back(s);
      }
    }
  }
  return rep;
}

// [day][firm] daily cost in cents, amortized capacity included.
std::vector<std::vector<double>> settled_costs(const SharingMarket& market,
                                               const std::vector<RealizedDay>& days,
                                               const std::vector<double>& capacities_kwh) {
  const double pis_tenths = market.schedule().storage_cost_tenths();
  std::vector<std::vector<double>> cost(days.size());
  parallel_for(days.size(), [&](std::size_t lo, std::size_t hi) {
    for (std::size_t d = lo; d < hi; ++d) {
      const auto outcome = market.settle_day(days[d], capacities_kwh);
      auto& row = cost[d];
      row.resize(outcome.firms.size());
      for (std::size_t i = 0; i < outcome.firms.size(); ++i)
        row[i] = outcome.firms[i].total_cents + pis_tenths * capacities_kwh[i] / 10.0;
    }
  });
  return cost;
}

std::vector<RealizedDay> draw_days(const DemandModel& model, std::size_t days,
                                   std::uint64_t seed) {
  const SampleMode mode = model.day_aligned() ? SampleMode::paired : SampleMode::independent;
  Rng rng(seed);
  std::vector<RealizedDay> out;
  out.reserve(days);
  for (std::size_t d = 0; d < days; ++d) out.push_back(model.sample_day(rng, mode));
  return out;
}

Estimate paired_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double mean = 0.0;
  for (std::size_t d = 0; d < a.size(); ++d) mean += a[d] - b[d];
  mean /= static_cast<double>(a.size());
  double var = 0.0;
  for (std::size_t d = 0; d < a.size(); ++d) {
    const double dev = (a[d] - b[d]) - mean;
    var += dev * dev;
  }
  var /= static_cast<double>(a.size() > 1 ? a.size() - 1 : 1);
  return {mean, std::sqrt(var / static_cast<double>(a.size()))};
}

}  // namespace

std::string to_string(AlignmentVerdict v) {
  switch (v) {
    case AlignmentVerdict::pass: return "pass";
    case AlignmentVerdict::inconclusive: return "inconclusive";
    case AlignmentVerdict::fail: return "fail";
  }
  return "?";
}

double collective_capacity(const ToUSchedule& sched, const DemandModel& collective,
                           const EfficiencyPair& eff, const McOptions& mc,
                           std::vector<double>* reservations_out,
                           std::vector<std::string>* warnings_out) {
  ArbitrageEngine engine(sched, collective, eff, mc);
  auto res = engine.solve_reservations();
  auto cap = engine.solve_capacity(res.reservations_kwh);
  if (reservations_out) *reservations_out = res.reservations_kwh;
  if (warnings_out) {
    warnings_out->insert(warnings_out->end(), res.warnings.begin(), res.warnings.end());
    warnings_out->insert(warnings_out->end(), cap.warnings.begin(), cap.warnings.end());
  }
  return cap.capacity_kwh;
}

EquilibriumResult solve_equilibrium(const ToUSchedule& sched, const DemandModel& firms,
                                    const EfficiencyPair& eff, const McOptions& mc,
                                    const BandOptions& band) {
  if (firms.firm_count() < 1) throw std::invalid_argument("equilibrium needs at least one firm");
  EquilibriumResult out;
  for (const auto& f : firms.firms()) out.firm_ids.push_back(f.firm_id);

  // One set of per-firm paths; the capacity root and the band conditioning
  // must see the same days or the allocation drifts off the root.
  const auto per_firm = firms.draw_per_firm(mc.samples, mc.seed);
  const auto collective = sum_matrices(per_firm);
  ArbitrageEngine engine(sched, collective, eff);
  auto res = engine.solve_reservations();
  auto cap = engine.solve_capacity(res.reservations_kwh);
  out.reservations_kwh = res.reservations_kwh;
  out.collective_capacity_kwh = cap.capacity_kwh;
  out.warnings.insert(out.warnings.end(), res.warnings.begin(), res.warnings.end());
  out.warnings.insert(out.warnings.end(), cap.warnings.begin(), cap.warnings.end());

  const int p = sched.ramp_up_count();
  const int q = sched.ramp_down_count();
  const double cc = cap.capacity_kwh;
  const double eo = eff.eta_out;

  // Tier weights: price drop into the next tier times the density of the
  // collective sum through that tier at the root. The sentinel rate after the
  // last tier is the efficiency-adjusted off-peak value of a stored kWh.
  std::vector<double> raw_rho(static_cast<std::size_t>(q), 0.0);
  double rho_sum = 0.0;
  for (int l = 1; l <= q; ++l) {
    const double next_tenths =
        l < q ? sched.rate_tenths(p + l + 1) : engine.effective_floor_tenths();
    const double drop = sched.rate_tenths(p + l) - next_tenths;
    if (drop <= 0.0) {
      out.warnings.push_back("tier " + std::to_string(l) +
                             " has no price drop after efficiency; weight zero");
      continue;
    }
    const auto sums = sorted_partial_sums(collective, p + l);
    raw_rho[static_cast<std::size_t>(l - 1)] = drop * histogram_density(sums, cc * eo);
    rho_sum += raw_rho[static_cast<std::size_t>(l - 1)];
  }
  if (rho_sum <= 0.0) throw std::runtime_error("all tier weights vanished; schedule degenerate");
  out.rho_weights.resize(static_cast<std::size_t>(q));
  for (int l = 0; l < q; ++l)
    out.rho_weights[static_cast<std::size_t>(l)] = raw_rho[static_cast<std::size_t>(l)] / rho_sum;
  if (p == 0 && q == 2)
    out.lambda_weights = std::make_pair(out.rho_weights[0], out.rho_weights[1]);

  const int n = firms.firm_count();
  out.allocations_kwh.assign(static_cast<std::size_t>(n), 0.0);
  out.allocation_se_kwh.assign(static_cast<std::size_t>(n), 0.0);

  if (cc <= 0.0) {
    out.warnings.push_back("collective capacity is zero; all allocations are zero");
    out.alignment = alignment_on(sched, eff, per_firm, collective, res.reservations_kwh, {}, band);
    return out;
  }

  const auto cons = prefix_constraints(sched, res.reservations_kwh, cc, eo);
  const double r_y = cc * eo;
  const BandOptions alloc_band = scaled_band(band, collective.rows);
  for (int i = 0; i < n; ++i) {
    double alloc = 0.0, var = 0.0;
    for (int l = 1; l <= q; ++l) {
      const double w = out.rho_weights[static_cast<std::size_t>(l - 1)];
      if (w == 0.0) continue;
      const auto flats = flats_through(p + l);
      const auto b = conditional_mean_band_on(per_firm, i, flats, flats, r_y, cons, alloc_band);
      alloc += w * b.value / eo;
      var += (w * b.std_error / eo) * (w * b.std_error / eo);
    }
    out.allocations_kwh[static_cast<std::size_t>(i)] = alloc;
    out.allocation_se_kwh[static_cast<std::size_t>(i)] = std::sqrt(var);
  }

  const double raw_sum =
      std::accumulate(out.allocations_kwh.begin(), out.allocations_kwh.end(), 0.0);
  const double factor = raw_sum > 0.0 ? cc / raw_sum : 0.0;
  if (!(factor >= 0.95 && factor <= 1.05))
    throw std::runtime_error("allocation renormalization factor " + std::to_string(factor) +
                             " outside [0.95, 1.05]; band estimates unusable");
  out.renormalization = factor;
  for (auto& a : out.allocations_kwh) a *= factor;
  for (auto& se : out.allocation_se_kwh) se *= factor;

  // First-order residual. Parametric models get an independent sample set and
  // the combined error carries both curves' noise at the root; day-aligned
  // models already enumerate every historical day, so a second draw would be
  // the identical matrix and only the root curve's own error applies.
  {
    const auto root_curve = engine.premium_curve(0, res.reservations_kwh, true);
    const Estimate solved = root_curve.estimate(cc);
    if (firms.day_aligned()) {
      out.foc_residual_cents = (sched.storage_cost_tenths() - solved.value) / 10.0;
      out.foc_residual_se = solved.std_error / 10.0;
    } else {
      ArbitrageEngine fresh(sched, firms.draw_collective(mc.samples, mc.seed ^ kFreshSalt), eff);
      const auto fresh_curve = fresh.premium_curve(0, res.reservations_kwh, true);
      const Estimate at_root = fresh_curve.estimate(cc);
      out.foc_residual_cents = (sched.storage_cost_tenths() - at_root.value) / 10.0;
      out.foc_residual_se = std::hypot(at_root.std_error, solved.std_error) / 10.0;
    }
  }

  out.alignment = alignment_on(sched, eff, per_firm, collective, res.reservations_kwh, {}, band);
  return out;
}

AlignmentReport check_alignment(const ToUSchedule& sched, const DemandModel& firms,
                                const EfficiencyPair& eff, std::vector<double> capacity_grid_kwh,
                                const McOptions& mc, const BandOptions& band) {
  const auto per_firm = firms.draw_per_firm(mc.samples, mc.seed);
  const auto collective = sum_matrices(per_firm);
  std::vector<double> reservations;
  if (sched.ramp_up_count() > 0) {
    ArbitrageEngine engine(sched, collective, eff);
    reservations = engine.solve_reservations().reservations_kwh;
  }
  for (auto& r : capacity_grid_kwh) r *= eff.eta_out;
  return alignment_on(sched, eff, per_firm, collective, reservations, capacity_grid_kwh, band);
}

BestResponseCertificate verify_best_response(int firm, const EquilibriumResult& eq,
                                             const ToUSchedule& sched, const DemandModel& firms,
                                             const EfficiencyPair& eff, std::size_t days,
                                             std::uint64_t seed, const McOptions& mc) {
  if (firm < 0 || firm >= firms.firm_count()) throw std::invalid_argument("firm out of range");
  if (static_cast<int>(eq.allocations_kwh.size()) != firms.firm_count())
    throw std::invalid_argument("equilibrium allocation count does not match the model");
  if (days < 2) throw std::invalid_argument("need at least two days for a paired comparison");

  BestResponseCertificate cert;
  cert.firm = firm;
  cert.foc_residual_cents = eq.foc_residual_cents;
  cert.foc_residual_se = eq.foc_residual_se;
  cert.foc_ok = std::abs(eq.foc_residual_cents) < 3.0 * eq.foc_residual_se;

  SharingMarket market(sched, firms, eff, mc);
  const auto sims = draw_days(firms, days, seed);

  const std::vector<double> multipliers = {1.0, 0.5, 0.8, 0.9, 1.1, 1.2, 1.5};
  std::vector<std::vector<double>> firm_cost(multipliers.size());
  // Everyone shares the pre-drawn day stream, so deviations are paired; the
  // reservation floors do not depend on capacity, so one market serves all.
  parallel_for(
      multipliers.size(),
      [&](std::size_t lo, std::size_t hi) {
        for (std::size_t m = lo; m < hi; ++m) {
          auto caps = eq.allocations_kwh;
          caps[static_cast<std::size_t>(firm)] *= multipliers[m];
          const auto cost = settled_costs(market, sims, caps);
          auto& col = firm_cost[m];
          col.resize(sims.size());
          for (std::size_t d = 0; d < sims.size(); ++d)
            col[d] = cost[d][static_cast<std::size_t>(firm)];
        }
      },
      1);

  cert.equilibrium_cost_cents =
      std::accumulate(firm_cost[0].begin(), firm_cost[0].end(), 0.0) /
      static_cast<double>(days);
  cert.passed = cert.foc_ok;
  for (std::size_t m = 1; m < multipliers.size(); ++m) {
    DeviationPoint pt;
    pt.multiplier = multipliers[m];
    pt.capacity_kwh = eq.allocations_kwh[static_cast<std::size_t>(firm)] * multipliers[m];
    pt.mean_cost_cents = std::accumulate(firm_cost[m].begin(), firm_cost[m].end(), 0.0) /
                         static_cast<double>(days);
    const Estimate diff = paired_diff(firm_cost[m], firm_cost[0]);
    pt.diff_cents = diff.value;
    pt.diff_se = diff.std_error;
    pt.weakly_costlier = diff.value >= -3.0 * diff.std_error;
    cert.passed = cert.passed && pt.weakly_costlier;
    cert.deviations.push_back(pt);
  }
  return cert;
}

CoalitionCertificate coalition_stability(const std::vector<std::vector<int>>& partition,
                                         const EquilibriumResult& eq, const ToUSchedule& sched,
                                         const DemandModel& firms, const EfficiencyPair& eff,
                                         std::size_t days, std::uint64_t seed,
                                         const McOptions& mc) {
  const int n = firms.firm_count();
  if (static_cast<int>(eq.allocations_kwh.size()) != n)
    throw std::invalid_argument("equilibrium allocation count does not match the model");
  std::vector<int> seen(static_cast<std::size_t>(n), 0);
  for (const auto& block : partition)
    for (int i : block) {
      if (i < 0 || i >= n) throw std::invalid_argument("partition member out of range");
      if (seen[static_cast<std::size_t>(i)]++) throw std::invalid_argument("partition overlaps");
    }
  if (std::accumulate(seen.begin(), seen.end(), 0) != n)
    throw std::invalid_argument("partition must cover every firm");
  if (days < 2) throw std::invalid_argument("need at least two days for a paired comparison");

  SharingMarket market(sched, firms, eff, mc);
  const auto sims = draw_days(firms, days, seed);
  const auto grand = settled_costs(market, sims, eq.allocations_kwh);
  const double pis_tenths = sched.storage_cost_tenths();
  const int flats = sched.trading_periods() + 1;

  CoalitionCertificate cert;
  cert.stable = true;
  for (const auto& block : partition) {
    CoalitionCheck check;
    check.members = block;

    std::vector<double> grand_cost(sims.size(), 0.0);
    for (std::size_t d = 0; d < sims.size(); ++d)
      for (int i : block) grand_cost[d] += grand[d][static_cast<std::size_t>(i)];

    // Secession: the block pools only its own demand, with capacity and
    // floors re-solved on that sub-model, over the same realized days.
    std::vector<double> sub_res;
    const DemandModel sub = firms.subset(block);
    const double sub_cap = collective_capacity(sched, sub, eff, mc, &sub_res, nullptr);
    ReservationPolicy policy{sub_cap, sub_res, eff};
    std::vector<double> defect_cost(sims.size(), 0.0);
    parallel_for(sims.size(), [&](std::size_t lo, std::size_t hi) {
      for (std::size_t d = lo; d < hi; ++d) {
        std::vector<double> merged(static_cast<std::size_t>(flats), 0.0);
        for (int i : block)
          for (int t = 0; t < flats; ++t)
            merged[static_cast<std::size_t>(t)] +=
                sims[d].demand[static_cast<std::size_t>(i)][static_cast<std::size_t>(t)];
        defect_cost[d] = simulate_standalone_day(policy, sched, merged).total_cents +
                         pis_tenths * sub_cap / 10.0;
      }
    });

    check.defect_capacity_kwh = sub_cap;
    check.grand_cost_cents = std::accumulate(grand_cost.begin(), grand_cost.end(), 0.0) /
                             static_cast<double>(days);
    check.defect_cost_cents = std::accumulate(defect_cost.begin(), defect_cost.end(), 0.0) /
                              static_cast<double>(days);
    const Estimate diff = paired_diff(defect_cost, grand_cost);
    check.diff_se = diff.std_error;
    check.stable = diff.value >= -3.0 * diff.std_error;
    cert.stable = cert.stable && check.stable;
    cert.checks.push_back(std::move(check));
  }
  return cert;
}

std::string equilibrium_report_json(const EquilibriumResult& eq) {
  nlohmann::json j;
  j["collective_capacity_kwh"] = eq.collective_capacity_kwh;
  j["reservations_kwh"] = eq.reservations_kwh;
  nlohmann::json alloc = nlohmann::json::object();
  nlohmann::json alloc_se = nlohmann::json::object();
  for (std::size_t i = 0; i < eq.firm_ids.size(); ++i) {
    alloc[eq.firm_ids[i]] = eq.allocations_kwh[i];
    alloc_se[eq.firm_ids[i]] = eq.allocation_se_kwh[i];
  }
  j["allocations_kwh"] = alloc;
  j["allocation_se_kwh"] = alloc_se;
  j["rho_weights"] = eq.rho_weights;
  if (eq.lambda_weights)
    j["lambda_weights"] = {eq.lambda_weights->first, eq.lambda_weights->second};
  j["renormalization"] = eq.renormalization;
  j["foc_residual_cents"] = eq.foc_residual_cents;
  j["foc_residual_se"] = eq.foc_residual_se;
  nlohmann::json align;
  align["overall"] = to_string(eq.alignment.overall);
  align["notes"] = eq.alignment.notes;
  align["slopes"] = nlohmann::json::array();
  for (const auto& s : eq.alignment.slopes)
    align["slopes"].push_back({{"firm", s.firm},
                               {"rd_index", s.rd_index},
                               {"r_lo_kwh", s.r_lo_kwh},
                               {"r_hi_kwh", s.r_hi_kwh},
                               {"slope", s.slope},
                               {"std_error", s.std_error},
                               {"verdict", to_string(s.verdict)}});
  j["alignment"] = align;
  j["warnings"] = eq.warnings;
  return j.dump(2);
}

}  // namespace toushare
