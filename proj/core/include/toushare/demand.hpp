#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "toushare/rng.hpp"
#include "toushare/schedule.hpp"
#include "toushare/stats.hpp"

namespace toushare {

enum class DistKind { empirical, uniform, truncated_normal, log_normal, discrete };

// Per-period daily energy (kWh) for one firm. Continuous families are used
// for synthetic studies, empirical for metered data, discrete for exact
// small-instance work. All sampling goes through the deterministic Rng.
class DemandDistribution {
 public:
  static DemandDistribution empirical(std::vector<double> samples);
  static DemandDistribution uniform(double lo, double hi);
  // Normal(mu, sigma) conditioned on being nonnegative (rejection sampling).
  static DemandDistribution truncated_normal(double mu, double sigma);
  static DemandDistribution log_normal(double log_mean, double log_sd);
  static DemandDistribution discrete(std::vector<double> values, std::vector<double> probs);
  static DemandDistribution point_mass(double value) { return discrete({value}, {1.0}); }
  static DemandDistribution zero() { return point_mass(0.0); }

  DistKind kind() const { return kind_; }
  double sample(Rng& rng) const;
  // Empirical value for a given historical day (paired sampling);
  // deterministic kinds return their value, others are an error.
  double at_day(std::size_t day_index) const;

  double mean() const;
  bool is_degenerate() const;
  std::size_t empirical_count() const { return samples_.size(); }
  const std::vector<double>& empirical_samples() const { return samples_; }
  const std::vector<double>& discrete_values() const { return values_; }
  const std::vector<double>& discrete_probs() const { return probs_; }
  double param_a() const { return a_; }
  double param_b() const { return b_; }

 private:
  DistKind kind_ = DistKind::discrete;
  double a_ = 0.0, b_ = 0.0;         // family parameters
  std::vector<double> samples_;      // empirical
  std::vector<double> values_, probs_;  // discrete
};

struct FirmProfile {
  std::string firm_id;
  // Flat-indexed: [0] off peak, [1..p+q] trading periods.
  std::vector<DemandDistribution> per_period;
};

// One realized day for a community; collective entries are exact sums.
struct RealizedDay {
  std::vector<std::vector<double>> demand;  // [firm][flat]
  std::vector<double> collective;           // [flat]
  bool paired = false;

  static RealizedDay from_demand(std::vector<std::vector<double>> firm_demand, bool paired = false);
};

enum class SampleMode { independent, paired };

// Row-major pre-drawn sample paths: row = day, column = trading period
// (flat index minus one). Shared across solver loops so that estimates are
// common-random-number comparable.
struct SampleMatrix {
  std::size_t rows = 0, cols = 0;
  std::vector<double> a;

  SampleMatrix() = default;
  SampleMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), a(r * c, 0.0) {}
  double& at(std::size_t r, std::size_t c) { return a[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return a[r * cols + c]; }
  const double* row(std::size_t r) const { return a.data() + r * cols; }
};

class DemandModel {
 public:
  DemandModel(std::vector<FirmProfile> firms, int trading_periods);

  int firm_count() const { return static_cast<int>(firms_.size()); }
  const FirmProfile& firm(int i) const { return firms_[static_cast<std::size_t>(i)]; }
  const std::vector<FirmProfile>& firms() const { return firms_; }
  int trading_periods() const { return trading_periods_; }

  // True when every firm/period is empirical over one common day count; only
  // then can paired sampling and cross-firm correlation be computed.
  bool day_aligned() const { return aligned_days_.has_value(); }
  std::size_t aligned_days() const;

  // Independent mode draws each (firm, period) on its own; paired mode reuses
  // one historical day index across periods and firms, preserving within-day
  // and cross-firm dependence (deviates from the independence assumption the
  // solvers are built on, so realized days carry a flag).
  RealizedDay sample_day(Rng& rng, SampleMode mode = SampleMode::independent) const;

  // Estimator inputs. Day-aligned empirical models enumerate every historical
  // day exactly once (n and seed are ignored): expectations are then exact
  // under the empirical law and standard errors measure day-resampling noise
  // instead of being shrunk by bootstrap duplicates. Parametric models draw
  // n independent rows.
  SampleMatrix draw_collective(std::size_t n, std::uint64_t seed) const;
  std::vector<SampleMatrix> draw_per_firm(std::size_t n, std::uint64_t seed) const;

  DemandModel subset(const std::vector<int>& firm_indices) const;
  bool fully_discrete() const;

 private:
  std::vector<FirmProfile> firms_;
  int trading_periods_ = 0;
  std::optional<std::size_t> aligned_days_;
};

// --- estimators ---------------------------------------------------------

struct McOptions {
  std::size_t samples = 200000;
  std::uint64_t seed = 1;
};

// Quantile of the collective sum over a set of trading periods.
double aggregate_quantile(const DemandModel& model, const std::vector<int>& flat_periods,
                          double prob, const McOptions& options);

// Pearson correlations of per-day collective-period sums between firms.
// Requires a day-aligned model; entries with a zero-variance marginal are NaN.
struct CorrelationResult {
  std::vector<std::string> firm_ids;
  std::vector<std::vector<double>> corr;
};
CorrelationResult pairwise_correlation(const DemandModel& model, const std::vector<int>& flat_periods);
double pearson(const std::vector<double>& xs, const std::vector<double>& ys);

// Band-conditioned mean: E[sum of firm i's demand over numerator periods |
// collective conditioning sum within +-h of r, prefix caps hold]. The band
// starts at 1% of r (or the supplied width) and doubles until at least
// min_hits paths land inside; still too rare after max_widenings is an error.
struct PrefixConstraint {
  std::vector<int> flat_periods;
  double upper_bound = 0.0;  // strict: sum over flat_periods < upper_bound
};

struct BandOptions {
  double half_width = 0.0;  // 0 => 1% of the conditioning value
  std::size_t min_hits = 1000;
  int max_widenings = 8;
  McOptions mc;
};

struct BandMeanResult {
  double value = 0.0;
  double std_error = 0.0;
  std::size_t hits = 0;
  double half_width_used = 0.0;
  // Realized mean of the conditioning sum over the accepted rows. Wide or
  // edge-truncated bands center away from the nominal r; slope estimates over
  // a grid must use this as the abscissa, not r itself.
  double conditioning_mean = 0.0;
};

BandMeanResult conditional_mean_band(const DemandModel& model, int firm,
                                     const std::vector<int>& numerator_periods,
                                     const std::vector<int>& conditioning_periods, double r,
                                     const std::vector<PrefixConstraint>& constraints,
                                     const BandOptions& options);

// Same estimator over pre-drawn per-firm matrices (shared across many calls).
BandMeanResult conditional_mean_band_on(const std::vector<SampleMatrix>& per_firm, int firm,
                                        const std::vector<int>& numerator_periods,
                                        const std::vector<int>& conditioning_periods, double r,
                                        const std::vector<PrefixConstraint>& constraints,
                                        const BandOptions& options);

// --- metered data --------------------------------------------------------

struct IngestReport {
  std::size_t firms = 0;
  std::size_t days_used = 0;
  std::size_t days_dropped = 0;
  std::size_t clamped_readings = 0;
  bool day_aligned = false;
  std::vector<std::string> warnings;
};

// CSV with header timestamp,meter_id,kwh (RFC-4180 quoting). Each complete
// calendar day becomes one empirical sample per tariff period; days with
// missing hours are dropped, negative readings clamp to zero. Malformed rows
// throw with their line number.
std::vector<FirmProfile> ingest_load_csv(const std::string& path, const ToUSchedule& schedule,
                                         IngestReport* report = nullptr);

// Profile cache round trip (JSON with per-period sample arrays/parameters).
std::string profiles_to_json(const std::vector<FirmProfile>& firms, int trading_periods);
std::vector<FirmProfile> profiles_from_json(const std::string& text, int* trading_periods = nullptr);
void save_profiles(const std::string& path, const std::vector<FirmProfile>& firms, int trading_periods);
std::vector<FirmProfile> load_profiles(const std::string& path, int* trading_periods = nullptr);

}  // namespace toushare
