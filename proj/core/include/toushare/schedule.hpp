#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

namespace toushare {

// A tariff day is canonicalized to start at the beginning of the off-peak
// window. Trading periods (everything priced above off peak) are numbered by
// a flat index: 0 = off peak, 1..p = ramp-up periods in rising-rate order,
// p+1..p+q = ramp-down periods, of which p+1 is the peak. Flat p+q+1 acts as
// a sentinel that prices "after the day ends" at the off-peak rate.

enum class PeriodKind { off_peak, ramp_up, ramp_down };

struct PeriodId {
  PeriodKind kind = PeriodKind::off_peak;
  int index = 0;  // 1-based within its ramp; 0 for off peak
  int flat = 0;

  bool operator==(const PeriodId&) const = default;
};

// Clock window [start_hour, end_hour); wraps past midnight when end <= start.
struct PeriodWindow {
  int start_hour = 0;
  int end_hour = 0;
  PeriodId period;
};

struct ValidationReport {
  std::vector<std::string> violations;
  std::vector<std::string> warnings;
  bool ok() const { return violations.empty(); }
};

struct ScheduleSpec {
  double off_peak_rate_cents = 0.0;
  std::vector<double> ramp_up_cents;    // strictly rising, all above off peak
  std::vector<double> ramp_down_cents;  // strictly falling, first entry is the peak
  std::vector<PeriodWindow> windows;    // partition of the 24 clock hours
  double storage_cost_cents = 0.0;      // amortized storage cost, cents per kWh per day
};

// Structural checks: exact tenths-of-a-cent rates, strict single-peaked rate
// chain, window partition and canonical ordering. Violations are data.
ValidationReport validate_single_peaked(const ScheduleSpec& spec);

class ToUSchedule {
 public:
  // Returns nullopt (and the report, if requested) when validation fails.
  static std::optional<ToUSchedule> create(const ScheduleSpec& spec,
                                           ValidationReport* report = nullptr);

  // Convenience for rate-only contexts (solvers, tests): windows are
  // synthesized as one hour per trading period, remainder off peak.
  static ToUSchedule from_rates(double off_peak_cents, std::vector<double> ramp_up_cents,
                                std::vector<double> ramp_down_cents, double storage_cost_cents);

  int ramp_up_count() const { return static_cast<int>(spec_.ramp_up_cents.size()); }
  int ramp_down_count() const { return static_cast<int>(spec_.ramp_down_cents.size()); }
  int trading_periods() const { return ramp_up_count() + ramp_down_count(); }

  double off_peak_cents() const { return tenths_to_cents(off_tenths_); }
  double storage_cost_cents() const { return tenths_to_cents(storage_tenths_); }
  double peak_cents() const { return rate_cents(ramp_up_count() + 1); }

  // flat in [1, p+q]; flat == 0 or p+q+1 returns the off-peak rate.
  double rate_cents(int flat) const;
  int rate_tenths(int flat) const;
  int off_peak_tenths() const { return off_tenths_; }
  int storage_cost_tenths() const { return storage_tenths_; }

  // Largest rate gap must exceed the amortized storage cost for storage to
  // pay for itself at all.
  bool arbitrage_viable() const { return rate_tenths(ramp_up_count() + 1) - off_tenths_ > storage_tenths_; }

  PeriodId period(int flat) const;
  PeriodId period_of(int hour) const;
  const std::vector<PeriodWindow>& windows() const { return spec_.windows; }
  const ScheduleSpec& spec() const { return spec_; }

  // Hour-indexed config document; parse(serialize(s)) reproduces s.
  std::string to_json() const;

  static double tenths_to_cents(int tenths) { return static_cast<double>(tenths) / 10.0; }

 private:
  ToUSchedule() = default;

  ScheduleSpec spec_;
  std::vector<int> trading_tenths_;  // canonical order, index 0 => flat 1
  int off_tenths_ = 0;
  int storage_tenths_ = 0;
  std::array<PeriodId, 24> hour_map_{};
};

struct ScheduleParseResult {
  std::optional<ToUSchedule> schedule;
  ValidationReport report;
};

// Hour-indexed key/value document:
//   {"off_peak_rate_cents": 13, "rates": [24 entries], "storage_cost_cents_per_kwh_day": 14}
ScheduleParseResult parse_schedule(const std::string& json_text);
ScheduleParseResult parse_schedule_file(const std::string& path);

ValidationReport validate_single_peaked(const ToUSchedule& schedule);

}  // namespace toushare
