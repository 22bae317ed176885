#include "toushare/schedule.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace toushare {
namespace {

using nlohmann::json;

bool to_tenths(double cents, int* out) {
  const double scaled = cents * 10.0;
  const double rounded = std::round(scaled);
  if (std::abs(scaled - rounded) > 1e-6) return false;
  *out = static_cast<int>(rounded);
  return true;
}

std::string describe(const PeriodId& id) {
  switch (id.kind) {
    case PeriodKind::off_peak:
      return "off-peak";
    case PeriodKind::ramp_up:
      return "ramp-up " + std::to_string(id.index);
    case PeriodKind::ramp_down:
      return "ramp-down " + std::to_string(id.index);
  }
  return "?";
}

}  // namespace

ValidationReport validate_single_peaked(const ScheduleSpec& spec) {
  ValidationReport report;
  auto fail = [&report](const std::string& msg) { report.violations.push_back(msg); };

  const int p = static_cast<int>(spec.ramp_up_cents.size());
  const int q = static_cast<int>(spec.ramp_down_cents.size());
  if (q < 1) fail("schedule needs at least one ramp-down period (the peak)");

  int off = 0;
  if (!to_tenths(spec.off_peak_rate_cents, &off))
    fail("off-peak rate must be a whole number of tenths of a cent");
  int storage = 0;
  if (!to_tenths(spec.storage_cost_cents, &storage))
    fail("storage cost must be a whole number of tenths of a cent");
  if (spec.storage_cost_cents <= 0.0) fail("storage cost must be positive");

  std::vector<int> chain;  // off, ru..., rd..., implicit off at the end
  chain.push_back(off);
  bool rates_ok = true;
  for (double c : spec.ramp_up_cents) {
    int t = 0;
    if (!to_tenths(c, &t)) {
      fail("ramp-up rates must be whole tenths of a cent");
      rates_ok = false;
      break;
    }
    chain.push_back(t);
  }
  for (double c : spec.ramp_down_cents) {
    int t = 0;
    if (!to_tenths(c, &t)) {
      fail("ramp-down rates must be whole tenths of a cent");
      rates_ok = false;
      break;
    }
    chain.push_back(t);
  }

  if (rates_ok && q >= 1) {
    // Strict rise through the peak, then strict fall back above off peak.
    for (int i = 1; i <= p; ++i) {
      if (chain[i] <= chain[i - 1])
        fail("strict monotonicity violated on the ramp up (period " + std::to_string(i) + ")");
    }
    if (p >= 1 && chain[p + 1] <= chain[p])
      fail("peak rate must exceed the last ramp-up rate");
    for (int i = p + 2; i <= p + q; ++i) {
      if (chain[i] >= chain[i - 1])
        fail("strict monotonicity violated on the ramp down (period " + std::to_string(i - p) + ")");
    }
    if (chain[p + q] <= off && q >= 1)
      fail("last ramp-down rate must stay above the off-peak rate");
  }

  // Window partition and canonical ordering.
  const int n_windows = static_cast<int>(spec.windows.size());
  if (n_windows != p + q + 1) {
    fail("expected " + std::to_string(p + q + 1) + " windows, got " + std::to_string(n_windows));
  } else {
    std::array<int, 24> owner;
    owner.fill(-1);
    bool coverage_ok = true;
    for (int w = 0; w < n_windows; ++w) {
      const auto& win = spec.windows[w];
      if (win.start_hour < 0 || win.start_hour > 23 || win.end_hour < 0 || win.end_hour > 24) {
        fail("window hours out of range");
        coverage_ok = false;
        break;
      }
      int h = win.start_hour;
      do {
        if (owner[h] != -1) {
          fail("hour " + std::to_string(h) + " covered by two windows");
          coverage_ok = false;
          break;
        }
        owner[h] = w;
        h = (h + 1) % 24;
      } while (h != win.end_hour % 24 && coverage_ok);
      if (!coverage_ok) break;
    }
    if (coverage_ok) {
      for (int h = 0; h < 24; ++h) {
        if (owner[h] == -1) {
          fail("hour " + std::to_string(h) + " not covered by any window");
          coverage_ok = false;
          break;
        }
      }
    }
    if (coverage_ok) {
      int off_windows = 0;
      for (const auto& win : spec.windows)
        if (win.period.kind == PeriodKind::off_peak) ++off_windows;
      if (off_windows != 1) {
        fail("exactly one off-peak window required (it may wrap midnight)");
      } else {
        // Walk the day from the off-peak start; trading flats must appear in
        // canonical order 1..p+q.
        int off_idx = -1;
        for (int w = 0; w < n_windows; ++w)
          if (spec.windows[w].period.kind == PeriodKind::off_peak) off_idx = w;
        int h = spec.windows[off_idx].end_hour % 24;
        int expected_flat = 1;
        while (h != spec.windows[off_idx].start_hour) {
          const auto& win = spec.windows[owner[h]];
          if (win.start_hour != h) {
            fail("windows are not contiguous at hour " + std::to_string(h));
            break;
          }
          if (win.period.flat != expected_flat) {
            fail("window " + describe(win.period) + " out of canonical order");
            break;
          }
          const int expect_kind_flat = expected_flat;
          const bool is_ru = expect_kind_flat <= p;
          if (is_ru && win.period.kind != PeriodKind::ramp_up)
            fail("flat " + std::to_string(expected_flat) + " must be a ramp-up window");
          if (!is_ru && win.period.kind != PeriodKind::ramp_down)
            fail("flat " + std::to_string(expected_flat) + " must be a ramp-down window");
          ++expected_flat;
          h = win.end_hour % 24;
        }
        if (report.violations.empty() && expected_flat != p + q + 1)
          fail("trading windows missing from the canonical day");
      }
    }
  }

  if (report.ok() && q >= 1) {
    const int peak = chain[p + 1];
    if (peak - off <= storage)
      report.warnings.push_back(
          "arbitrage not viable: peak spread does not exceed the amortized storage cost");
  }
  return report;
}

ValidationReport validate_single_peaked(const ToUSchedule& schedule) {
  return validate_single_peaked(schedule.spec());
}

std::optional<ToUSchedule> ToUSchedule::create(const ScheduleSpec& spec, ValidationReport* report) {
  ValidationReport local = validate_single_peaked(spec);
  if (report) *report = local;
  if (!local.ok()) return std::nullopt;

  ToUSchedule s;
  s.spec_ = spec;
  to_tenths(spec.off_peak_rate_cents, &s.off_tenths_);
  to_tenths(spec.storage_cost_cents, &s.storage_tenths_);
  for (double c : spec.ramp_up_cents) {
    int t = 0;
    to_tenths(c, &t);
    s.trading_tenths_.push_back(t);
  }
  for (double c : spec.ramp_down_cents) {
    int t = 0;
    to_tenths(c, &t);
    s.trading_tenths_.push_back(t);
  }
  for (const auto& win : spec.windows) {
    int h = win.start_hour;
    do {
      s.hour_map_[h] = win.period;
      h = (h + 1) % 24;
    } while (h != win.end_hour % 24);
  }
  return s;
}

ToUSchedule ToUSchedule::from_rates(double off_peak_cents, std::vector<double> ramp_up_cents,
                                    std::vector<double> ramp_down_cents,
                                    double storage_cost_cents) {
  ScheduleSpec spec;
  spec.off_peak_rate_cents = off_peak_cents;
  spec.ramp_up_cents = std::move(ramp_up_cents);
  spec.ramp_down_cents = std::move(ramp_down_cents);
  spec.storage_cost_cents = storage_cost_cents;

  const int p = static_cast<int>(spec.ramp_up_cents.size());
  const int q = static_cast<int>(spec.ramp_down_cents.size());
  const int n = p + q;
  if (n >= 24) throw std::invalid_argument("too many trading periods for a 24h day");
  // Off peak runs [n, 24), trading period f occupies hour f-1.
  for (int f = 1; f <= n; ++f) {
    PeriodId id;
    id.flat = f;
    id.kind = f <= p ? PeriodKind::ramp_up : PeriodKind::ramp_down;
    id.index = f <= p ? f : f - p;
    spec.windows.push_back({f - 1, f, id});
  }
  spec.windows.push_back({n, 0, PeriodId{}});

  ValidationReport report;
  auto made = create(spec, &report);
  if (!made) {
    std::string msg = "invalid schedule:";
    for (const auto& v : report.violations) msg += " " + v + ";";
    throw std::invalid_argument(msg);
  }
  return *made;
}

double ToUSchedule::rate_cents(int flat) const { return tenths_to_cents(rate_tenths(flat)); }

int ToUSchedule::rate_tenths(int flat) const {
  const int n = trading_periods();
  if (flat <= 0 || flat == n + 1) return off_tenths_;  // sentinel
  if (flat > n + 1) throw std::out_of_range("flat period index out of range");
  return trading_tenths_[static_cast<std::size_t>(flat - 1)];
}

PeriodId ToUSchedule::period(int flat) const {
  const int p = ramp_up_count();
  const int n = trading_periods();
  if (flat < 0 || flat > n) throw std::out_of_range("flat period index out of range");
  PeriodId id;
  id.flat = flat;
  if (flat == 0) return id;
  id.kind = flat <= p ? PeriodKind::ramp_up : PeriodKind::ramp_down;
  id.index = flat <= p ? flat : flat - p;
  return id;
}

PeriodId ToUSchedule::period_of(int hour) const {
  if (hour < 0 || hour > 23) throw std::out_of_range("hour must be in [0, 23]");
  return hour_map_[static_cast<std::size_t>(hour)];
}

std::string ToUSchedule::to_json() const {
  json j;
  j["off_peak_rate_cents"] = tenths_to_cents(off_tenths_);
  j["storage_cost_cents_per_kwh_day"] = tenths_to_cents(storage_tenths_);
  std::vector<double> rates(24, 0.0);
  for (int h = 0; h < 24; ++h) rates[static_cast<std::size_t>(h)] = rate_cents(period_of(h).flat);
  j["rates"] = rates;
  return j.dump(2);
}

namespace {

ScheduleParseResult parse_schedule_json(const json& j) {
  ScheduleParseResult result;
  auto fail = [&result](const std::string& msg) { result.report.violations.push_back(msg); };

  if (!j.contains("off_peak_rate_cents") || !j["off_peak_rate_cents"].is_number())
    fail("missing numeric field off_peak_rate_cents");
  if (!j.contains("storage_cost_cents_per_kwh_day") || !j["storage_cost_cents_per_kwh_day"].is_number())
    fail("missing numeric field storage_cost_cents_per_kwh_day");
  if (!j.contains("rates") || !j["rates"].is_array() || j["rates"].size() != 24)
    fail("field rates must be an array of 24 hourly entries");
  if (!result.report.ok()) return result;

  const double off_cents = j["off_peak_rate_cents"].get<double>();
  int off_tenths = 0;
  if (!to_tenths(off_cents, &off_tenths)) {
    fail("off-peak rate must be a whole number of tenths of a cent");
    return result;
  }

  std::array<int, 24> hourly{};
  for (int h = 0; h < 24; ++h) {
    if (!j["rates"][static_cast<std::size_t>(h)].is_number()) {
      fail("rates entries must be numbers");
      return result;
    }
    int t = 0;
    if (!to_tenths(j["rates"][static_cast<std::size_t>(h)].get<double>(), &t)) {
      fail("hourly rates must be whole tenths of a cent");
      return result;
    }
    hourly[static_cast<std::size_t>(h)] = t;
  }

  int min_t = hourly[0];
  for (int t : hourly) min_t = std::min(min_t, t);
  if (min_t != off_tenths) {
    fail("off_peak_rate_cents must equal the lowest hourly rate");
    return result;
  }

  // The off-peak hours must form one contiguous circular run.
  int off_start = -1;
  for (int h = 0; h < 24; ++h) {
    const int prev = (h + 23) % 24;
    if (hourly[static_cast<std::size_t>(h)] == off_tenths &&
        hourly[static_cast<std::size_t>(prev)] != off_tenths)
      off_start = h;
  }
  if (off_start == -1) {
    fail(hourly[0] == off_tenths && hourly[23] == off_tenths &&
                 [&hourly, off_tenths] {
                   for (int t : hourly)
                     if (t != off_tenths) return false;
                   return true;
                 }()
             ? "schedule is flat: no trading periods"
             : "off-peak hours must form one contiguous block");
    return result;
  }
  for (int h = 0; h < 24; ++h) {
    // Any second off-peak run means the block is not contiguous.
    const int prev = (h + 23) % 24;
    if (h != off_start && hourly[static_cast<std::size_t>(h)] == off_tenths &&
        hourly[static_cast<std::size_t>(prev)] != off_tenths) {
      fail("off-peak hours must form one contiguous block");
      return result;
    }
  }

  // Collect trading runs in canonical order (consecutive equal rates merge).
  struct Run {
    int start, end_exclusive, tenths;
  };
  std::vector<Run> runs;
  int h = off_start;
  while (hourly[static_cast<std::size_t>(h)] == off_tenths) h = (h + 1) % 24;
  const int trading_start = h;
  while (h != off_start) {
    const int t = hourly[static_cast<std::size_t>(h)];
    if (!runs.empty() && runs.back().tenths == t) {
      runs.back().end_exclusive = (h + 1) % 24;  // extend the current run
    } else {
      runs.push_back({h, (h + 1) % 24, t});
    }
    h = (h + 1) % 24;
  }

  // Peak = unique maximum run; everything before it ramps up, after ramps down.
  int peak_idx = 0;
  for (int i = 1; i < static_cast<int>(runs.size()); ++i)
    if (runs[static_cast<std::size_t>(i)].tenths > runs[static_cast<std::size_t>(peak_idx)].tenths)
      peak_idx = i;

  ScheduleSpec spec;
  spec.off_peak_rate_cents = ToUSchedule::tenths_to_cents(off_tenths);
  spec.storage_cost_cents = j["storage_cost_cents_per_kwh_day"].get<double>();
  const int p = peak_idx;
  const int q = static_cast<int>(runs.size()) - peak_idx;
  for (int i = 0; i < p; ++i)
    spec.ramp_up_cents.push_back(ToUSchedule::tenths_to_cents(runs[static_cast<std::size_t>(i)].tenths));
  for (int i = p; i < p + q; ++i)
    spec.ramp_down_cents.push_back(ToUSchedule::tenths_to_cents(runs[static_cast<std::size_t>(i)].tenths));
  for (int i = 0; i < p + q; ++i) {
    PeriodId id;
    id.flat = i + 1;
    id.kind = i < p ? PeriodKind::ramp_up : PeriodKind::ramp_down;
    id.index = i < p ? i + 1 : i - p + 1;
    spec.windows.push_back({runs[static_cast<std::size_t>(i)].start,
                            runs[static_cast<std::size_t>(i)].end_exclusive, id});
  }
  PeriodWindow off_window;
  off_window.start_hour = off_start;
  off_window.end_hour = trading_start;
  off_window.period = PeriodId{};
  spec.windows.push_back(off_window);

  result.schedule = ToUSchedule::create(spec, &result.report);
  return result;
}

}  // namespace

ScheduleParseResult parse_schedule(const std::string& json_text) {
  ScheduleParseResult result;
  json j = json::parse(json_text, nullptr, false);
  if (j.is_discarded()) {
    result.report.violations.push_back("schedule config is not valid JSON");
    return result;
  }
  return parse_schedule_json(j);
}

ScheduleParseResult parse_schedule_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    ScheduleParseResult result;
    result.report.violations.push_back("cannot open schedule config: " + path);
    return result;
  }
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_schedule(ss.str());
}

}  // namespace toushare
