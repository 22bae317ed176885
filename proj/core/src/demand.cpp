#include "toushare/demand.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace toushare {

using nlohmann::json;

// --- DemandDistribution ---------------------------------------------------

DemandDistribution DemandDistribution::empirical(std::vector<double> samples) {
  if (samples.empty()) throw std::invalid_argument("empirical distribution needs samples");
  for (double s : samples)
    if (!(s >= 0.0)) throw std::invalid_argument("demand samples must be nonnegative");
  DemandDistribution d;
  d.kind_ = DistKind::empirical;
  d.samples_ = std::move(samples);
  return d;
}

DemandDistribution DemandDistribution::uniform(double lo, double hi) {
  if (!(lo >= 0.0) || !(hi > lo)) throw std::invalid_argument("uniform needs 0 <= lo < hi");
  DemandDistribution d;
  d.kind_ = DistKind::uniform;
  d.a_ = lo;
  d.b_ = hi;
  return d;
}

DemandDistribution DemandDistribution::truncated_normal(double mu, double sigma) {
  if (!(sigma > 0.0)) throw std::invalid_argument("truncated normal needs sigma > 0");
  DemandDistribution d;
  d.kind_ = DistKind::truncated_normal;
  d.a_ = mu;
  d.b_ = sigma;
  return d;
}

DemandDistribution DemandDistribution::log_normal(double log_mean, double log_sd) {
  if (!(log_sd > 0.0)) throw std::invalid_argument("log normal needs log_sd > 0");
  DemandDistribution d;
  d.kind_ = DistKind::log_normal;
  d.a_ = log_mean;
  d.b_ = log_sd;
  return d;
}

DemandDistribution DemandDistribution::discrete(std::vector<double> values, std::vector<double> probs) {
  if (values.empty() || values.size() != probs.size())
    throw std::invalid_argument("discrete distribution needs matching values/probs");
  double total = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0)) throw std::invalid_argument("discrete probabilities must be nonnegative");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("discrete probabilities must sum to 1");
  for (double v : values)
    if (!(v >= 0.0)) throw std::invalid_argument("demand values must be nonnegative");
  DemandDistribution d;
  d.kind_ = DistKind::discrete;
  d.values_ = std::move(values);
  d.probs_ = std::move(probs);
  return d;
}

double DemandDistribution::sample(Rng& rng) const {
  switch (kind_) {
    case DistKind::empirical:
      return samples_[static_cast<std::size_t>(rng.random_index(samples_.size()))];
    case DistKind::uniform:
      return rng.uniform(a_, b_);
    case DistKind::truncated_normal: {
      // Rejection keeps the stream deterministic for a fixed seed.
      for (;;) {
        const double x = rng.normal(a_, b_);
        if (x >= 0.0) return x;
      }
    }
    case DistKind::log_normal:
      return rng.log_normal(a_, b_);
    case DistKind::discrete: {
      const double u = rng.uniform01();
      double acc = 0.0;
      for (std::size_t i = 0; i < probs_.size(); ++i) {
        acc += probs_[i];
        if (u < acc) return values_[i];
      }
      return values_.back();
    }
  }
  return 0.0;
}

double DemandDistribution::at_day(std::size_t day_index) const {
  if (kind_ == DistKind::empirical) {
    if (day_index >= samples_.size()) throw std::out_of_range("day index beyond sample count");
    return samples_[day_index];
  }
  if (is_degenerate()) return mean();
  throw std::logic_error("paired sampling needs empirical (or degenerate) distributions");
}

double DemandDistribution::mean() const {
  switch (kind_) {
    case DistKind::empirical:
      return std::accumulate(samples_.begin(), samples_.end(), 0.0) /
             static_cast<double>(samples_.size());
    case DistKind::uniform:
      return 0.5 * (a_ + b_);
    case DistKind::truncated_normal: {
      // mean of N(mu, sigma) conditioned on X >= 0
      const double alpha = -a_ / b_;
      constexpr double sqrt_2pi = 2.5066282746310002;
      const double phi = std::exp(-0.5 * alpha * alpha) / sqrt_2pi;
      const double tail = 0.5 * std::erfc(alpha / std::sqrt(2.0));
      return a_ + b_ * phi / tail;
    }
    case DistKind::log_normal:
      return std::exp(a_ + 0.5 * b_ * b_);
    case DistKind::discrete: {
      double m = 0.0;
      for (std::size_t i = 0; i < values_.size(); ++i) m += values_[i] * probs_[i];
      return m;
    }
  }
  return 0.0;
}

bool DemandDistribution::is_degenerate() const {
  switch (kind_) {
    case DistKind::empirical:
      return std::all_of(samples_.begin(), samples_.end(),
                         [this](double s) { return s == samples_.front(); });
    case DistKind::discrete: {
      int live = 0;
      double value = 0.0;
      for (std::size_t i = 0; i < values_.size(); ++i) {
        if (probs_[i] > 0.0) {
          if (live && values_[i] != value) return false;
          value = values_[i];
          live = 1;
        }
      }
      return true;
    }
    default:
      return false;
  }
}

// --- RealizedDay / DemandModel --------------------------------------------

RealizedDay RealizedDay::from_demand(std::vector<std::vector<double>> firm_demand, bool paired) {
  RealizedDay day;
  day.demand = std::move(firm_demand);
  day.paired = paired;
  if (!day.demand.empty()) {
    day.collective.assign(day.demand.front().size(), 0.0);
    for (const auto& firm : day.demand) {
      if (firm.size() != day.collective.size())
        throw std::invalid_argument("firms must share the period layout");
      for (std::size_t t = 0; t < firm.size(); ++t) day.collective[t] += firm[t];
    }
  }
  return day;
}

DemandModel::DemandModel(std::vector<FirmProfile> firms, int trading_periods)
    : firms_(std::move(firms)), trading_periods_(trading_periods) {
  if (firms_.empty()) throw std::invalid_argument("demand model needs at least one firm");
  for (const auto& f : firms_) {
    if (static_cast<int>(f.per_period.size()) != trading_periods_ + 1)
      throw std::invalid_argument("firm " + f.firm_id + " must carry off-peak plus every trading period");
  }
  // Day alignment: every non-degenerate distribution empirical with one count.
  std::optional<std::size_t> days;
  bool aligned = true;
  for (const auto& f : firms_) {
    for (const auto& d : f.per_period) {
      if (d.kind() == DistKind::empirical) {
        if (days && *days != d.empirical_count()) aligned = false;
        days = d.empirical_count();
      } else if (!d.is_degenerate()) {
        aligned = false;
      }
    }
  }
  if (aligned && days) aligned_days_ = days;
}

std::size_t DemandModel::aligned_days() const {
  if (!aligned_days_) throw std::logic_error("model is not day-aligned");
  return *aligned_days_;
}

RealizedDay DemandModel::sample_day(Rng& rng, SampleMode mode) const {
  std::vector<std::vector<double>> demand(firms_.size());
  if (mode == SampleMode::paired) {
    const std::size_t day = static_cast<std::size_t>(rng.random_index(aligned_days()));
    for (std::size_t f = 0; f < firms_.size(); ++f) {
      demand[f].reserve(firms_[f].per_period.size());
      for (const auto& dist : firms_[f].per_period) demand[f].push_back(dist.at_day(day));
    }
    return RealizedDay::from_demand(std::move(demand), true);
  }
  for (std::size_t f = 0; f < firms_.size(); ++f) {
    demand[f].reserve(firms_[f].per_period.size());
    for (const auto& dist : firms_[f].per_period) demand[f].push_back(dist.sample(rng));
  }
  return RealizedDay::from_demand(std::move(demand), false);
}

std::vector<SampleMatrix> DemandModel::draw_per_firm(std::size_t n, std::uint64_t seed) const {
  const std::size_t t_count = static_cast<std::size_t>(trading_periods_);
  if (day_aligned()) {
    // Enumerate each historical day once. Bootstrapping more rows from the
    // same days adds no information but inflates apparent sample size, which
    // poisoned downstream standard errors.
    const std::size_t days = aligned_days();
    std::vector<SampleMatrix> out(firms_.size(), SampleMatrix(days, t_count));
    for (std::size_t f = 0; f < firms_.size(); ++f)
      for (std::size_t t = 0; t < t_count; ++t)
        for (std::size_t day = 0; day < days; ++day)
          out[f].at(day, t) = firms_[f].per_period[t + 1].at_day(day);
    return out;
  }
  std::vector<SampleMatrix> out(firms_.size(), SampleMatrix(n, t_count));
  Rng master(seed);
  for (std::size_t f = 0; f < firms_.size(); ++f) {
    for (std::size_t t = 0; t < t_count; ++t) {
      Rng stream = master.fork((f << 20) + t);
      const auto& dist = firms_[f].per_period[t + 1];
      for (std::size_t r = 0; r < n; ++r) out[f].at(r, t) = dist.sample(stream);
    }
  }
  return out;
}

SampleMatrix DemandModel::draw_collective(std::size_t n, std::uint64_t seed) const {
  const auto per_firm = draw_per_firm(n, seed);
  SampleMatrix sum(per_firm.front().rows, static_cast<std::size_t>(trading_periods_));
  for (const auto& m : per_firm)
    for (std::size_t i = 0; i < m.a.size(); ++i) sum.a[i] += m.a[i];
  return sum;
}

DemandModel DemandModel::subset(const std::vector<int>& firm_indices) const {
  std::vector<FirmProfile> keep;
  keep.reserve(firm_indices.size());
  for (int i : firm_indices) keep.push_back(firms_.at(static_cast<std::size_t>(i)));
  return DemandModel(std::move(keep), trading_periods_);
}

bool DemandModel::fully_discrete() const {
  for (const auto& f : firms_)
    for (std::size_t t = 1; t < f.per_period.size(); ++t)
      if (f.per_period[t].kind() != DistKind::discrete) return false;
  return true;
}

// --- estimators ------------------------------------------------------------

double aggregate_quantile(const DemandModel& model, const std::vector<int>& flat_periods,
                          double prob, const McOptions& options) {
  if (!(prob >= 0.0 && prob <= 1.0)) throw std::invalid_argument("prob must lie in [0,1]");
  if (flat_periods.empty()) throw std::invalid_argument("period set must be nonempty");
  const SampleMatrix m = model.draw_collective(options.samples, options.seed);
  std::vector<double> sums(m.rows, 0.0);
  for (int flat : flat_periods) {
    if (flat < 1 || flat > model.trading_periods())
      throw std::invalid_argument("aggregate quantile works on trading periods");
    const std::size_t c = static_cast<std::size_t>(flat - 1);
    for (std::size_t r = 0; r < m.rows; ++r) sums[r] += m.at(r, c);
  }
  return quantile(std::move(sums), prob);
}

double pearson(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size() || xs.size() < 2)
    throw std::invalid_argument("pearson needs two aligned samples of length >= 2");
  RunningStat sx, sy;
  for (double x : xs) sx.add(x);
  for (double y : ys) sy.add(y);
  if (sx.variance() == 0.0 || sy.variance() == 0.0)
    return std::numeric_limits<double>::quiet_NaN();
  double cov = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) cov += (xs[i] - sx.mean()) * (ys[i] - sy.mean());
  cov /= static_cast<double>(xs.size() - 1);
  return cov / (sx.sd() * sy.sd());
}

CorrelationResult pairwise_correlation(const DemandModel& model,
                                       const std::vector<int>& flat_periods) {
  if (model.firm_count() < 2) throw std::invalid_argument("correlation needs at least two firms");
  const std::size_t days = model.aligned_days();
  if (days < 2) throw std::invalid_argument("correlation needs at least two days");

  std::vector<std::vector<double>> sums(static_cast<std::size_t>(model.firm_count()),
                                        std::vector<double>(days, 0.0));
  for (int f = 0; f < model.firm_count(); ++f) {
    for (int flat : flat_periods) {
      const auto& dist = model.firm(f).per_period.at(static_cast<std::size_t>(flat));
      for (std::size_t d = 0; d < days; ++d)
        sums[static_cast<std::size_t>(f)][d] += dist.at_day(d);
    }
  }
  CorrelationResult out;
  for (int f = 0; f < model.firm_count(); ++f) out.firm_ids.push_back(model.firm(f).firm_id);
  out.corr.assign(static_cast<std::size_t>(model.firm_count()),
                  std::vector<double>(static_cast<std::size_t>(model.firm_count()), 1.0));
  for (int i = 0; i < model.firm_count(); ++i)
    for (int j = 0; j < model.firm_count(); ++j)
      out.corr[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
          i == j ? 1.0
                 : pearson(sums[static_cast<std::size_t>(i)], sums[static_cast<std::size_t>(j)]);
  return out;
}

BandMeanResult conditional_mean_band_on(const std::vector<SampleMatrix>& per_firm, int firm,
                                        const std::vector<int>& numerator_periods,
                                        const std::vector<int>& conditioning_periods, double r,
                                        const std::vector<PrefixConstraint>& constraints,
                                        const BandOptions& options) {
  if (per_firm.empty()) throw std::invalid_argument("no sample matrices");
  const std::size_t n = per_firm.front().rows;
  const std::size_t fi = static_cast<std::size_t>(firm);
  if (fi >= per_firm.size()) throw std::invalid_argument("firm index out of range");

  auto column = [](int flat) { return static_cast<std::size_t>(flat - 1); };

  // Conditioning is on the collective sum; the numerator is one firm's share.
  std::vector<double> cond(n, 0.0), numer(n, 0.0);
  for (int flat : conditioning_periods)
    for (std::size_t row = 0; row < n; ++row)
      for (const auto& m : per_firm) cond[row] += m.at(row, column(flat));
  for (int flat : numerator_periods)
    for (std::size_t row = 0; row < n; ++row) numer[row] += per_firm[fi].at(row, column(flat));

  std::vector<std::vector<double>> prefix_sums;
  for (const auto& c : constraints) {
    std::vector<double> s(n, 0.0);
    for (int flat : c.flat_periods)
      for (std::size_t row = 0; row < n; ++row)
        for (const auto& m : per_firm) s[row] += m.at(row, column(flat));
    prefix_sums.push_back(std::move(s));
  }

  double h = options.half_width > 0.0 ? options.half_width : 0.01 * std::max(std::abs(r), 1e-6);
  for (int attempt = 0; attempt <= options.max_widenings; ++attempt, h *= 2.0) {
    RunningStat st, cst;
    for (std::size_t row = 0; row < n; ++row) {
      if (std::abs(cond[row] - r) > h) continue;
      bool ok = true;
      for (std::size_t ci = 0; ci < constraints.size(); ++ci) {
        if (!(prefix_sums[ci][row] < constraints[ci].upper_bound)) {
          ok = false;
          break;
        }
      }
      if (ok) {
        st.add(numer[row]);
        cst.add(cond[row]);
      }
    }
    if (st.count() >= options.min_hits) {
      return {st.mean(), st.std_error(), st.count(), h, cst.mean()};
    }
  }
  throw std::runtime_error("conditioning event too rare even after widening the band");
}

BandMeanResult conditional_mean_band(const DemandModel& model, int firm,
                                     const std::vector<int>& numerator_periods,
                                     const std::vector<int>& conditioning_periods, double r,
                                     const std::vector<PrefixConstraint>& constraints,
                                     const BandOptions& options) {
  const auto per_firm = model.draw_per_firm(options.mc.samples, options.mc.seed);
  return conditional_mean_band_on(per_firm, firm, numerator_periods, conditioning_periods, r,
                                  constraints, options);
}

// --- CSV ingest -------------------------------------------------------------

namespace {

std::vector<std::string> split_csv_row(const std::string& line, std::size_t line_no) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(field);
      field.clear();
    } else if (c != '\r') {
      field += c;
    }
  }
  if (quoted)
    throw std::runtime_error("line " + std::to_string(line_no) + ": unterminated quote");
  fields.push_back(field);
  return fields;
}

struct Timestamp {
  std::string date;
  int hour;
};

Timestamp parse_timestamp(const std::string& text, std::size_t line_no) {
  // Accepts YYYY-MM-DD{T or space}HH[:MM[:SS]] with optional trailing Z.
  if (text.size() < 13 || text[4] != '-' || text[7] != '-' || (text[10] != 'T' && text[10] != ' '))
    throw std::runtime_error("line " + std::to_string(line_no) + ": bad timestamp '" + text + "'");
  for (int i : {0, 1, 2, 3, 5, 6, 8, 9, 11, 12}) {
    if (!std::isdigit(static_cast<unsigned char>(text[static_cast<std::size_t>(i)])))
      throw std::runtime_error("line " + std::to_string(line_no) + ": bad timestamp '" + text + "'");
  }
  const int hour = (text[11] - '0') * 10 + (text[12] - '0');
  if (hour > 23)
    throw std::runtime_error("line " + std::to_string(line_no) + ": hour out of range in '" + text + "'");
  return {text.substr(0, 10), hour};
}

}  // namespace

std::vector<FirmProfile> ingest_load_csv(const std::string& path, const ToUSchedule& schedule,
                                         IngestReport* report) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open load data: " + path);

  IngestReport local;
  const int flats = schedule.trading_periods() + 1;

  struct DayAccum {
    std::array<bool, 24> hour_seen{};
    std::vector<double> per_flat;
  };
  std::map<std::string, std::map<std::string, DayAccum>> meters;  // meter -> date -> accum

  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw std::runtime_error("empty load data file");
  ++line_no;
  {
    auto header = split_csv_row(line, line_no);
    if (header.size() < 3 || header[0] != "timestamp" || header[1] != "meter_id" ||
        header[2] != "kwh")
      throw std::runtime_error("expected header: timestamp,meter_id,kwh");
  }

  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto fields = split_csv_row(line, line_no);
    if (fields.size() != 3)
      throw std::runtime_error("line " + std::to_string(line_no) + ": expected 3 fields");
    const Timestamp ts = parse_timestamp(fields[0], line_no);
    double kwh = 0.0;
    try {
      std::size_t used = 0;
      kwh = std::stod(fields[2], &used);
      if (used != fields[2].size()) throw std::invalid_argument("trailing junk");
    } catch (const std::exception&) {
      throw std::runtime_error("line " + std::to_string(line_no) + ": bad kwh '" + fields[2] + "'");
    }
    if (kwh < 0.0) {
      kwh = 0.0;
      ++local.clamped_readings;
    }
    auto& day = meters[fields[1]][ts.date];
    if (day.per_flat.empty()) day.per_flat.assign(static_cast<std::size_t>(flats), 0.0);
    day.hour_seen[static_cast<std::size_t>(ts.hour)] = true;
    day.per_flat[static_cast<std::size_t>(schedule.period_of(ts.hour).flat)] += kwh;
  }
  if (local.clamped_readings > 0)
    local.warnings.push_back(std::to_string(local.clamped_readings) +
                             " negative readings clamped to zero");

  std::vector<FirmProfile> firms;
  std::optional<std::vector<std::string>> common_dates;
  bool aligned = true;
  for (auto& [meter, days] : meters) {
    std::vector<std::string> used_dates;
    std::vector<std::vector<double>> samples(static_cast<std::size_t>(flats));
    std::size_t dropped = 0;
    for (auto& [date, accum] : days) {
      const bool complete =
          std::all_of(accum.hour_seen.begin(), accum.hour_seen.end(), [](bool b) { return b; });
      if (!complete) {
        ++dropped;
        continue;
      }
      used_dates.push_back(date);
      for (int t = 0; t < flats; ++t)
        samples[static_cast<std::size_t>(t)].push_back(accum.per_flat[static_cast<std::size_t>(t)]);
    }
    if (dropped > 0) {
      local.days_dropped += dropped;
      local.warnings.push_back("meter " + meter + ": dropped " + std::to_string(dropped) +
                               " incomplete days");
    }
    if (used_dates.empty()) {
      local.warnings.push_back("meter " + meter + ": no complete days, meter skipped");
      continue;
    }
    if (!common_dates)
      common_dates = used_dates;
    else if (*common_dates != used_dates)
      aligned = false;

    FirmProfile firm;
    firm.firm_id = meter;
    for (int t = 0; t < flats; ++t)
      firm.per_period.push_back(
          DemandDistribution::empirical(std::move(samples[static_cast<std::size_t>(t)])));
    local.days_used += used_dates.size();
    firms.push_back(std::move(firm));
  }
  if (firms.empty()) throw std::runtime_error("no usable meters in " + path);

  local.firms = firms.size();
  local.day_aligned = aligned && firms.size() >= 1;
  if (!aligned)
    local.warnings.push_back(
        "meters cover different day sets; paired sampling and correlations unavailable");
  if (report) *report = local;
  return firms;
}

// --- profile cache -----------------------------------------------------------

namespace {

json dist_to_json(const DemandDistribution& d) {
  json j;
  switch (d.kind()) {
    case DistKind::empirical:
      j["kind"] = "empirical";
      j["samples"] = d.empirical_samples();
      break;
    case DistKind::uniform:
      j["kind"] = "uniform";
      j["lo"] = d.param_a();
      j["hi"] = d.param_b();
      break;
    case DistKind::truncated_normal:
      j["kind"] = "truncated_normal";
      j["mu"] = d.param_a();
      j["sigma"] = d.param_b();
      break;
    case DistKind::log_normal:
      j["kind"] = "log_normal";
      j["log_mean"] = d.param_a();
      j["log_sd"] = d.param_b();
      break;
    case DistKind::discrete:
      j["kind"] = "discrete";
      j["values"] = d.discrete_values();
      j["probs"] = d.discrete_probs();
      break;
  }
  return j;
}

DemandDistribution dist_from_json(const json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "empirical") return DemandDistribution::empirical(j.at("samples").get<std::vector<double>>());
  if (kind == "uniform") return DemandDistribution::uniform(j.at("lo").get<double>(), j.at("hi").get<double>());
  if (kind == "truncated_normal")
    return DemandDistribution::truncated_normal(j.at("mu").get<double>(), j.at("sigma").get<double>());
  if (kind == "log_normal")
    return DemandDistribution::log_normal(j.at("log_mean").get<double>(), j.at("log_sd").get<double>());
  if (kind == "discrete")
    return DemandDistribution::discrete(j.at("values").get<std::vector<double>>(),
                                        j.at("probs").get<std::vector<double>>());
  throw std::runtime_error("unknown distribution kind: " + kind);
}

}  // namespace

std::string profiles_to_json(const std::vector<FirmProfile>& firms, int trading_periods) {
  json j;
  j["trading_periods"] = trading_periods;
  j["firms"] = json::array();
  for (const auto& f : firms) {
    json jf;
    jf["firm_id"] = f.firm_id;
    jf["periods"] = json::array();
    for (const auto& d : f.per_period) jf["periods"].push_back(dist_to_json(d));
    j["firms"].push_back(std::move(jf));
  }
  return j.dump(2);
}

std::vector<FirmProfile> profiles_from_json(const std::string& text, int* trading_periods) {
  json j = json::parse(text);
  if (trading_periods) *trading_periods = j.at("trading_periods").get<int>();
  std::vector<FirmProfile> firms;
  for (const auto& jf : j.at("firms")) {
    FirmProfile f;
    f.firm_id = jf.at("firm_id").get<std::string>();
    for (const auto& jd : jf.at("periods")) f.per_period.push_back(dist_from_json(jd));
    firms.push_back(std::move(f));
  }
  return firms;
}

void save_profiles(const std::string& path, const std::vector<FirmProfile>& firms,
                   int trading_periods) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write profile cache: " + path);
  out << profiles_to_json(firms, trading_periods);
}

std::vector<FirmProfile> load_profiles(const std::string& path, int* trading_periods) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open profile cache: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return profiles_from_json(ss.str(), trading_periods);
}

}  // namespace toushare
