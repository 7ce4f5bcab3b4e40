#include "loadcast/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "loadcast/error.hpp"
#include "loadcast/rng.hpp"

namespace loadcast {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// 2008-01-07 00:00, a Monday; keeps slot bookkeeping easy to eyeball.
constexpr HourStamp kSynthStart = 13885 * 24;

// AR(1) with unit stationary variance; smooth enough hour to hour that
// yesterday's weather still says something about today's.
std::vector<double> ar1_noise(std::size_t n, double coef, Rng& rng) {
  std::vector<double> out(n);
  const double innovation = std::sqrt(1.0 - coef * coef);
  double state = rng.normal();
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = state;
    state = coef * state + innovation * rng.normal();
  }
  return out;
}

void standardize(std::vector<double>& v) {
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  var /= static_cast<double>(v.size());
  const double inv = var > 0.0 ? 1.0 / std::sqrt(var) : 0.0;
  for (double& x : v) x = (x - mean) * inv;
}

}  // namespace

void SynthSpec::validate() const {
  if (n_districts == 0) throw ConfigError("synth: need at least one district");
  if (days < 14) throw ConfigError("synth: need at least 14 days");
  if (!groups.empty() && groups.size() != n_districts) {
    throw ConfigError("synth: group list length must equal n_districts");
  }
  if (group_correlation < 0.0 || group_correlation > 1.0) {
    throw ConfigError("synth: correlation must be in [0, 1]");
  }
  if (base_load <= 0.0 || weekly_amplitude < 0.0 || fluct_noise < 0.0) {
    throw ConfigError("synth: scales must be nonnegative, base load positive");
  }
}

double synth_weekly_profile(int group, int slot, double amplitude) {
  // smooth by construction: abrupt steps would read as outliers downstream
  const double hour = static_cast<double>(slot % 24);
  const double g = static_cast<double>(group);
  const double daily =
      0.55 * std::sin(kTwoPi * (hour - 9.0 - 1.5 * g) / 24.0) +
      0.10 * std::sin(2.0 * kTwoPi * (hour - 6.0) / 24.0);
  const double weekly =
      0.35 * std::sin(kTwoPi * (static_cast<double>(slot) - 130.0 - 8.0 * g) /
                      168.0);
  return 1.0 + amplitude * (daily + weekly);
}

std::vector<RawSeries> generate(const SynthSpec& spec) {
  spec.validate();
  const std::size_t hours = static_cast<std::size_t>(spec.days) * 24;
  const double rho = std::sqrt(spec.group_correlation);
  const double idio = std::sqrt(1.0 - spec.group_correlation);

  std::vector<int> groups = spec.groups;
  if (groups.empty()) {
    groups.resize(spec.n_districts);
    for (std::size_t d = 0; d < spec.n_districts; ++d) {
      groups[d] = static_cast<int>(d / 2);
    }
  }
  const int n_groups = *std::max_element(groups.begin(), groups.end()) + 1;

  // shared per-group noise streams: 4 weather channels per group
  std::vector<std::array<std::vector<double>, 4>> group_noise(
      static_cast<std::size_t>(n_groups));
  for (int g = 0; g < n_groups; ++g) {
    for (int c = 0; c < 4; ++c) {
      Rng rng(mix_seed(spec.seed, 1000 + static_cast<std::uint64_t>(g) * 8 +
                                      static_cast<std::uint64_t>(c)));
      group_noise[static_cast<std::size_t>(g)][static_cast<std::size_t>(c)] =
          ar1_noise(hours, 0.95, rng);
    }
  }

  std::vector<RawSeries> out;
  out.reserve(spec.n_districts);
  for (std::size_t d = 0; d < spec.n_districts; ++d) {
    const int g = groups[d];
    RawSeries series;
    char id[16];
    std::snprintf(id, sizeof(id), "D%02u", static_cast<unsigned>(d));
    series.district_id = id;
    series.hours.resize(hours);
    series.load.resize(hours);
    series.temperature.resize(hours);
    series.humidity.resize(hours);
    series.wind_speed.resize(hours);
    series.precipitation.resize(hours);

    std::array<std::vector<double>, 4> noise;
    for (int c = 0; c < 4; ++c) {
      Rng rng(mix_seed(spec.seed, 2000 + d * 8 + static_cast<std::size_t>(c)));
      auto own = ar1_noise(hours, 0.95, rng);
      auto& shared =
          group_noise[static_cast<std::size_t>(g)][static_cast<std::size_t>(c)];
      noise[static_cast<std::size_t>(c)].resize(hours);
      for (std::size_t t = 0; t < hours; ++t) {
        noise[static_cast<std::size_t>(c)][t] =
            rho * shared[t] + idio * own[t];
      }
    }
    Rng fluct_rng(mix_seed(spec.seed, 3000 + d));
    const auto fluct_noise = ar1_noise(hours, 0.8, fluct_rng);

    std::array<std::vector<double>, 4> weather;
    for (auto& w : weather) w.resize(hours);
    for (std::size_t t = 0; t < hours; ++t) {
      const double day = static_cast<double>(t) / 24.0;
      const double hour = static_cast<double>(t % 24);
      const double gph = 0.7 * static_cast<double>(g);
      weather[0][t] = 12.0 + 10.0 * std::sin(kTwoPi * day / 365.25 - 1.3) +
                      6.0 * std::sin(kTwoPi * (hour - 14.0) / 24.0) +
                      2.5 * noise[0][t];
      weather[1][t] = std::clamp(
          60.0 + 20.0 * std::sin(kTwoPi * day / 365.25 + 1.1 + gph) -
              12.0 * std::sin(kTwoPi * (hour - 14.0) / 24.0) +
              6.0 * noise[1][t],
          5.0, 100.0);
      weather[2][t] =
          std::max(0.0, 3.0 + 1.5 * std::sin(kTwoPi * day / 14.0 + gph) +
                            0.8 * std::sin(kTwoPi * hour / 24.0) +
                            0.9 * noise[2][t]);
      weather[3][t] = std::max(0.0, 2.0 * (noise[3][t] - 1.2));
    }

    std::array<std::vector<double>, 4> standardized = weather;
    for (auto& w : standardized) standardize(w);

    for (std::size_t t = 0; t < hours; ++t) {
      const HourStamp stamp = kSynthStart + static_cast<HourStamp>(t);
      const int slot = hour_of_week_slot(stamp);
      double fluct = spec.fluct_noise * fluct_noise[t];
      for (int c = 0; c < 4; ++c) {
        fluct += spec.weather_coefs[static_cast<std::size_t>(c)] *
                 standardized[static_cast<std::size_t>(c)][t];
      }
      const double load =
          spec.base_load * synth_weekly_profile(g, slot, spec.weekly_amplitude) *
          (1.0 + fluct);
      series.hours[t] = stamp;
      series.load[t] = std::max(load, 0.01 * spec.base_load);
      series.temperature[t] = weather[0][t];
      series.humidity[t] = weather[1][t];
      series.wind_speed[t] = weather[2][t];
      series.precipitation[t] = weather[3][t];
    }
    out.push_back(std::move(series));
  }
  return out;
}

CorruptionReport inject_gaps_and_spikes(const RawSeries& raw,
                                        std::size_t n_gaps,
                                        std::size_t n_spikes,
                                        std::uint64_t seed) {
  const std::size_t n = raw.size();
  const std::size_t margin = 48;
  const std::size_t spacing = 30;  // > 2*outlier window + max gap run
  if ((n_gaps + n_spikes) * spacing + 2 * margin > n) {
    throw ConfigError("inject_gaps_and_spikes: too many corruptions for " +
                      std::to_string(n) + " hours");
  }
  CorruptionReport report;
  report.series = raw;
  Rng rng(mix_seed(seed, 0xc0de));

  std::vector<std::size_t> positions;
  std::size_t guard = 0;
  while (positions.size() < n_gaps + n_spikes) {
    if (++guard > 100000) {
      throw ConfigError("inject_gaps_and_spikes: could not place corruptions");
    }
    const std::size_t pos =
        margin + rng.index(n - 2 * margin);
    bool ok = true;
    for (std::size_t other : positions) {
      const std::size_t lo = other > spacing ? other - spacing : 0;
      if (pos >= lo && pos <= other + spacing) {
        ok = false;
        break;
      }
    }
    if (ok) positions.push_back(pos);
  }

  for (std::size_t i = 0; i < n_gaps; ++i) {
    const std::size_t start = positions[i];
    const std::size_t len = 1 + rng.index(3);
    report.gap_starts.push_back(start);
    report.gap_lengths.push_back(len);
    for (std::size_t j = 0; j < len && start + j < n; ++j) {
      report.series.load[start + j] = std::nullopt;
    }
  }
  for (std::size_t i = 0; i < n_spikes; ++i) {
    const std::size_t pos = positions[n_gaps + i];
    const double factor = rng.uniform(5.0, 10.0);
    report.spike_positions.push_back(pos);
    report.series.load[pos] = *report.series.load[pos] * factor;
  }
  return report;
}

}  // namespace loadcast
