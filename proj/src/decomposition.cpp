#include "loadcast/decomposition.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>

#include "loadcast/dataset.hpp"
#include "loadcast/error.hpp"

namespace loadcast {

RatioSeries compute_load_ratio(std::span<const double> load,
                               int start_slot_of_load) {
  if (load.size() < 2 * kHoursPerDay) {
    throw DataError("compute_load_ratio: need at least 48 hours, got " +
                    std::to_string(load.size()));
  }
  for (std::size_t i = 0; i < load.size(); ++i) {
    if (!(load[i] > 0.0)) {
      throw DomainError("compute_load_ratio: nonpositive load at hour " +
                        std::to_string(i));
    }
  }
  RatioSeries out;
  out.start_slot = (start_slot_of_load + kHoursPerDay) % kSlotsPerWeek;
  out.values.resize(load.size() - kHoursPerDay);
  for (std::size_t i = 0; i + kHoursPerDay < load.size(); ++i) {
    out.values[i] = load[i + kHoursPerDay] / load[i];
  }
  return out;
}

WeeklyTrend extract_weekly_trend(const RatioSeries& ratios, int filter_width) {
  return extract_weekly_trend(std::span<const RatioSeries>{&ratios, 1},
                              filter_width);
}

WeeklyTrend extract_weekly_trend(std::span<const RatioSeries> ratios,
                                 int filter_width) {
  if (filter_width < 1 || filter_width % 2 == 0) {
    throw DomainError("extract_weekly_trend: filter width must be odd and >= 1");
  }
  std::array<double, 168> sums{};
  std::array<long, 168> counts{};
  for (const RatioSeries& series : ratios) {
    for (std::size_t i = 0; i < series.values.size(); ++i) {
      const int slot =
          (series.start_slot + static_cast<int>(i % kSlotsPerWeek)) %
          kSlotsPerWeek;
      sums[static_cast<std::size_t>(slot)] += series.values[i];
      counts[static_cast<std::size_t>(slot)] += 1;
    }
  }
  std::array<double, 168> raw{};
  for (int s = 0; s < kSlotsPerWeek; ++s) {
    if (counts[static_cast<std::size_t>(s)] == 0) {
      throw DataError("extract_weekly_trend: slot " + std::to_string(s) +
                      " has no samples; need at least one full week");
    }
    raw[static_cast<std::size_t>(s)] =
        sums[static_cast<std::size_t>(s)] /
        static_cast<double>(counts[static_cast<std::size_t>(s)]);
  }
  WeeklyTrend trend;
  trend.filter_width = filter_width;
  if (filter_width == 1) {
    trend.profile = raw;
    return trend;
  }
  const int half = filter_width / 2;
  for (int s = 0; s < kSlotsPerWeek; ++s) {
    double acc = 0.0;
    for (int off = -half; off <= half; ++off) {
      const int idx = ((s + off) % kSlotsPerWeek + kSlotsPerWeek) %
                      kSlotsPerWeek;
      acc += raw[static_cast<std::size_t>(idx)];
    }
    trend.profile[static_cast<std::size_t>(s)] =
        acc / static_cast<double>(filter_width);
  }
  return trend;
}

FluctuationSeries decompose(const RatioSeries& ratios,
                            const WeeklyTrend& trend) {
  FluctuationSeries out;
  out.start_slot = ratios.start_slot;
  out.values.resize(ratios.values.size());
  for (std::size_t i = 0; i < ratios.values.size(); ++i) {
    const int slot =
        (ratios.start_slot + static_cast<int>(i % kSlotsPerWeek)) %
        kSlotsPerWeek;
    out.values[i] = ratios.values[i] - trend.at_slot(slot);
  }
  return out;
}

RatioSeries recompose_ratio(const FluctuationSeries& fluctuation,
                            const WeeklyTrend& trend) {
  RatioSeries out;
  out.start_slot = fluctuation.start_slot;
  out.values.resize(fluctuation.values.size());
  for (std::size_t i = 0; i < fluctuation.values.size(); ++i) {
    const int slot =
        (fluctuation.start_slot + static_cast<int>(i % kSlotsPerWeek)) %
        kSlotsPerWeek;
    out.values[i] = fluctuation.values[i] + trend.at_slot(slot);
  }
  return out;
}

std::array<double, 24> recompose_load(std::span<const double> predicted_ratio,
                                      std::span<const double> prev_day_load) {
  if (predicted_ratio.size() != 24 || prev_day_load.size() != 24) {
    throw ShapeError("recompose_load: both inputs must have length 24");
  }
  std::array<double, 24> out{};
  for (std::size_t h = 0; h < 24; ++h) {
    out[h] = predicted_ratio[h] * prev_day_load[h];
  }
  return out;
}

void export_trend(const std::filesystem::path& path,
                  const WeeklyTrend& trend) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  char buf[48];
  for (int s = 0; s < kSlotsPerWeek; ++s) {
    std::snprintf(buf, sizeof(buf), "%d,%.17g\n", s,
                  trend.profile[static_cast<std::size_t>(s)]);
    out << buf;
  }
  if (!out) throw IoError("write failed for " + path.string());
}

WeeklyTrend import_trend(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  WeeklyTrend trend;
  std::string line;
  int read = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    int slot = 0;
    double value = 0.0;
    if (std::sscanf(line.c_str(), "%d,%lg", &slot, &value) != 2 ||
        slot != read) {
      throw ParseError(path.string() + ": bad trend line '" + line + "'");
    }
    if (read >= kSlotsPerWeek) {
      throw ParseError(path.string() + ": more than 168 slots");
    }
    trend.profile[static_cast<std::size_t>(slot)] = value;
    ++read;
  }
  if (read != kSlotsPerWeek) {
    throw ParseError(path.string() + ": expected 168 slots, got " +
                     std::to_string(read));
  }
  return trend;
}

}  // namespace loadcast
