#pragma once

#include <array>
#include <filesystem>
#include <span>
#include <vector>

namespace loadcast {

// Day-over-day same-hour load ratio: values[i] = load[i + 24] / load[i].
// start_slot is the hour-of-week slot (Monday 00:00 = 0) of values[0].
struct RatioSeries {
  std::vector<double> values;
  int start_slot = 0;
};

// Smoothed hour-of-week mean of the load ratio; the knowledge-derived
// reference the model's residual is measured against.
struct WeeklyTrend {
  std::array<double, 168> profile{};
  int filter_width = 1;

  double at_slot(int slot) const { return profile[static_cast<size_t>(slot)]; }
};

// Residual of ratio minus trend, slot-aligned with the ratio series.
struct FluctuationSeries {
  std::vector<double> values;
  int start_slot = 0;
};

// Requires at least 48 hours of strictly positive load.
RatioSeries compute_load_ratio(std::span<const double> load,
                               int start_slot_of_load);

// Per-slot mean of every ratio value landing on each hour-of-week slot,
// then a circular centered moving average of the given odd width. Requires
// every slot to be covered (at least one full week of ratios).
WeeklyTrend extract_weekly_trend(const RatioSeries& ratios,
                                 int filter_width = 5);
// Pooled variant: slots are averaged over all series together.
WeeklyTrend extract_weekly_trend(std::span<const RatioSeries> ratios,
                                 int filter_width = 5);

FluctuationSeries decompose(const RatioSeries& ratios,
                            const WeeklyTrend& trend);

// Exact inverse of decompose.
RatioSeries recompose_ratio(const FluctuationSeries& fluctuation,
                            const WeeklyTrend& trend);

// One day of load from its predicted ratios and the previous day's load:
// out[h] = predicted_ratio[h] * prev_day_load[h].
std::array<double, 24> recompose_load(std::span<const double> predicted_ratio,
                                      std::span<const double> prev_day_load);

// 168-line `slot_index,value` text file.
void export_trend(const std::filesystem::path& path, const WeeklyTrend& trend);
WeeklyTrend import_trend(const std::filesystem::path& path);

}  // namespace loadcast
