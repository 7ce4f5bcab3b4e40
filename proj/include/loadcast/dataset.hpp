#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace loadcast {

// Absolute hour index: days since 1970-01-01 * 24 + hour of day.
using HourStamp = std::int64_t;

HourStamp parse_timestamp(const std::string& text);
std::string format_timestamp(HourStamp hour);
std::chrono::year_month_day civil_date(HourStamp hour);
// Monday = 0 .. Sunday = 6.
int weekday_index(HourStamp hour);
// Hour-of-week slot, Monday 00:00 = slot 0 .. Sunday 23:00 = slot 167.
int hour_of_week_slot(HourStamp hour);

// One district's raw hourly series. Cells may be missing
// (disengaged optional) until the series is cleaned.
struct RawSeries {
  std::string district_id;
  std::vector<HourStamp> hours;
  std::vector<std::optional<double>> load;
  std::vector<std::optional<double>> temperature;
  std::vector<std::optional<double>> humidity;
  std::vector<std::optional<double>> wind_speed;
  std::vector<std::optional<double>> precipitation;

  std::size_t size() const { return hours.size(); }
  bool is_clean() const;
};

struct CalendarFlags {
  int is_saturday = 0;
  int is_monday = 0;
  int is_weekend = 0;
  int is_summer = 0;  // June through August
};

CalendarFlags compute_calendar_flags(std::chrono::year_month_day date);

// Feature column layout of DistrictDataset::features.
inline constexpr int kColRatio = 0;
inline constexpr int kColTemperature = 1;
inline constexpr int kColHumidity = 2;
inline constexpr int kColWindSpeed = 3;
inline constexpr int kColPrecipitation = 4;
inline constexpr int kColSaturday = 5;
inline constexpr int kColMonday = 6;
inline constexpr int kColSummer = 7;
inline constexpr int kColWeekend = 8;
inline constexpr int kNumFeatures = 9;
inline constexpr int kHoursPerDay = 24;
inline constexpr int kSlotsPerWeek = 168;

// Model-ready hourly features for one district. Rows start at the first hour
// with a defined day-over-day ratio (the raw series' second day) and always
// cover whole days. `load` keeps the actual load aligned with each feature
// row so predictions can be restored to load scale.
struct DistrictDataset {
  std::string district_id;
  HourStamp start_hour = 0;
  int start_slot = 0;
  std::vector<double> features;  // row-major [rows x kNumFeatures]
  std::vector<double> load;

  std::size_t rows() const { return features.size() / kNumFeatures; }
  std::size_t days() const { return rows() / kHoursPerDay; }
  double feature(std::size_t row, int col) const {
    return features[row * kNumFeatures + static_cast<std::size_t>(col)];
  }
};

// Parses one `<district_id>.csv`. Duplicate timestamps collapse to the first
// occurrence; rows must otherwise be in increasing time order. Gaps in the
// hourly grid are permitted here and are filled by clean_series.
RawSeries load_raw(const std::filesystem::path& path);

// Interior gaps: linear interpolation between nearest known neighbors.
// Leading/trailing gaps: nearest-value extension.
std::vector<double> fill_missing_linear(
    std::span<const std::optional<double>> series);

std::vector<std::uint8_t> detect_outliers(std::span<const double> series,
                                          int window, double k);

// A point is an outlier iff |x - median(neighbors)| > k * MAD(neighbors),
// neighbors being the +/-window hours around it (excluding the point itself,
// truncated at the boundaries). Outliers are removed and re-filled by linear
// interpolation.
std::vector<double> replace_outliers(std::span<const double> series,
                                     int window = 12, double k = 6.0);

struct CleanParams {
  int outlier_window = 12;
  double outlier_k = 6.0;
};

// Full preprocessing: completes the hourly grid, fills missing values
// (precipitation gaps become 0), and repairs load outliers. The result has
// every cell engaged.
RawSeries clean_series(const RawSeries& raw, const CleanParams& params = {});

// Requires a cleaned, day-aligned series of at least 48 hours. Consumes the
// first day (no defined ratio) and attaches weather and calendar features.
DistrictDataset build_district_dataset(const RawSeries& raw);

void write_raw_csv(const std::filesystem::path& path, const RawSeries& series);

}  // namespace loadcast
