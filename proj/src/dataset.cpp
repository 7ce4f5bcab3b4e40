#include "loadcast/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "loadcast/decomposition.hpp"
#include "loadcast/error.hpp"

namespace loadcast {

namespace {

using std::chrono::sys_days;
using std::chrono::year_month_day;

std::optional<double> parse_cell(std::string_view cell) {
  if (cell.empty()) return std::nullopt;
  double value = 0.0;
  const auto* end = cell.data() + cell.size();
  auto [ptr, ec] = std::from_chars(cell.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw ParseError("bad numeric cell '" + std::string(cell) + "'");
  }
  return value;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return fields;
}

double median_of(std::vector<double>& scratch) {
  const std::size_t n = scratch.size();
  const std::size_t mid = n / 2;
  std::nth_element(scratch.begin(), scratch.begin() + mid, scratch.end());
  double hi = scratch[mid];
  if (n % 2 == 1) return hi;
  double lo = *std::max_element(scratch.begin(), scratch.begin() + mid);
  return 0.5 * (lo + hi);
}

}  // namespace

HourStamp parse_timestamp(const std::string& text) {
  int y = 0, mo = 0, d = 0, h = 0, mi = 0;
  if (std::sscanf(text.c_str(), "%d-%d-%d %d:%d", &y, &mo, &d, &h, &mi) != 5) {
    throw ParseError("bad timestamp '" + text + "'");
  }
  const year_month_day ymd{std::chrono::year{y}, std::chrono::month{unsigned(mo)},
                           std::chrono::day{unsigned(d)}};
  if (!ymd.ok() || h < 0 || h > 23 || mi != 0) {
    throw ParseError("bad timestamp '" + text + "'");
  }
  const auto days = sys_days{ymd}.time_since_epoch().count();
  return static_cast<HourStamp>(days) * kHoursPerDay + h;
}

std::string format_timestamp(HourStamp hour) {
  const auto ymd = civil_date(hour);
  const int h = static_cast<int>(((hour % kHoursPerDay) + kHoursPerDay) %
                                 kHoursPerDay);
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u %02d:00",
                static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()),
                static_cast<unsigned>(ymd.day()), h);
  return buf;
}

year_month_day civil_date(HourStamp hour) {
  HourStamp days = hour / kHoursPerDay;
  if (hour % kHoursPerDay < 0) --days;
  return year_month_day{
      sys_days{std::chrono::days{static_cast<long>(days)}}};
}

int weekday_index(HourStamp hour) {
  const auto ymd = civil_date(hour);
  const std::chrono::weekday wd{sys_days{ymd}};
  return static_cast<int>(wd.iso_encoding()) - 1;
}

int hour_of_week_slot(HourStamp hour) {
  const int h = static_cast<int>(((hour % kHoursPerDay) + kHoursPerDay) %
                                 kHoursPerDay);
  return weekday_index(hour) * kHoursPerDay + h;
}

bool RawSeries::is_clean() const {
  if (hours.empty()) return false;
  for (std::size_t i = 0; i < hours.size(); ++i) {
    if (i > 0 && hours[i] != hours[i - 1] + 1) return false;
    if (!load[i] || !temperature[i] || !humidity[i] || !wind_speed[i] ||
        !precipitation[i]) {
      return false;
    }
  }
  return true;
}

CalendarFlags compute_calendar_flags(year_month_day date) {
  const std::chrono::weekday wd{sys_days{date}};
  const int iso = static_cast<int>(wd.iso_encoding());  // Mon=1 .. Sun=7
  CalendarFlags flags;
  flags.is_saturday = iso == 6 ? 1 : 0;
  flags.is_monday = iso == 1 ? 1 : 0;
  flags.is_weekend = iso >= 6 ? 1 : 0;
  const unsigned month = static_cast<unsigned>(date.month());
  flags.is_summer = (month >= 6 && month <= 8) ? 1 : 0;
  return flags;
}

RawSeries load_raw(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  RawSeries series;
  series.district_id = path.stem().string();
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line_no == 1 && line.starts_with("timestamp")) continue;  // header
    const auto fields = split_fields(line);
    if (fields.size() != 6) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) +
                       ": expected 6 columns, got " +
                       std::to_string(fields.size()));
    }
    HourStamp stamp = 0;
    std::optional<double> cells[5];
    try {
      stamp = parse_timestamp(std::string(fields[0]));
      for (int c = 0; c < 5; ++c) cells[c] = parse_cell(fields[c + 1]);
    } catch (const ParseError& e) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": " +
                       e.what());
    }
    if (!series.hours.empty() && stamp == series.hours.back()) {
      continue;  // duplicated rows keep the first occurrence
    }
    if (!series.hours.empty() && stamp < series.hours.back()) {
      throw DataError(path.string() + ":" + std::to_string(line_no) +
                      ": timestamps not increasing after deduplication");
    }
    series.hours.push_back(stamp);
    series.load.push_back(cells[0]);
    series.temperature.push_back(cells[1]);
    series.humidity.push_back(cells[2]);
    series.wind_speed.push_back(cells[3]);
    series.precipitation.push_back(cells[4]);
  }
  if (series.hours.empty()) throw DataError(path.string() + ": empty file");
  return series;
}

std::vector<double> fill_missing_linear(
    std::span<const std::optional<double>> series) {
  const std::size_t n = series.size();
  std::vector<double> out(n, 0.0);
  std::size_t first_known = n;
  for (std::size_t i = 0; i < n; ++i) {
    if (series[i]) {
      first_known = i;
      break;
    }
  }
  if (first_known == n) {
    throw DataError("fill_missing_linear: all values missing");
  }
  // leading gap: nearest-value extension
  for (std::size_t i = 0; i <= first_known; ++i) out[i] = *series[first_known];
  std::size_t prev = first_known;
  for (std::size_t i = first_known + 1; i < n; ++i) {
    if (!series[i]) continue;
    out[i] = *series[i];
    if (i > prev + 1) {
      const double lo = *series[prev];
      const double hi = *series[i];
      const double span = static_cast<double>(i - prev);
      for (std::size_t j = prev + 1; j < i; ++j) {
        out[j] = lo + (hi - lo) * static_cast<double>(j - prev) / span;
      }
    }
    prev = i;
  }
  // trailing gap: nearest-value extension
  for (std::size_t i = prev + 1; i < n; ++i) out[i] = out[prev];
  return out;
}

std::vector<std::uint8_t> detect_outliers(std::span<const double> series,
                                          int window, double k) {
  if (window < 1) throw DomainError("detect_outliers: window must be >= 1");
  if (k <= 0.0) throw DomainError("detect_outliers: k must be > 0");
  const std::size_t n = series.size();
  std::vector<std::uint8_t> flagged(n, 0);
  std::vector<double> neighbors;
  std::vector<double> deviations;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i >= static_cast<std::size_t>(window)
                               ? i - static_cast<std::size_t>(window)
                               : 0;
    const std::size_t hi =
        std::min(n - 1, i + static_cast<std::size_t>(window));
    neighbors.clear();
    for (std::size_t j = lo; j <= hi; ++j) {
      if (j != i) neighbors.push_back(series[j]);
    }
    if (neighbors.empty()) continue;
    deviations = neighbors;
    const double med = median_of(deviations);
    deviations.clear();
    for (double v : neighbors) deviations.push_back(std::abs(v - med));
    const double mad = std::max(median_of(deviations), 1e-9);
    if (std::abs(series[i] - med) > k * mad) flagged[i] = 1;
  }
  return flagged;
}

std::vector<double> replace_outliers(std::span<const double> series,
                                     int window, double k) {
  const auto flagged = detect_outliers(series, window, k);
  std::vector<std::optional<double>> holes(series.size());
  bool any = false;
  for (std::size_t i = 0; i < series.size(); ++i) {
    if (flagged[i]) {
      any = true;
    } else {
      holes[i] = series[i];
    }
  }
  if (!any) return std::vector<double>(series.begin(), series.end());
  return fill_missing_linear(holes);
}

RawSeries clean_series(const RawSeries& raw, const CleanParams& params) {
  if (raw.hours.empty()) throw DataError("clean_series: empty series");
  RawSeries grid;
  grid.district_id = raw.district_id;
  const HourStamp first = raw.hours.front();
  const HourStamp last = raw.hours.back();
  const std::size_t total = static_cast<std::size_t>(last - first + 1);
  grid.hours.resize(total);
  grid.load.resize(total);
  grid.temperature.resize(total);
  grid.humidity.resize(total);
  grid.wind_speed.resize(total);
  grid.precipitation.resize(total);
  for (std::size_t i = 0; i < total; ++i) {
    grid.hours[i] = first + static_cast<HourStamp>(i);
  }
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const auto idx = static_cast<std::size_t>(raw.hours[i] - first);
    grid.load[idx] = raw.load[i];
    grid.temperature[idx] = raw.temperature[i];
    grid.humidity[idx] = raw.humidity[i];
    grid.wind_speed[idx] = raw.wind_speed[i];
    grid.precipitation[idx] = raw.precipitation[i];
  }

  auto fill_channel = [](std::vector<std::optional<double>>& channel) {
    const auto dense = fill_missing_linear(channel);
    for (std::size_t i = 0; i < channel.size(); ++i) channel[i] = dense[i];
  };
  // load: fill gaps first, then repair outliers
  {
    auto dense = fill_missing_linear(grid.load);
    dense = replace_outliers(dense, params.outlier_window, params.outlier_k);
    for (std::size_t i = 0; i < total; ++i) grid.load[i] = dense[i];
  }
  fill_channel(grid.temperature);
  fill_channel(grid.humidity);
  fill_channel(grid.wind_speed);
  for (auto& cell : grid.precipitation) {
    if (!cell) cell = 0.0;  // missing precipitation means no rain
  }
  return grid;
}

DistrictDataset build_district_dataset(const RawSeries& raw) {
  if (!raw.is_clean()) {
    throw DataError("build_district_dataset: series must be cleaned first");
  }
  if (raw.size() < 2 * kHoursPerDay) {
    throw DataError("build_district_dataset: need at least 48 hours, got " +
                    std::to_string(raw.size()));
  }
  if (raw.hours.front() % kHoursPerDay != 0 ||
      raw.size() % kHoursPerDay != 0) {
    throw DataError(
        "build_district_dataset: series must cover whole days starting at "
        "00:00");
  }
  std::vector<double> load(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) load[i] = *raw.load[i];

  const RatioSeries ratios =
      compute_load_ratio(load, hour_of_week_slot(raw.hours.front()));

  DistrictDataset ds;
  ds.district_id = raw.district_id;
  ds.start_hour = raw.hours.front() + kHoursPerDay;
  ds.start_slot = ratios.start_slot;
  const std::size_t rows = ratios.values.size();
  ds.features.resize(rows * kNumFeatures);
  ds.load.assign(load.begin() + kHoursPerDay, load.end());
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t raw_idx = r + kHoursPerDay;
    const auto flags = compute_calendar_flags(civil_date(raw.hours[raw_idx]));
    double* row = ds.features.data() + r * kNumFeatures;
    row[kColRatio] = ratios.values[r];
    row[kColTemperature] = *raw.temperature[raw_idx];
    row[kColHumidity] = *raw.humidity[raw_idx];
    row[kColWindSpeed] = *raw.wind_speed[raw_idx];
    row[kColPrecipitation] = *raw.precipitation[raw_idx];
    row[kColSaturday] = flags.is_saturday;
    row[kColMonday] = flags.is_monday;
    row[kColSummer] = flags.is_summer;
    row[kColWeekend] = flags.is_weekend;
  }
  return ds;
}

void write_raw_csv(const std::filesystem::path& path,
                   const RawSeries& series) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "timestamp,load,temperature,humidity,wind_speed,precipitation\n";
  char buf[32];
  auto cell = [&buf](const std::optional<double>& v) -> std::string {
    if (!v) return "";
    std::snprintf(buf, sizeof(buf), "%.10g", *v);
    return buf;
  };
  for (std::size_t i = 0; i < series.size(); ++i) {
    out << format_timestamp(series.hours[i]) << ',' << cell(series.load[i])
        << ',' << cell(series.temperature[i]) << ','
        << cell(series.humidity[i]) << ',' << cell(series.wind_speed[i])
        << ',' << cell(series.precipitation[i]) << '\n';
  }
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace loadcast
