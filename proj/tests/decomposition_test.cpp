#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <vector>

#include "loadcast/dataset.hpp"
#include "loadcast/decomposition.hpp"
#include "loadcast/error.hpp"
#include "loadcast/rng.hpp"

using namespace loadcast;

TEST_CASE("compute_load_ratio") {
  const std::vector<double> constant(72, 500.0);
  const RatioSeries r = compute_load_ratio(constant, 0);
  CHECK(r.values.size() == 48);
  CHECK(r.start_slot == 24);
  for (double v : r.values) CHECK(v == 1.0);

  std::vector<double> step(48);
  for (int h = 0; h < 24; ++h) step[static_cast<std::size_t>(h)] = 100.0;
  for (int h = 24; h < 48; ++h) step[static_cast<std::size_t>(h)] = 110.0;
  for (double v : compute_load_ratio(step, 0).values) {
    CHECK(v == doctest::Approx(1.1));
  }

  std::vector<double> doubling(96);
  for (std::size_t t = 0; t < doubling.size(); ++t) {
    doubling[t] = std::pow(2.0, static_cast<double>(t) / 24.0);
  }
  for (double v : compute_load_ratio(doubling, 0).values) {
    CHECK(v == doctest::Approx(2.0).epsilon(1e-12));
  }

  std::vector<double> with_zero(48, 1.0);
  with_zero[10] = 0.0;
  CHECK_THROWS_AS((void)compute_load_ratio(with_zero, 0), DomainError);
  const std::vector<double> too_short(47, 1.0);
  CHECK_THROWS_AS((void)compute_load_ratio(too_short, 0), DataError);
}

TEST_CASE("extract_weekly_trend recovers periodic input verbatim") {
  // two identical weeks: per-slot means of equal pairs are exact
  RatioSeries ratios;
  ratios.start_slot = 0;
  std::vector<double> period(168);
  Rng rng(9);
  for (double& v : period) v = rng.uniform(0.8, 1.2);
  for (int rep = 0; rep < 2; ++rep) {
    ratios.values.insert(ratios.values.end(), period.begin(), period.end());
  }
  const WeeklyTrend trend = extract_weekly_trend(ratios, 1);
  for (int s = 0; s < 168; ++s) {
    CHECK(trend.profile[static_cast<std::size_t>(s)] ==
          period[static_cast<std::size_t>(s)]);
  }

  // a nonzero start slot rotates the profile, not the data
  RatioSeries shifted;
  shifted.start_slot = 24;
  shifted.values.assign(ratios.values.begin(), ratios.values.end());
  const WeeklyTrend rotated = extract_weekly_trend(shifted, 1);
  for (int s = 0; s < 168; ++s) {
    CHECK(rotated.profile[static_cast<std::size_t>((s + 24) % 168)] ==
          period[static_cast<std::size_t>(s)]);
  }
}

TEST_CASE("extract_weekly_trend averages and smooths") {
  RatioSeries ratios;
  ratios.start_slot = 0;
  ratios.values.assign(168, 1.0);
  ratios.values.insert(ratios.values.end(), 168, 1.2);
  const WeeklyTrend trend = extract_weekly_trend(ratios, 1);
  for (double v : trend.profile) CHECK(v == doctest::Approx(1.1));

  // circular box filter: a unit impulse spreads into width-5 mass 0.2
  RatioSeries impulse;
  impulse.start_slot = 0;
  impulse.values.assign(168, 0.0);
  impulse.values[0] = 1.0;
  const WeeklyTrend smoothed = extract_weekly_trend(impulse, 5);
  for (int s = 0; s < 168; ++s) {
    const bool near = s <= 2 || s >= 166;
    CHECK(smoothed.profile[static_cast<std::size_t>(s)] ==
          doctest::Approx(near ? 0.2 : 0.0));
  }

  // smoothing conserves the profile's mean
  Rng rng(10);
  RatioSeries noisy;
  noisy.start_slot = 13;
  for (int i = 0; i < 168 * 3; ++i) noisy.values.push_back(rng.uniform(0.5, 1.5));
  const WeeklyTrend raw = extract_weekly_trend(noisy, 1);
  const WeeklyTrend blur = extract_weekly_trend(noisy, 7);
  double mean_raw = 0.0, mean_blur = 0.0;
  for (int s = 0; s < 168; ++s) {
    mean_raw += raw.profile[static_cast<std::size_t>(s)];
    mean_blur += blur.profile[static_cast<std::size_t>(s)];
  }
  CHECK(std::abs(mean_raw - mean_blur) / 168.0 < 1e-12);

  RatioSeries partial;
  partial.start_slot = 0;
  partial.values.assign(100, 1.0);  // shorter than a week
  CHECK_THROWS_AS((void)extract_weekly_trend(partial, 1), DataError);
  CHECK_THROWS_AS((void)extract_weekly_trend(noisy, 4), DomainError);
}

TEST_CASE("trend extraction ignores week order") {
  Rng rng(11);
  std::vector<double> week_a(168), week_b(168);
  for (double& v : week_a) v = rng.uniform(0.7, 1.3);
  for (double& v : week_b) v = rng.uniform(0.7, 1.3);
  RatioSeries ab{week_a, 0};
  ab.values.insert(ab.values.end(), week_b.begin(), week_b.end());
  RatioSeries ba{week_b, 0};
  ba.values.insert(ba.values.end(), week_a.begin(), week_a.end());
  const WeeklyTrend ta = extract_weekly_trend(ab, 5);
  const WeeklyTrend tb = extract_weekly_trend(ba, 5);
  for (int s = 0; s < 168; ++s) {
    CHECK(std::abs(ta.profile[static_cast<std::size_t>(s)] -
                   tb.profile[static_cast<std::size_t>(s)]) < 1e-12);
  }
}

TEST_CASE("decompose and recompose are exact inverses") {
  Rng rng(12);
  RatioSeries ratios;
  ratios.start_slot = 48;
  for (int i = 0; i < 500; ++i) ratios.values.push_back(rng.uniform(0.6, 1.4));
  WeeklyTrend trend;
  trend.filter_width = 1;
  for (double& v : trend.profile) v = rng.uniform(0.8, 1.2);

  const FluctuationSeries delta = decompose(ratios, trend);
  // elementwise subtraction oracle
  for (std::size_t i = 0; i < ratios.values.size(); ++i) {
    const int slot = (ratios.start_slot + static_cast<int>(i)) % 168;
    CHECK(delta.values[i] ==
          ratios.values[i] - trend.profile[static_cast<std::size_t>(slot)]);
  }

  const RatioSeries back = recompose_ratio(delta, trend);
  for (std::size_t i = 0; i < ratios.values.size(); ++i) {
    CHECK(std::abs(back.values[i] - ratios.values[i]) < 1e-15);
  }

  // ratios equal to the trend leave zero fluctuation
  RatioSeries on_trend;
  on_trend.start_slot = 0;
  for (int i = 0; i < 336; ++i) {
    on_trend.values.push_back(trend.profile[static_cast<std::size_t>(i % 168)]);
  }
  for (double v : decompose(on_trend, trend).values) CHECK(v == 0.0);
}

TEST_CASE("recompose_load") {
  std::vector<double> prev(24);
  for (std::size_t h = 0; h < 24; ++h) prev[h] = 100.0 + static_cast<double>(h);
  const std::vector<double> unit(24, 1.0);
  const auto same = recompose_load(unit, prev);
  for (std::size_t h = 0; h < 24; ++h) CHECK(same[h] == prev[h]);

  const std::vector<double> up(24, 1.05);
  const std::vector<double> flat(24, 200.0);
  for (double v : recompose_load(up, flat)) CHECK(v == doctest::Approx(210.0));

  const std::vector<double> wrong(23, 1.0);
  CHECK_THROWS_AS((void)recompose_load(wrong, prev), ShapeError);

  // load -> ratio -> load round trip is exact to relative 1e-12
  Rng rng(13);
  std::vector<double> load(30 * 24);
  for (double& v : load) v = rng.uniform(200.0, 900.0);
  const RatioSeries ratios = compute_load_ratio(load, 0);
  for (int day = 1; day + 1 < 30; ++day) {
    std::vector<double> day_ratio(
        ratios.values.begin() + static_cast<long>((day - 1) * 24),
        ratios.values.begin() + static_cast<long>(day * 24));
    std::vector<double> prev_day(load.begin() + static_cast<long>((day - 1) * 24),
                                 load.begin() + static_cast<long>(day * 24));
    const auto restored = recompose_load(day_ratio, prev_day);
    for (std::size_t h = 0; h < 24; ++h) {
      const double actual = load[static_cast<std::size_t>(day * 24) + h];
      CHECK(std::abs(restored[h] - actual) / actual < 1e-12);
    }
  }
}

TEST_CASE("trend export and import round trip") {
  Rng rng(14);
  WeeklyTrend trend;
  trend.filter_width = 5;
  for (double& v : trend.profile) v = rng.uniform(0.5, 1.5);
  const auto path = std::filesystem::temp_directory_path() / "lc_trend.csv";
  export_trend(path, trend);
  const WeeklyTrend loaded = import_trend(path);
  for (int s = 0; s < 168; ++s) {
    CHECK(loaded.profile[static_cast<std::size_t>(s)] ==
          trend.profile[static_cast<std::size_t>(s)]);
  }
  std::filesystem::remove(path);
}
