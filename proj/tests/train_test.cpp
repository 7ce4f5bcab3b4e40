#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <vector>

#include "loadcast/error.hpp"
#include "loadcast/rng.hpp"
#include "loadcast/synthgen.hpp"
#include "loadcast/train.hpp"

using namespace loadcast;

namespace {

std::vector<DistrictDataset> make_districts(SynthSpec spec) {
  std::vector<DistrictDataset> out;
  for (const RawSeries& series : generate(spec)) {
    out.push_back(build_district_dataset(series));
  }
  return out;
}

// short toy windows keep these contract tests fast
constexpr std::size_t kToyLen = 48;

// targets linear in the window: a scaled whole-window ratio mean plus a
// fixed per-hour offset pattern
std::vector<Sample> planted_linear_samples(std::size_t count, Rng& rng) {
  std::vector<Sample> samples;
  for (std::size_t s = 0; s < count; ++s) {
    Sample sample;
    sample.input.resize(kToyLen * kNumFeatures);
    for (double& v : sample.input) v = rng.uniform(-1.0, 1.0);
    double window_ratio_mean = 0.0;
    for (std::size_t r = 0; r < kToyLen; ++r) {
      window_ratio_mean += sample.input[r * kNumFeatures + kColRatio];
    }
    window_ratio_mean /= static_cast<double>(kToyLen);
    for (std::size_t h = 0; h < 24; ++h) {
      sample.target_delta[h] =
          1.2 * window_ratio_mean +
          0.15 * std::sin(2.0 * std::numbers::pi * static_cast<double>(h) / 24.0);
    }
    samples.push_back(std::move(sample));
  }
  return samples;
}

double target_variance(std::span<const Sample> samples) {
  double mean = 0.0;
  std::size_t n = 0;
  for (const Sample& s : samples) {
    for (double v : s.target_delta) {
      mean += v;
      ++n;
    }
  }
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (const Sample& s : samples) {
    for (double v : s.target_delta) var += (v - mean) * (v - mean);
  }
  return var / static_cast<double>(n);
}

}  // namespace

TEST_CASE("make_windows counts and alignment") {
  SynthSpec spec;
  spec.n_districts = 1;
  spec.groups = {0};
  spec.days = 15;
  const auto full = make_districts(spec)[0];
  const auto ds = slice_days(full, 0, 10);  // 10 ratio-days
  REQUIRE(ds.days() == 10);
  const WeeklyTrend trend = extract_weekly_trend(ratio_series_of(ds), 1);
  const auto fluct = fluctuation_for_mode(ds, trend, AblationMode::kFull);
  const auto samples = make_windows(ds, fluct);
  CHECK(samples.size() == 6);

  for (const Sample& s : samples) {
    CHECK(s.input.size() == 96 * kNumFeatures);
    for (std::size_t h = 0; h < 24; ++h) {
      const int slot = (s.target_slot0 + static_cast<int>(h)) % kSlotsPerWeek;
      // decomposition identity carried into the samples
      CHECK(std::abs(s.target_ratio[h] -
                     (s.target_delta[h] + trend.at_slot(slot))) < 1e-12);
    }
    // the input window ends the hour before the target day
    const std::size_t first_in = static_cast<std::size_t>(s.day_index - 4) * 24;
    for (std::size_t c = 0; c < kNumFeatures; ++c) {
      CHECK(s.input[c] == ds.feature(first_in, static_cast<int>(c)));
    }
    // previous-day loads restore the target day exactly
    for (std::size_t h = 0; h < 24; ++h) {
      const double actual = ds.load[static_cast<std::size_t>(s.day_index) * 24 + h];
      CHECK(std::abs(s.target_ratio[h] * s.prev_day_load[h] - actual) /
                actual <
            1e-12);
    }
  }

  // 5 ratio-days is the boundary: exactly one sample
  const auto tiny = slice_days(full, 0, 5);
  const auto tiny_fluct = FluctuationSeries{
      std::vector<double>(tiny.rows(), 0.0), tiny.start_slot};
  CHECK(make_windows(tiny, tiny_fluct).size() == 1);

  const auto nope = slice_days(full, 0, 4);
  const auto nope_fluct = FluctuationSeries{
      std::vector<double>(nope.rows(), 0.0), nope.start_slot};
  CHECK_THROWS_AS((void)make_windows(nope, nope_fluct), DataError);
}

TEST_CASE("mse") {
  const std::vector<double> a{1.0, 2.0};
  CHECK(mse(a, a) == 0.0);
  const std::vector<double> zeros{0.0, 0.0};
  CHECK(mse(a, zeros) == doctest::Approx(2.5));
  const std::vector<double> short_vec{1.0};
  CHECK_THROWS_AS((void)mse(a, short_vec), ShapeError);
}

TEST_CASE("training fits a zero target from above") {
  Rng rng(40);
  std::vector<Sample> samples;
  for (int s = 0; s < 24; ++s) {
    Sample sample;
    sample.input.resize(kToyLen * kNumFeatures);
    for (double& v : sample.input) v = rng.uniform(-1.0, 1.0);
    sample.target_delta.fill(0.0);
    samples.push_back(std::move(sample));
  }
  model::Config cfg;
  cfg.d_model = 8;
  cfg.input_len = kToyLen;
  model::Transformer m(cfg, 91);
  TrainConfig tc;
  tc.epochs = 60;
  tc.learning_rate = 3e-3;
  tc.seed = 7;
  const TrainResult result = train_model(m, samples, tc);
  REQUIRE(result.loss_curve.size() == 60);
  CHECK(result.loss_curve.back() < result.loss_curve.front());
  CHECK(result.loss_curve.back() < 1e-3);
}

TEST_CASE("training fits a planted linear map well below target variance") {
  Rng rng(41);
  const auto samples = planted_linear_samples(64, rng);
  model::Config cfg;
  cfg.d_model = 8;
  cfg.input_len = kToyLen;
  model::Transformer m(cfg, 92);
  TrainConfig tc;
  tc.epochs = 250;
  tc.learning_rate = 3e-3;
  tc.seed = 8;
  const TrainResult result = train_model(m, samples, tc);
  const double floor = 0.10 * target_variance(samples);
  CHECK(result.loss_curve.back() < floor);
}

TEST_CASE("training diverges loudly on an absurd learning rate") {
  Rng rng(42);
  const auto samples = planted_linear_samples(8, rng);
  model::Config cfg;
  cfg.d_model = 4;
  cfg.input_len = kToyLen;
  model::Transformer m(cfg, 93);
  TrainConfig tc;
  tc.epochs = 4;
  tc.learning_rate = 1e200;
  CHECK_THROWS_AS((void)train_model(m, samples, tc), TrainingError);
}

TEST_CASE("evaluate restores loads exactly when the fluctuation is zero") {
  SynthSpec spec;
  spec.n_districts = 1;
  spec.groups = {0};
  spec.days = 15;  // 14 ratio-days: slot means average two identical weeks
  spec.weather_coefs = {0, 0, 0, 0};
  spec.fluct_noise = 0.0;
  const auto ds = make_districts(spec)[0];
  const WeeklyTrend trend = extract_weekly_trend(ratio_series_of(ds), 1);
  const auto fluct = fluctuation_for_mode(ds, trend, AblationMode::kFull);
  for (double v : fluct.values) CHECK(v == 0.0);
  const auto samples = make_windows(ds, fluct);
  const EvalResult eval =
      evaluate(nullptr, samples, trend, AblationMode::kDtOnly, 100.0);
  CHECK(eval.ratio_mse == 0.0);
  CHECK(eval.load_mse == 0.0);

  // smoothing the trend introduces only a small distortion floor
  const WeeklyTrend smoothed = extract_weekly_trend(ratio_series_of(ds), 5);
  const auto fluct5 = fluctuation_for_mode(ds, smoothed, AblationMode::kFull);
  const auto samples5 = make_windows(ds, fluct5);
  const EvalResult eval5 =
      evaluate(nullptr, samples5, smoothed, AblationMode::kDtOnly, 100.0);
  CHECK(eval5.ratio_mse > 0.0);
  double ratio_var = 0.0, ratio_mean = 0.0;
  const auto ratios = ratio_series_of(ds);
  for (double v : ratios.values) ratio_mean += v;
  ratio_mean /= static_cast<double>(ratios.values.size());
  for (double v : ratios.values) {
    ratio_var += (v - ratio_mean) * (v - ratio_mean);
  }
  ratio_var /= static_cast<double>(ratios.values.size());
  CHECK(eval5.ratio_mse < 0.1 * ratio_var);

  // transformer_only trains against the raw ratio: trend is treated as zero
  const auto raw = fluctuation_for_mode(ds, trend, AblationMode::kTransformerOnly);
  for (std::size_t i = 0; i < raw.values.size(); ++i) {
    CHECK(raw.values[i] == ratios.values[i]);
  }

  CHECK_THROWS_AS(
      (void)evaluate(nullptr, samples, trend, AblationMode::kFull, 100.0),
      ConfigError);
  CHECK_THROWS_AS(
      (void)evaluate(nullptr, samples, trend, AblationMode::kDtOnly, 0.0),
      DomainError);
}

TEST_CASE("cross validation partitions districts and reports AVG") {
  SynthSpec spec;
  spec.days = 21;
  spec.n_districts = 4;
  const auto districts = make_districts(spec);

  CrossValConfig cv;
  cv.folds = 4;
  cv.train.mode = AblationMode::kDtOnly;
  const ExperimentReport report = cross_validate(districts, cv);
  REQUIRE(report.rows.size() == 4);
  std::vector<std::string> seen;
  for (const auto& row : report.rows) seen.push_back(row.district);
  std::sort(seen.begin(), seen.end());
  CHECK(seen == std::vector<std::string>{"D00", "D01", "D02", "D03"});

  const DistrictMetric avg = report.average();
  double manual = 0.0;
  for (const auto& row : report.rows) manual += row.ratio_mse;
  manual /= 4.0;
  CHECK(std::abs(avg.ratio_mse - manual) < 1e-12);

  // 12 districts in 4 folds: every district still tested exactly once
  SynthSpec spec12 = spec;
  spec12.n_districts = 12;
  spec12.groups.assign(12, 0);
  for (int d = 0; d < 12; ++d) spec12.groups[static_cast<std::size_t>(d)] = d / 4;
  const auto twelve = make_districts(spec12);
  const ExperimentReport wide = cross_validate(twelve, cv);
  REQUIRE(wide.rows.size() == 12);
  std::vector<std::string> ids;
  for (const auto& row : wide.rows) ids.push_back(row.district);
  std::sort(ids.begin(), ids.end());
  CHECK(std::adjacent_find(ids.begin(), ids.end()) == ids.end());

  CHECK_THROWS_AS(
      (void)cross_validate(std::span<const DistrictDataset>(districts.data(), 2),
                           cv),
      ConfigError);
}

TEST_CASE("cross validation is seed reproducible bit for bit") {
  SynthSpec spec;
  spec.days = 21;
  const auto districts = make_districts(spec);
  CrossValConfig cv;
  cv.folds = 4;
  cv.model.d_model = 4;
  cv.train.epochs = 2;
  cv.train.seed = 17;
  const ExperimentReport a = cross_validate(districts, cv);
  const ExperimentReport b = cross_validate(districts, cv);
  REQUIRE(a.fold_loss_curves.size() == b.fold_loss_curves.size());
  for (std::size_t f = 0; f < a.fold_loss_curves.size(); ++f) {
    REQUIRE(a.fold_loss_curves[f].size() == b.fold_loss_curves[f].size());
    CHECK(std::memcmp(a.fold_loss_curves[f].data(), b.fold_loss_curves[f].data(),
                      a.fold_loss_curves[f].size() * sizeof(double)) == 0);
  }
  for (std::size_t r = 0; r < a.rows.size(); ++r) {
    CHECK(a.rows[r].ratio_mse == b.rows[r].ratio_mse);
    CHECK(a.rows[r].load_mse == b.rows[r].load_mse);
  }
}

TEST_CASE("the trend never leaks from the test fold") {
  SynthSpec spec;
  spec.days = 21;
  auto districts = make_districts(spec);
  CrossValConfig cv;
  cv.folds = 4;
  cv.train.mode = AblationMode::kDtOnly;
  const ExperimentReport before = cross_validate(districts, cv);

  // rescale the fluctuations of the last-sorted district (test fold 3)
  DistrictDataset& last = districts[3];
  for (std::size_t r = 0; r < last.rows(); ++r) {
    double& ratio = last.features[r * kNumFeatures + kColRatio];
    ratio = 1.0 + 2.0 * (ratio - 1.0);
  }
  const ExperimentReport after = cross_validate(districts, cv);

  // fold 3 trains on D00..D02 only, so its trend ignores the perturbation
  CHECK(std::memcmp(before.fold_trends[3].profile.data(),
                    after.fold_trends[3].profile.data(),
                    168 * sizeof(double)) == 0);
  // sanity: folds that do train on D03 see a different trend
  bool changed = false;
  for (int s = 0; s < 168; ++s) {
    if (before.fold_trends[0].profile[static_cast<std::size_t>(s)] !=
        after.fold_trends[0].profile[static_cast<std::size_t>(s)]) {
      changed = true;
    }
  }
  CHECK(changed);
  // and the perturbed district's own evaluation changed
  CHECK(after.rows[3].ratio_mse != before.rows[3].ratio_mse);
}
