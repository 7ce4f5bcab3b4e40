#include "loadcast/robustness.hpp"

#include <cmath>

#include "loadcast/error.hpp"
#include "loadcast/rng.hpp"

namespace loadcast {

DistrictDataset perturb_weather(const DistrictDataset& ds,
                                const NoiseSpec& spec) {
  if (spec.proportion < 0.0) {
    throw DomainError("perturb_weather: proportion must be >= 0");
  }
  DistrictDataset out = ds;
  Rng rng(spec.seed);
  for (std::size_t r = 0; r < out.rows(); ++r) {
    double* row = out.features.data() + r * kNumFeatures;
    for (int c = kColTemperature; c <= kColPrecipitation; ++c) {
      row[c] = apply_noise(row[c], rng.normal(), spec.proportion);
    }
  }
  return out;
}

std::vector<NoiseSweepRow> noise_sweep(const model::Transformer& model,
                                       const WeeklyTrend& trend,
                                       const DistrictDataset& test_district,
                                       AblationMode mode, double load_scale,
                                       std::span<const double> proportions,
                                       std::span<const std::uint64_t> seeds) {
  if (seeds.empty()) throw ConfigError("noise_sweep: need at least one seed");
  std::vector<NoiseSweepRow> rows;
  rows.reserve(proportions.size());
  for (double proportion : proportions) {
    NoiseSweepRow row;
    row.proportion = proportion;
    if (proportion == 0.0) {
      // zero noise is the identity, so every seed would produce the same
      // value; evaluate once and report it exactly
      const auto fluct = fluctuation_for_mode(test_district, trend, mode);
      const auto samples = make_windows(test_district, fluct);
      row.mean_mse =
          evaluate(&model, samples, trend, mode, load_scale).load_mse;
      row.stddev_mse = 0.0;
    } else {
      std::vector<double> mses;
      mses.reserve(seeds.size());
      for (std::uint64_t seed : seeds) {
        const DistrictDataset noisy =
            perturb_weather(test_district, {proportion, seed});
        const auto fluct = fluctuation_for_mode(noisy, trend, mode);
        const auto samples = make_windows(noisy, fluct);
        mses.push_back(
            evaluate(&model, samples, trend, mode, load_scale).load_mse);
      }
      double mean = 0.0;
      for (double v : mses) mean += v;
      mean /= static_cast<double>(mses.size());
      double var = 0.0;
      for (double v : mses) var += (v - mean) * (v - mean);
      var /= static_cast<double>(mses.size());
      row.mean_mse = mean;
      row.stddev_mse = std::sqrt(var);
    }
    rows.push_back(row);
  }
  return rows;
}

}  // namespace loadcast
