#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "loadcast/dataset.hpp"
#include "loadcast/decomposition.hpp"
#include "loadcast/train.hpp"

namespace loadcast {

// Multiplicative Gaussian forecast error: w' = w * (1 + n * proportion).
struct NoiseSpec {
  double proportion = 0.05;
  std::uint64_t seed = 0;
};

inline double apply_noise(double value, double draw, double proportion) {
  return value * (1.0 + draw * proportion);
}

// Perturbs the four weather columns only; ratio, flags, and loads are
// bit-identical to the input. Draws are seeded and row-major over the
// weather columns.
DistrictDataset perturb_weather(const DistrictDataset& ds,
                                const NoiseSpec& spec);

struct NoiseSweepRow {
  double proportion = 0.0;
  double mean_mse = 0.0;
  double stddev_mse = 0.0;
};

// Evaluates the model on the test district with each noise proportion applied
// to test-set weather, averaging the standardized load MSE over seeds.
std::vector<NoiseSweepRow> noise_sweep(const model::Transformer& model,
                                       const WeeklyTrend& trend,
                                       const DistrictDataset& test_district,
                                       AblationMode mode, double load_scale,
                                       std::span<const double> proportions,
                                       std::span<const std::uint64_t> seeds);

}  // namespace loadcast
