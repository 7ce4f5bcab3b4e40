#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "loadcast/dataset.hpp"
#include "loadcast/decomposition.hpp"
#include "loadcast/model.hpp"

namespace loadcast {

// One moving-window sample: four days of features in, the next day out.
struct Sample {
  std::vector<double> input;  // [96 x 9] row-major
  std::array<double, 24> target_delta{};
  std::array<double, 24> target_ratio{};
  std::array<double, 24> prev_day_load{};
  int day_index = 0;    // target day within the dataset
  int target_slot0 = 0; // hour-of-week slot of the target day's hour 0
};

enum class AblationMode { kFull, kDtOnly, kTransformerOnly };

std::string to_string(AblationMode mode);
AblationMode parse_ablation_mode(const std::string& text);

struct TrainConfig {
  std::size_t batch_size = 512;
  int epochs = 200;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  AblationMode mode = AblationMode::kFull;
};

RatioSeries ratio_series_of(const DistrictDataset& ds);

// Training target per ablation mode: the residual against the trend for the
// full model, the raw ratio (trend treated as zero) for transformer_only.
FluctuationSeries fluctuation_for_mode(const DistrictDataset& ds,
                                       const WeeklyTrend& trend,
                                       AblationMode mode);

// Dataset rows restricted to ratio-days [day_lo, day_hi).
DistrictDataset slice_days(const DistrictDataset& ds, int day_lo, int day_hi);

// Input window = days d-4..d-1, output = day d, stride one day.
// Yields dataset.days() - 4 samples; requires at least 5 ratio-days.
std::vector<Sample> make_windows(const DistrictDataset& ds,
                                 const FluctuationSeries& fluctuation);

double mse(std::span<const double> pred, std::span<const double> actual);

struct TrainResult {
  std::vector<double> loss_curve;  // one value per epoch
  double seconds = 0.0;
};

// Minimizes MSE between predicted and target fluctuation over shuffled
// mini-batches with Adam. Parameters masked out as non-trainable receive no
// updates at all. Deterministic given the config seed.
TrainResult train_model(model::Transformer& model,
                        std::span<const Sample> samples,
                        const TrainConfig& cfg,
                        const std::vector<bool>* trainable_mask = nullptr);

// Mean squared prediction error against target_delta; equal to the
// ratio-scale MSE of the recomposed ratio since the trend term cancels.
double delta_mse(const model::Transformer& model,
                 std::span<const Sample> samples,
                 std::size_t batch_size = 512);

struct EvalResult {
  double ratio_mse = 0.0;
  double load_mse = 0.0;  // on loads standardized by load_scale
};

// Recombines predictions into ratios per mode, restores loads against the
// previous day, and reports both MSE scales. `model` may be null for
// kDtOnly. `load_scale` must be the training-split load standard deviation.
EvalResult evaluate(const model::Transformer* model,
                    std::span<const Sample> samples, const WeeklyTrend& trend,
                    AblationMode mode, double load_scale,
                    std::size_t batch_size = 512);

struct DistrictMetric {
  std::string district;
  std::string mode;
  double ratio_mse = 0.0;
  double load_mse = 0.0;
  int epochs = 0;
  double seconds = 0.0;  // reported in the run manifest, not in metric files
};

struct ExperimentReport {
  std::vector<DistrictMetric> rows;
  std::vector<std::vector<double>> fold_loss_curves;
  std::vector<WeeklyTrend> fold_trends;  // extracted from training folds only
  std::vector<double> fold_seconds;
  double total_seconds = 0.0;

  DistrictMetric average() const;
};

struct CrossValConfig {
  int folds = 4;
  TrainConfig train;
  model::Config model;
  int trend_filter_width = 5;
  // train-time weather forecast simulation; 0.05 matches the standard setup
  double train_noise = 0.05;
  std::uint64_t noise_seed = 99;
};

// Deterministic fold assignment over districts sorted by id; the trend and
// the load standardization are computed from the training folds only.
ExperimentReport cross_validate(std::span<const DistrictDataset> districts,
                                const CrossValConfig& cfg);

// Pooled standard deviation of the districts' loads.
double pooled_load_std(std::span<const DistrictDataset* const> districts);

}  // namespace loadcast
