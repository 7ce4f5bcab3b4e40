#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "loadcast/dataset.hpp"
#include "loadcast/train.hpp"

namespace loadcast {

// Which parameter groups stay trainable when re-training a source model on
// target data: everything, only the final fully connected head, or everything
// except that head.
enum class FreezeStrategy { kAllTrainable, kHeadOnly, kBodyOnly };

std::string to_string(FreezeStrategy strategy);
FreezeStrategy parse_freeze_strategy(const std::string& text);

// Per-parameter trainability mask aligned with model.parameters().
std::vector<bool> freeze_mask(const model::Transformer& model,
                              FreezeStrategy strategy);

// Squared maximum mean discrepancy, biased V-statistic with Gaussian kernel
// k(a,b) = exp(-|a-b|^2 / (2 sigma^2)). Without an explicit bandwidth, sigma
// is the median pairwise distance over the pooled samples; a zero median
// raises BandwidthError asking for an explicit sigma. Result is clipped at 0.
double mmd(std::span<const std::vector<double>> x,
           std::span<const std::vector<double>> y,
           std::optional<double> bandwidth = std::nullopt);

double mmd_scalars(std::span<const double> x, std::span<const double> y,
                   std::optional<double> bandwidth = std::nullopt);

// Candidates ordered by ascending MMD between daily 24-hour load-ratio
// vectors of target and candidate; ties break on district id.
std::vector<std::pair<std::string, double>> rank_sources(
    const DistrictDataset& target,
    std::span<const DistrictDataset> candidates);

struct FineTuneResult {
  model::Transformer model;
  std::vector<double> loss_curve;
  double initial_loss = 0.0;  // on the given samples, before any update
};

// Re-trains a copy of the source model on target samples under the freezing
// strategy. The caller must have computed the target fluctuation against the
// source district's trend. Frozen parameters come back bit-identical.
FineTuneResult fine_tune(const model::Transformer& source,
                         std::span<const Sample> target_samples,
                         FreezeStrategy strategy, const TrainConfig& cfg);

struct TransferPlan {
  std::string source_district;
  std::string target_district;
  int source_days = 192;
  std::vector<int> target_train_days = {128, 64, 32, 16};
  int target_test_days = 64;
  std::vector<FreezeStrategy> strategies = {FreezeStrategy::kAllTrainable,
                                            FreezeStrategy::kHeadOnly,
                                            FreezeStrategy::kBodyOnly};
  std::vector<double> noise_levels = {0.0};
  model::Config model;
  TrainConfig train;
  int trend_filter_width = 5;
  // a run counts as converged once its training loss falls to within this
  // factor of the no-transfer run's final loss
  double threshold_factor = 1.2;
};

struct TransferRow {
  std::string strategy;  // freezing strategy, or "none" for the cold control
  int target_days = 0;
  double noise_pct = 0.0;
  std::uint64_t seed = 0;
  double initial_mse = 0.0;  // on the target test set, before any update
  double final_mse = 0.0;
  int epochs_to_threshold = 0;
};

struct TransferReport {
  std::vector<TransferRow> rows;
};

// Pretrains on the first source_days of the source district, fine-tunes per
// strategy on each target budget, and always runs a randomly initialized
// no-transfer control on the same data. Budgets and the trailing test window
// are disjoint day ranges of the target district.
TransferReport transfer_experiment(const TransferPlan& plan,
                                   std::span<const std::uint64_t> seeds,
                                   const DistrictDataset& source,
                                   const DistrictDataset& target);

}  // namespace loadcast
