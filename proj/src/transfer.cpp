#include "loadcast/transfer.hpp"

#include <algorithm>
#include <cmath>

#include "loadcast/error.hpp"
#include "loadcast/rng.hpp"
#include "loadcast/robustness.hpp"

namespace loadcast {

namespace {

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc;
}

// daily 24-vectors of the ratio column
std::vector<std::vector<double>> daily_ratio_vectors(
    const DistrictDataset& ds) {
  std::vector<std::vector<double>> days;
  days.reserve(ds.days());
  for (std::size_t d = 0; d < ds.days(); ++d) {
    std::vector<double> day(24);
    for (std::size_t h = 0; h < 24; ++h) {
      day[h] = ds.feature(d * 24 + h, kColRatio);
    }
    days.push_back(std::move(day));
  }
  return days;
}

int epochs_to_threshold(std::span<const double> curve, double threshold) {
  for (std::size_t i = 0; i < curve.size(); ++i) {
    if (curve[i] <= threshold) return static_cast<int>(i) + 1;
  }
  return static_cast<int>(curve.size()) + 1;  // never reached
}

}  // namespace

std::string to_string(FreezeStrategy strategy) {
  switch (strategy) {
    case FreezeStrategy::kAllTrainable: return "all";
    case FreezeStrategy::kHeadOnly: return "head";
    case FreezeStrategy::kBodyOnly: return "body";
  }
  return "all";
}

FreezeStrategy parse_freeze_strategy(const std::string& text) {
  if (text == "all") return FreezeStrategy::kAllTrainable;
  if (text == "head") return FreezeStrategy::kHeadOnly;
  if (text == "body") return FreezeStrategy::kBodyOnly;
  throw ConfigError("unknown freeze strategy '" + text + "'");
}

std::vector<bool> freeze_mask(const model::Transformer& model,
                              FreezeStrategy strategy) {
  std::vector<bool> mask;
  mask.reserve(model.parameters().size());
  for (const num::Parameter& p : model.parameters()) {
    const model::ParamGroup group = model::param_group(p.name);
    bool trainable = true;
    switch (strategy) {
      case FreezeStrategy::kAllTrainable:
        trainable = true;
        break;
      case FreezeStrategy::kHeadOnly:
        trainable = group == model::ParamGroup::kHead;
        break;
      case FreezeStrategy::kBodyOnly:
        trainable = group != model::ParamGroup::kHead;
        break;
    }
    mask.push_back(trainable);
  }
  return mask;
}

double mmd(std::span<const std::vector<double>> x,
           std::span<const std::vector<double>> y,
           std::optional<double> bandwidth) {
  if (x.empty() || y.empty()) throw DataError("mmd: both sets must be nonempty");
  const std::size_t dim = x.front().size();
  for (const auto& v : x) {
    if (v.size() != dim) throw ShapeError("mmd: inconsistent vector length");
  }
  for (const auto& v : y) {
    if (v.size() != dim) throw ShapeError("mmd: inconsistent vector length");
  }
  // canonical argument order makes the summation order, and therefore the
  // result, exactly symmetric in x and y
  const bool swap_args =
      std::lexicographical_compare(y.begin(), y.end(), x.begin(), x.end());
  if (swap_args) std::swap(x, y);

  double sigma = 0.0;
  if (bandwidth) {
    if (*bandwidth <= 0.0) throw DomainError("mmd: bandwidth must be > 0");
    sigma = *bandwidth;
  } else {
    // median pairwise distance over the pooled sample
    std::vector<std::span<const double>> pooled;
    pooled.reserve(x.size() + y.size());
    for (const auto& v : x) pooled.emplace_back(v);
    for (const auto& v : y) pooled.emplace_back(v);
    std::vector<double> distances;
    distances.reserve(pooled.size() * (pooled.size() - 1) / 2);
    for (std::size_t i = 0; i < pooled.size(); ++i) {
      for (std::size_t j = i + 1; j < pooled.size(); ++j) {
        distances.push_back(std::sqrt(squared_distance(pooled[i], pooled[j])));
      }
    }
    if (distances.empty()) {
      throw BandwidthError(
          "mmd: single pooled sample; provide an explicit bandwidth");
    }
    const std::size_t mid = distances.size() / 2;
    std::nth_element(distances.begin(), distances.begin() + mid,
                     distances.end());
    double median = distances[mid];
    if (distances.size() % 2 == 0) {
      const double lower =
          *std::max_element(distances.begin(), distances.begin() + mid);
      median = 0.5 * (lower + median);
    }
    if (median <= 0.0) {
      throw BandwidthError(
          "mmd: median pairwise distance is zero; provide an explicit "
          "bandwidth");
    }
    sigma = median;
  }

  const double gamma = 1.0 / (2.0 * sigma * sigma);
  auto kernel_mean = [gamma](std::span<const std::vector<double>> a,
                             std::span<const std::vector<double>> b) {
    double acc = 0.0;
    for (const auto& va : a) {
      for (const auto& vb : b) {
        acc += std::exp(-gamma * squared_distance(va, vb));
      }
    }
    return acc / (static_cast<double>(a.size()) * static_cast<double>(b.size()));
  };
  const double value =
      kernel_mean(x, x) + kernel_mean(y, y) - 2.0 * kernel_mean(x, y);
  return std::max(value, 0.0);
}

double mmd_scalars(std::span<const double> x, std::span<const double> y,
                   std::optional<double> bandwidth) {
  std::vector<std::vector<double>> vx, vy;
  vx.reserve(x.size());
  vy.reserve(y.size());
  for (double v : x) vx.push_back({v});
  for (double v : y) vy.push_back({v});
  return mmd(vx, vy, bandwidth);
}

std::vector<std::pair<std::string, double>> rank_sources(
    const DistrictDataset& target,
    std::span<const DistrictDataset> candidates) {
  if (candidates.empty()) throw DataError("rank_sources: no candidates");
  const auto target_days = daily_ratio_vectors(target);
  std::vector<std::pair<std::string, double>> ranking;
  ranking.reserve(candidates.size());
  for (const DistrictDataset& candidate : candidates) {
    const auto candidate_days = daily_ratio_vectors(candidate);
    ranking.emplace_back(candidate.district_id,
                         mmd(target_days, candidate_days));
  }
  std::sort(ranking.begin(), ranking.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second < b.second;
    return a.first < b.first;
  });
  return ranking;
}

FineTuneResult fine_tune(const model::Transformer& source,
                         std::span<const Sample> target_samples,
                         FreezeStrategy strategy, const TrainConfig& cfg) {
  if (target_samples.empty()) throw DataError("fine_tune: no samples");
  FineTuneResult result{source.clone(), {}, 0.0};
  result.initial_loss = delta_mse(result.model, target_samples);
  const std::vector<bool> mask = freeze_mask(result.model, strategy);
  if (cfg.epochs > 0) {
    TrainResult train_result =
        train_model(result.model, target_samples, cfg, &mask);
    result.loss_curve = std::move(train_result.loss_curve);
  }
  return result;
}

TransferReport transfer_experiment(const TransferPlan& plan,
                                   std::span<const std::uint64_t> seeds,
                                   const DistrictDataset& source,
                                   const DistrictDataset& target) {
  if (seeds.empty()) throw ConfigError("transfer_experiment: no seeds");
  if (static_cast<int>(source.days()) < plan.source_days) {
    throw ConfigError("transfer_experiment: source district has " +
                      std::to_string(source.days()) + " days, needs " +
                      std::to_string(plan.source_days));
  }
  const int target_days_total = static_cast<int>(target.days());
  const int max_budget =
      *std::max_element(plan.target_train_days.begin(),
                        plan.target_train_days.end());
  if (max_budget + plan.target_test_days > target_days_total) {
    throw ConfigError("transfer_experiment: target district has " +
                      std::to_string(target_days_total) +
                      " days; budgets need " +
                      std::to_string(max_budget + plan.target_test_days));
  }

  // source trend applies to the target data directly
  const DistrictDataset source_slice =
      slice_days(source, 0, plan.source_days);
  const WeeklyTrend trend = extract_weekly_trend(
      ratio_series_of(source_slice), plan.trend_filter_width);
  const auto source_fluct =
      decompose(ratio_series_of(source_slice), trend);
  const auto source_samples = make_windows(source_slice, source_fluct);

  const auto target_fluct = decompose(ratio_series_of(target), trend);
  const auto all_target_samples = make_windows(target, target_fluct);
  auto samples_for_days = [&](int day_lo, int day_hi) {
    std::vector<Sample> subset;
    for (const Sample& s : all_target_samples) {
      if (s.day_index >= day_lo && s.day_index < day_hi) subset.push_back(s);
    }
    return subset;
  };
  const auto test_samples = samples_for_days(
      target_days_total - plan.target_test_days, target_days_total);

  // test windows per noise level (noise perturbs test weather only)
  std::vector<std::vector<Sample>> noisy_test;
  for (std::size_t n = 0; n < plan.noise_levels.size(); ++n) {
    if (plan.noise_levels[n] == 0.0) {
      noisy_test.push_back(test_samples);
    } else {
      const DistrictDataset noisy = perturb_weather(
          target, {plan.noise_levels[n], mix_seed(0x5eed, n)});
      const auto fluct = decompose(ratio_series_of(noisy), trend);
      const auto samples = make_windows(noisy, fluct);
      std::vector<Sample> subset;
      for (const Sample& s : samples) {
        if (s.day_index >= target_days_total - plan.target_test_days) {
          subset.push_back(s);
        }
      }
      noisy_test.push_back(std::move(subset));
    }
  }

  TransferReport report;
  for (std::uint64_t seed : seeds) {
    // pretrain the source model for this repetition
    model::Transformer pretrained(plan.model, mix_seed(seed, 0x50));
    TrainConfig source_cfg = plan.train;
    source_cfg.seed = mix_seed(seed, 0x51);
    train_model(pretrained, source_samples, source_cfg);

    for (int budget : plan.target_train_days) {
      const auto train_samples = samples_for_days(0, budget);
      if (train_samples.empty()) {
        throw ConfigError("transfer_experiment: budget " +
                          std::to_string(budget) + " yields no samples");
      }

      // no-transfer control: random init, everything trainable
      model::Transformer cold(plan.model, mix_seed(seed, 0xc01d));
      const double cold_initial = delta_mse(cold, test_samples);
      TrainConfig cold_cfg = plan.train;
      cold_cfg.seed = mix_seed(seed, 0xc02d + static_cast<std::uint64_t>(budget));
      const TrainResult cold_result =
          train_model(cold, train_samples, cold_cfg);
      const double threshold =
          plan.threshold_factor * cold_result.loss_curve.back();

      for (std::size_t n = 0; n < plan.noise_levels.size(); ++n) {
        TransferRow row;
        row.strategy = "none";
        row.target_days = budget;
        row.noise_pct = plan.noise_levels[n];
        row.seed = seed;
        row.initial_mse = cold_initial;
        row.final_mse = delta_mse(cold, noisy_test[n]);
        row.epochs_to_threshold =
            epochs_to_threshold(cold_result.loss_curve, threshold);
        report.rows.push_back(row);
      }

      for (FreezeStrategy strategy : plan.strategies) {
        TrainConfig warm_cfg = plan.train;
        warm_cfg.seed =
            mix_seed(seed, 0xaa00 + static_cast<std::uint64_t>(budget));
        const double warm_initial = delta_mse(pretrained, test_samples);
        FineTuneResult tuned =
            fine_tune(pretrained, train_samples, strategy, warm_cfg);
        for (std::size_t n = 0; n < plan.noise_levels.size(); ++n) {
          TransferRow row;
          row.strategy = to_string(strategy);
          row.target_days = budget;
          row.noise_pct = plan.noise_levels[n];
          row.seed = seed;
          row.initial_mse = warm_initial;
          row.final_mse = delta_mse(tuned.model, noisy_test[n]);
          row.epochs_to_threshold =
              epochs_to_threshold(tuned.loss_curve, threshold);
          report.rows.push_back(row);
        }
      }
    }
  }
  return report;
}

}  // namespace loadcast
