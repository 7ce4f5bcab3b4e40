#include "loadcast/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "loadcast/error.hpp"
#include "loadcast/num/optim.hpp"
#include "loadcast/rng.hpp"
#include "loadcast/robustness.hpp"

namespace loadcast {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_seconds(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

num::Tensor batch_input(std::span<const Sample> samples,
                        std::span<const std::size_t> indices) {
  const std::size_t rows_per_sample = samples[indices[0]].input.size() /
                                      static_cast<std::size_t>(kNumFeatures);
  num::Tensor input = num::Tensor::zeros(
      {indices.size() * rows_per_sample, static_cast<std::size_t>(kNumFeatures)});
  auto data = input.value_mut();
  std::size_t offset = 0;
  for (std::size_t idx : indices) {
    const auto& in = samples[idx].input;
    std::copy(in.begin(), in.end(), data.begin() + static_cast<long>(offset));
    offset += in.size();
  }
  return input;
}

num::Tensor batch_targets(std::span<const Sample> samples,
                          std::span<const std::size_t> indices) {
  num::Tensor target = num::Tensor::zeros({indices.size(), 24});
  auto data = target.value_mut();
  for (std::size_t b = 0; b < indices.size(); ++b) {
    const auto& t = samples[indices[b]].target_delta;
    std::copy(t.begin(), t.end(), data.begin() + static_cast<long>(b * 24));
  }
  return target;
}

std::vector<std::size_t> iota_indices(std::size_t n) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return idx;
}

}  // namespace

std::string to_string(AblationMode mode) {
  switch (mode) {
    case AblationMode::kFull: return "full";
    case AblationMode::kDtOnly: return "dt_only";
    case AblationMode::kTransformerOnly: return "transformer_only";
  }
  return "full";
}

AblationMode parse_ablation_mode(const std::string& text) {
  if (text == "full") return AblationMode::kFull;
  if (text == "dt_only") return AblationMode::kDtOnly;
  if (text == "transformer_only") return AblationMode::kTransformerOnly;
  throw ConfigError("unknown ablation mode '" + text + "'");
}

RatioSeries ratio_series_of(const DistrictDataset& ds) {
  RatioSeries ratios;
  ratios.start_slot = ds.start_slot;
  ratios.values.resize(ds.rows());
  for (std::size_t r = 0; r < ds.rows(); ++r) {
    ratios.values[r] = ds.feature(r, kColRatio);
  }
  return ratios;
}

FluctuationSeries fluctuation_for_mode(const DistrictDataset& ds,
                                       const WeeklyTrend& trend,
                                       AblationMode mode) {
  const RatioSeries ratios = ratio_series_of(ds);
  if (mode == AblationMode::kTransformerOnly) {
    return FluctuationSeries{ratios.values, ratios.start_slot};
  }
  return decompose(ratios, trend);
}

DistrictDataset slice_days(const DistrictDataset& ds, int day_lo, int day_hi) {
  if (day_lo < 0 || day_hi > static_cast<int>(ds.days()) || day_lo >= day_hi) {
    throw ConfigError("slice_days: invalid day range [" +
                      std::to_string(day_lo) + ", " + std::to_string(day_hi) +
                      ") for " + std::to_string(ds.days()) + " days");
  }
  DistrictDataset out;
  out.district_id = ds.district_id;
  out.start_hour = ds.start_hour + static_cast<HourStamp>(day_lo) * 24;
  out.start_slot = (ds.start_slot + day_lo * 24) % kSlotsPerWeek;
  const std::size_t row_lo = static_cast<std::size_t>(day_lo) * 24;
  const std::size_t row_hi = static_cast<std::size_t>(day_hi) * 24;
  out.features.assign(ds.features.begin() + static_cast<long>(row_lo * kNumFeatures),
                      ds.features.begin() + static_cast<long>(row_hi * kNumFeatures));
  out.load.assign(ds.load.begin() + static_cast<long>(row_lo),
                  ds.load.begin() + static_cast<long>(row_hi));
  return out;
}

std::vector<Sample> make_windows(const DistrictDataset& ds,
                                 const FluctuationSeries& fluctuation) {
  const int days = static_cast<int>(ds.days());
  if (days < 5) {
    throw DataError("make_windows: need at least 5 ratio-days, got " +
                    std::to_string(days));
  }
  if (fluctuation.values.size() != ds.rows() ||
      fluctuation.start_slot != ds.start_slot) {
    throw ShapeError("make_windows: fluctuation is not aligned with dataset");
  }
  std::vector<Sample> samples;
  samples.reserve(static_cast<std::size_t>(days - 4));
  for (int d = 4; d < days; ++d) {
    Sample s;
    const std::size_t in_lo = static_cast<std::size_t>(d - 4) * 24;
    s.input.assign(
        ds.features.begin() + static_cast<long>(in_lo * kNumFeatures),
        ds.features.begin() + static_cast<long>((in_lo + 96) * kNumFeatures));
    const std::size_t tgt = static_cast<std::size_t>(d) * 24;
    for (std::size_t h = 0; h < 24; ++h) {
      s.target_delta[h] = fluctuation.values[tgt + h];
      s.target_ratio[h] = ds.feature(tgt + h, kColRatio);
      s.prev_day_load[h] = ds.load[tgt - 24 + h];
    }
    s.day_index = d;
    s.target_slot0 = (ds.start_slot + d * 24) % kSlotsPerWeek;
    samples.push_back(std::move(s));
  }
  return samples;
}

double mse(std::span<const double> pred, std::span<const double> actual) {
  if (pred.size() != actual.size() || pred.empty()) {
    throw ShapeError("mse: lengths must match and be nonzero");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - actual[i];
    acc += d * d;
  }
  return acc / static_cast<double>(pred.size());
}

TrainResult train_model(model::Transformer& model,
                        std::span<const Sample> samples,
                        const TrainConfig& cfg,
                        const std::vector<bool>* trainable_mask) {
  if (samples.empty()) throw DataError("train_model: no samples");
  if (cfg.batch_size == 0) throw ConfigError("train_model: batch_size >= 1");
  if (cfg.learning_rate <= 0.0) {
    throw ConfigError("train_model: learning_rate must be > 0");
  }
  const auto start = Clock::now();
  num::AdamOptimizer opt(model.parameters(),
                         {cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.adam_eps});
  TrainResult result;
  result.loss_curve.reserve(static_cast<std::size_t>(cfg.epochs));
  auto indices = iota_indices(samples.size());
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng shuffle_rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(epoch)));
    shuffle_rng.shuffle(std::span<std::size_t>(indices));
    double sq_sum = 0.0;
    std::size_t count = 0;
    for (std::size_t first = 0; first < indices.size();
         first += cfg.batch_size) {
      const std::size_t n =
          std::min(cfg.batch_size, indices.size() - first);
      const std::span<const std::size_t> batch(indices.data() + first, n);
      num::Tape tape;
      const num::Tensor input = batch_input(samples, batch);
      const num::Tensor target = batch_targets(samples, batch);
      const num::Tensor pred = model.forward(tape, input, n);
      const num::Tensor loss = tape.mse(pred, target);
      const double batch_loss = loss.item();
      if (!std::isfinite(batch_loss)) {
        throw TrainingError("train_model: loss diverged at epoch " +
                                std::to_string(epoch),
                            epoch);
      }
      opt.zero_grad();
      tape.backward(loss);
      opt.step(trainable_mask);
      sq_sum += batch_loss * static_cast<double>(n);
      count += n;
    }
    result.loss_curve.push_back(sq_sum / static_cast<double>(count));
  }
  result.seconds = elapsed_seconds(start);
  return result;
}

double delta_mse(const model::Transformer& model,
                 std::span<const Sample> samples, std::size_t batch_size) {
  if (samples.empty()) throw DataError("delta_mse: no samples");
  double acc = 0.0;
  auto indices = iota_indices(samples.size());
  for (std::size_t first = 0; first < samples.size(); first += batch_size) {
    const std::size_t n = std::min(batch_size, samples.size() - first);
    const std::span<const std::size_t> chunk(indices.data() + first, n);
    num::Tape tape;
    tape.set_grad_enabled(false);
    const num::Tensor pred =
        model.forward(tape, batch_input(samples, chunk), n);
    for (std::size_t b = 0; b < n; ++b) {
      const auto& target = samples[first + b].target_delta;
      for (std::size_t h = 0; h < 24; ++h) {
        const double d = pred(b, h) - target[h];
        acc += d * d;
      }
    }
  }
  return acc / static_cast<double>(samples.size() * 24);
}

EvalResult evaluate(const model::Transformer* model,
                    std::span<const Sample> samples, const WeeklyTrend& trend,
                    AblationMode mode, double load_scale,
                    std::size_t batch_size) {
  if (samples.empty()) throw DataError("evaluate: no samples");
  if (mode != AblationMode::kDtOnly && model == nullptr) {
    throw ConfigError("evaluate: mode requires a model");
  }
  if (!(load_scale > 0.0)) {
    throw DomainError("evaluate: load_scale must be positive");
  }
  double ratio_acc = 0.0;
  double load_acc = 0.0;
  auto indices = iota_indices(samples.size());
  for (std::size_t first = 0; first < samples.size(); first += batch_size) {
    const std::size_t n = std::min(batch_size, samples.size() - first);
    num::Tensor pred;
    if (mode != AblationMode::kDtOnly) {
      const std::span<const std::size_t> chunk(indices.data() + first, n);
      num::Tape tape;
      tape.set_grad_enabled(false);
      pred = model->forward(tape, batch_input(samples, chunk), n);
    }
    for (std::size_t b = 0; b < n; ++b) {
      const Sample& s = samples[first + b];
      std::array<double, 24> ratio_hat{};
      for (std::size_t h = 0; h < 24; ++h) {
        const int slot = (s.target_slot0 + static_cast<int>(h)) % kSlotsPerWeek;
        switch (mode) {
          case AblationMode::kFull:
            ratio_hat[h] = pred(b, h) + trend.at_slot(slot);
            break;
          case AblationMode::kDtOnly:
            ratio_hat[h] = trend.at_slot(slot);
            break;
          case AblationMode::kTransformerOnly:
            ratio_hat[h] = pred(b, h);
            break;
        }
      }
      const auto load_hat = recompose_load(ratio_hat, s.prev_day_load);
      const auto load_actual = recompose_load(s.target_ratio, s.prev_day_load);
      for (std::size_t h = 0; h < 24; ++h) {
        const double dr = ratio_hat[h] - s.target_ratio[h];
        ratio_acc += dr * dr;
        const double dl = (load_hat[h] - load_actual[h]) / load_scale;
        load_acc += dl * dl;
      }
    }
  }
  const double denom = static_cast<double>(samples.size() * 24);
  return {ratio_acc / denom, load_acc / denom};
}

DistrictMetric ExperimentReport::average() const {
  DistrictMetric avg;
  avg.district = "AVG";
  if (rows.empty()) return avg;
  avg.mode = rows.front().mode;
  avg.epochs = rows.front().epochs;
  for (const DistrictMetric& row : rows) {
    avg.ratio_mse += row.ratio_mse;
    avg.load_mse += row.load_mse;
    avg.seconds += row.seconds;
  }
  const double n = static_cast<double>(rows.size());
  avg.ratio_mse /= n;
  avg.load_mse /= n;
  return avg;
}

double pooled_load_std(std::span<const DistrictDataset* const> districts) {
  double sum = 0.0;
  std::size_t count = 0;
  for (const DistrictDataset* ds : districts) {
    for (double v : ds->load) sum += v;
    count += ds->load.size();
  }
  if (count == 0) throw DataError("pooled_load_std: no load data");
  const double mean = sum / static_cast<double>(count);
  double var = 0.0;
  for (const DistrictDataset* ds : districts) {
    for (double v : ds->load) var += (v - mean) * (v - mean);
  }
  var /= static_cast<double>(count);
  if (!(var > 0.0)) throw DataError("pooled_load_std: degenerate load data");
  return std::sqrt(var);
}

ExperimentReport cross_validate(std::span<const DistrictDataset> districts,
                                const CrossValConfig& cfg) {
  if (cfg.folds < 1) throw ConfigError("cross_validate: folds must be >= 1");
  if (districts.size() < static_cast<std::size_t>(cfg.folds)) {
    throw ConfigError("cross_validate: need at least " +
                      std::to_string(cfg.folds) + " districts, got " +
                      std::to_string(districts.size()));
  }
  std::vector<const DistrictDataset*> sorted;
  sorted.reserve(districts.size());
  for (const DistrictDataset& ds : districts) sorted.push_back(&ds);
  std::sort(sorted.begin(), sorted.end(),
            [](const DistrictDataset* a, const DistrictDataset* b) {
              return a->district_id < b->district_id;
            });

  const std::size_t base = sorted.size() / static_cast<std::size_t>(cfg.folds);
  ExperimentReport report;
  const auto run_start = Clock::now();
  for (int fold = 0; fold < cfg.folds; ++fold) {
    const auto fold_start = Clock::now();
    const std::size_t lo = static_cast<std::size_t>(fold) * base;
    const std::size_t hi = (fold + 1 == cfg.folds)
                               ? sorted.size()
                               : lo + base;  // last fold takes the remainder
    std::vector<const DistrictDataset*> train_set;
    std::vector<const DistrictDataset*> test_set;
    for (std::size_t i = 0; i < sorted.size(); ++i) {
      (i >= lo && i < hi ? test_set : train_set).push_back(sorted[i]);
    }

    // trend and load statistics from the training districts only
    std::vector<RatioSeries> train_ratios;
    train_ratios.reserve(train_set.size());
    for (const DistrictDataset* ds : train_set) {
      train_ratios.push_back(ratio_series_of(*ds));
    }
    const WeeklyTrend trend =
        extract_weekly_trend(train_ratios, cfg.trend_filter_width);
    const double load_scale = pooled_load_std(train_set);

    std::vector<Sample> train_samples;
    if (cfg.train.mode != AblationMode::kDtOnly) {
      for (std::size_t i = 0; i < train_set.size(); ++i) {
        DistrictDataset perturbed = *train_set[i];
        if (cfg.train_noise > 0.0) {
          perturbed = perturb_weather(
              *train_set[i],
              {cfg.train_noise,
               mix_seed(cfg.noise_seed,
                        static_cast<std::uint64_t>(fold) * 1000 + i)});
        }
        const auto fluct =
            fluctuation_for_mode(perturbed, trend, cfg.train.mode);
        auto windows = make_windows(perturbed, fluct);
        train_samples.insert(train_samples.end(),
                             std::make_move_iterator(windows.begin()),
                             std::make_move_iterator(windows.end()));
      }
    }

    model::Transformer* trained = nullptr;
    model::Transformer model_storage(cfg.model, /*seed=*/0);
    TrainResult train_result;
    if (cfg.train.mode != AblationMode::kDtOnly) {
      model_storage = model::Transformer(
          cfg.model, mix_seed(cfg.train.seed, static_cast<std::uint64_t>(fold)));
      TrainConfig fold_cfg = cfg.train;
      fold_cfg.seed = mix_seed(cfg.train.seed,
                               0x0f0f + static_cast<std::uint64_t>(fold));
      train_result = train_model(model_storage, train_samples, fold_cfg);
      trained = &model_storage;
    }

    for (const DistrictDataset* ds : test_set) {
      const auto fluct = fluctuation_for_mode(*ds, trend, cfg.train.mode);
      const auto samples = make_windows(*ds, fluct);
      const EvalResult eval = evaluate(trained, samples, trend, cfg.train.mode,
                                       load_scale);
      DistrictMetric row;
      row.district = ds->district_id;
      row.mode = to_string(cfg.train.mode);
      row.ratio_mse = eval.ratio_mse;
      row.load_mse = eval.load_mse;
      row.epochs = cfg.train.mode == AblationMode::kDtOnly ? 0 : cfg.train.epochs;
      row.seconds = train_result.seconds;
      report.rows.push_back(row);
    }
    report.fold_loss_curves.push_back(train_result.loss_curve);
    report.fold_trends.push_back(trend);
    report.fold_seconds.push_back(elapsed_seconds(fold_start));
  }
  report.total_seconds = elapsed_seconds(run_start);
  return report;
}

}  // namespace loadcast
