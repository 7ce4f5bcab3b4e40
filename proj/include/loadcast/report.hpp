#pragma once

#include <filesystem>
#include <span>

#include "loadcast/robustness.hpp"
#include "loadcast/train.hpp"
#include "loadcast/transfer.hpp"

namespace loadcast {

// Metric files never contain wall-clock values; timings go to the run
// manifest so identical seeds produce byte-identical metrics.

// `district,mode,ratio_mse,load_mse,epochs` rows plus an AVG row.
void write_metrics_csv(const std::filesystem::path& path,
                       const ExperimentReport& report);

// Machine-readable counterpart of the metrics file.
void write_summary_json(const std::filesystem::path& path,
                        const ExperimentReport& report);

// `epoch,loss` lines.
void write_loss_curve(const std::filesystem::path& path,
                      std::span<const double> curve);

// `proportion,mean_mse,stddev_mse` lines.
void write_noise_sweep(const std::filesystem::path& path,
                       std::span<const NoiseSweepRow> rows);

// `strategy,target_days,noise_pct,seed,initial_mse,final_mse,epochs_to_threshold`
void write_transfer_report(const std::filesystem::path& path,
                           const TransferReport& report);

}  // namespace loadcast
