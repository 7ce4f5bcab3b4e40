#include "loadcast/report.hpp"

#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "loadcast/error.hpp"

namespace loadcast {

namespace {

std::string fmt(double value) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  return out;
}

}  // namespace

void write_metrics_csv(const std::filesystem::path& path,
                       const ExperimentReport& report) {
  auto out = open_out(path);
  out << "district,mode,ratio_mse,load_mse,epochs\n";
  auto line = [&out](const DistrictMetric& m) {
    out << m.district << ',' << m.mode << ',' << fmt(m.ratio_mse) << ','
        << fmt(m.load_mse) << ',' << m.epochs << '\n';
  };
  for (const DistrictMetric& m : report.rows) line(m);
  line(report.average());
  if (!out) throw IoError("write failed for " + path.string());
}

void write_summary_json(const std::filesystem::path& path,
                        const ExperimentReport& report) {
  nlohmann::json j;
  j["rows"] = nlohmann::json::array();
  for (const DistrictMetric& m : report.rows) {
    j["rows"].push_back({{"district", m.district},
                         {"mode", m.mode},
                         {"ratio_mse", m.ratio_mse},
                         {"load_mse", m.load_mse},
                         {"epochs", m.epochs}});
  }
  const DistrictMetric avg = report.average();
  j["avg"] = {{"ratio_mse", avg.ratio_mse},
              {"load_mse", avg.load_mse},
              {"mode", avg.mode}};
  auto out = open_out(path);
  out << j.dump(2) << '\n';
}

void write_loss_curve(const std::filesystem::path& path,
                      std::span<const double> curve) {
  auto out = open_out(path);
  out << "epoch,loss\n";
  for (std::size_t e = 0; e < curve.size(); ++e) {
    out << e << ',' << fmt(curve[e]) << '\n';
  }
}

void write_noise_sweep(const std::filesystem::path& path,
                       std::span<const NoiseSweepRow> rows) {
  auto out = open_out(path);
  out << "proportion,mean_mse,stddev_mse\n";
  for (const NoiseSweepRow& row : rows) {
    out << fmt(row.proportion) << ',' << fmt(row.mean_mse) << ','
        << fmt(row.stddev_mse) << '\n';
  }
}

void write_transfer_report(const std::filesystem::path& path,
                           const TransferReport& report) {
  auto out = open_out(path);
  out << "strategy,target_days,noise_pct,seed,initial_mse,final_mse,"
         "epochs_to_threshold\n";
  for (const TransferRow& row : report.rows) {
    out << row.strategy << ',' << row.target_days << ',' << fmt(row.noise_pct)
        << ',' << row.seed << ',' << fmt(row.initial_mse) << ','
        << fmt(row.final_mse) << ',' << row.epochs_to_threshold << '\n';
  }
}

}  // namespace loadcast
