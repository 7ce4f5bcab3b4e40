#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "loadcast/dataset.hpp"

namespace loadcast {

// Controls for the synthetic multi-district corpus. Loads carry a planted
// hour-of-week profile times (1 + weather-driven fluctuation + noise), so the
// day-over-day ratio cancels the base level and the trend/fluctuation
// decomposition has a real signal to recover. Districts in the same group
// share the profile shape and correlated weather.
struct SynthSpec {
  std::size_t n_districts = 4;
  int days = 84;
  std::vector<int> groups;  // per district; empty means two districts per group
  double base_load = 1000.0;
  double weekly_amplitude = 0.3;
  // fluctuation sensitivity to standardized temperature/humidity/wind/precip
  std::array<double, 4> weather_coefs = {0.08, 0.04, 0.02, 0.01};
  double fluct_noise = 0.02;
  double group_correlation = 0.9;  // in [0, 1]
  std::uint64_t seed = 1;

  void validate() const;
};

// Planted hour-of-week load profile for a group (strictly positive).
double synth_weekly_profile(int group, int slot, double amplitude);

std::vector<RawSeries> generate(const SynthSpec& spec);

struct CorruptionReport {
  RawSeries series;
  std::vector<std::size_t> gap_starts;
  std::vector<std::size_t> gap_lengths;  // 1..3 hours each
  std::vector<std::size_t> spike_positions;
};

// Plants missing runs and multiplicative 5-10x load spikes at deterministic
// seeded positions, spaced far enough apart that each corruption sits in an
// otherwise clean neighborhood. Ground-truth positions are returned so tests
// can measure detection recall.
CorruptionReport inject_gaps_and_spikes(const RawSeries& raw,
                                        std::size_t n_gaps,
                                        std::size_t n_spikes,
                                        std::uint64_t seed);

}  // namespace loadcast
