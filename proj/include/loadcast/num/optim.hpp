#pragma once

#include <span>
#include <vector>

#include "loadcast/num/parameter.hpp"

namespace loadcast::num {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam with bias correction. Parameters whose mask entry is false are skipped
// entirely (no value update, no moment update), which keeps frozen parameters
// bit-identical across any number of steps.
class AdamOptimizer {
 public:
  AdamOptimizer(std::span<Parameter> params, const AdamConfig& cfg);

  void step(const std::vector<bool>* trainable_mask = nullptr);
  void zero_grad();

 private:
  std::span<Parameter> params_;
  AdamConfig cfg_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  long step_count_ = 0;
};

}  // namespace loadcast::num
