#include "loadcast/num/optim.hpp"

#include <cmath>

#include "loadcast/error.hpp"

namespace loadcast::num {

AdamOptimizer::AdamOptimizer(std::span<Parameter> params,
                             const AdamConfig& cfg)
    : params_(params), cfg_(cfg) {
  m_.reserve(params.size());
  v_.reserve(params.size());
  for (const Parameter& p : params_) {
    m_.emplace_back(p.tensor.size(), 0.0);
    v_.emplace_back(p.tensor.size(), 0.0);
  }
}

void AdamOptimizer::step(const std::vector<bool>* trainable_mask) {
  if (trainable_mask && trainable_mask->size() != params_.size()) {
    throw ShapeError("adam: mask length does not match parameter count");
  }
  ++step_count_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, step_count_);
  const double bc2 = 1.0 - std::pow(cfg_.beta2, step_count_);
  for (std::size_t p = 0; p < params_.size(); ++p) {
    if (trainable_mask && !(*trainable_mask)[p]) continue;
    auto values = params_[p].tensor.value_mut();
    auto grads = params_[p].tensor.grad();
    auto& m = m_[p];
    auto& v = v_[p];
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double g = grads[i];
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g;
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g * g;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      values[i] -= cfg_.learning_rate * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }
}

void AdamOptimizer::zero_grad() {
  for (Parameter& p : params_) p.tensor.zero_grad();
}

}  // namespace loadcast::num
