#include "loadcast/num/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace loadcast::num {

GradCheckResult finite_diff_check(const std::function<double()>& f,
                                  std::span<Parameter> params, double step) {
  if (step <= 0.0) throw DomainError("finite_diff_check: step must be > 0");
  GradCheckResult result;
  for (Parameter& p : params) {
    auto values = p.tensor.value_mut();
    auto grads = p.tensor.grad();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + step;
      const double f_plus = f();
      values[i] = saved - step;
      const double f_minus = f();
      values[i] = saved;
      const double fd = (f_plus - f_minus) / (2.0 * step);
      const double ad = grads[i];
      const double denom = std::max({std::abs(fd), std::abs(ad), 1e-8});
      const double rel = std::abs(fd - ad) / denom;
      if (rel > result.max_rel_error) {
        result.max_rel_error = rel;
        result.worst_param = p.name;
        result.worst_index = i;
      }
    }
  }
  return result;
}

}  // namespace loadcast::num
