#pragma once

#include <functional>
#include <span>
#include <string>

#include "loadcast/num/parameter.hpp"

namespace loadcast::num {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
};

// Central-difference gradient oracle. `f` recomputes the scalar objective
// from the parameters' current values; each parameter's grad buffer must
// already hold the reverse-mode gradient of that same objective. Every
// element is perturbed by +/-step and the relative disagreement
// |fd - ad| / max(|fd|, |ad|, 1e-8) is returned at its maximum.
GradCheckResult finite_diff_check(const std::function<double()>& f,
                                  std::span<Parameter> params, double step);

}  // namespace loadcast::num
