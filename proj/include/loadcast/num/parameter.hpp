#pragma once

#include <string>
#include <vector>

#include "loadcast/num/tensor.hpp"

namespace loadcast::num {

// Named trainable tensor. The name doubles as the checkpoint record key and
// encodes the layer group as a dotted prefix (e.g. "encoder0.attn.h0.wq").
struct Parameter {
  std::string name;
  Tensor tensor;
};

}  // namespace loadcast::num
