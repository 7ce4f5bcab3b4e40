#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "loadcast/num/parameter.hpp"

namespace loadcast::num {

// Flat binary checkpoint: a magic header followed by
// (name, shape, row-major float64 values) records. Round trips are bit-exact.
void save_checkpoint(const std::filesystem::path& path,
                     std::span<const Parameter> params);

std::vector<Parameter> load_checkpoint(const std::filesystem::path& path);

}  // namespace loadcast::num
