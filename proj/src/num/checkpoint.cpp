#include "loadcast/num/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

#include "loadcast/error.hpp"

namespace loadcast::num {

namespace {

constexpr char kMagic[8] = {'L', 'C', 'P', 'A', 'R', 'A', 'M', '1'};

template <typename T>
void write_pod(std::ofstream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw IoError("checkpoint: truncated file");
  return value;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path,
                     std::span<const Parameter> params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("checkpoint: cannot open " + path.string());
  out.write(kMagic, sizeof(kMagic));
  write_pod<std::uint64_t>(out, params.size());
  for (const Parameter& p : params) {
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(p.name.size()));
    out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    write_pod<std::uint64_t>(out, p.tensor.rows());
    write_pod<std::uint64_t>(out, p.tensor.cols());
    auto values = p.tensor.value();
    out.write(reinterpret_cast<const char*>(values.data()),
              static_cast<std::streamsize>(values.size() * sizeof(double)));
  }
  if (!out) throw IoError("checkpoint: write failed for " + path.string());
}

std::vector<Parameter> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("checkpoint: cannot open " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw ParseError("checkpoint: bad magic in " + path.string());
  }
  const auto count = read_pod<std::uint64_t>(in);
  std::vector<Parameter> params;
  params.reserve(count);
  for (std::uint64_t r = 0; r < count; ++r) {
    const auto name_len = read_pod<std::uint32_t>(in);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    const auto rows = read_pod<std::uint64_t>(in);
    const auto cols = read_pod<std::uint64_t>(in);
    std::vector<double> values(rows * cols);
    in.read(reinterpret_cast<char*>(values.data()),
            static_cast<std::streamsize>(values.size() * sizeof(double)));
    if (!in) throw IoError("checkpoint: truncated record in " + path.string());
    params.push_back(
        {std::move(name),
         Tensor({rows, cols}, std::move(values), /*requires_grad=*/false)});
  }
  return params;
}

}  // namespace loadcast::num
