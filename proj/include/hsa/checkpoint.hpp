#pragma once

// Tensor container file:
//   magic "HSAT" | u32 version (=1) | u64 entry count
//   per entry: u32 name length | name bytes | u32 rank | u64 dims[rank] | f64 payload
// All integers and floats little-endian.

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "hsa/params.hpp"
#include "hsa/tensor.hpp"

namespace hsa {

inline constexpr char kCheckpointMagic[4] = {'H', 'S', 'A', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

std::string encode_checkpoint(const NamedTensors& tensors);
NamedTensors decode_checkpoint(const std::string& bytes);

void save_checkpoint(const std::filesystem::path& path, const NamedTensors& tensors);
NamedTensors load_checkpoint(const std::filesystem::path& path);

/// Copy values into the store's tensors by name; every store entry must be present with the same shape.
void load_into(ParameterStore& store, const NamedTensors& tensors);

}  // namespace hsa
