#pragma once

#include <string>
#include <utility>
#include <vector>

#include "stylepad/optim.hpp"
#include "stylepad/tensor.hpp"

namespace stylepad {

// Binary tensor container, also used for dataset storage.
// Layout: magic "DI2S" | u32 version | u32 count | per tensor:
//   u32 name_len | name bytes | u8 dtype (0 = float64) | u32 rank |
//   u64 extents[rank] | little-endian float64 values.
inline constexpr uint32_t kCheckpointVersion = 1;

struct NamedTensor {
    std::string name;
    Shape shape;
    std::vector<double> data;
};

void save_named_tensors(const std::string& path, const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> load_named_tensors(const std::string& path);

void save_checkpoint(const std::string& path, const ParameterSet& params);
// Overwrites values of an already-constructed ParameterSet; names and shapes
// must match exactly.
void load_checkpoint(const std::string& path, ParameterSet& params);

}  // namespace stylepad
