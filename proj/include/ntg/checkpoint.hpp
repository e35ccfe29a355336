#pragma once

#include <filesystem>
#include <string>

#include "ntg/model.hpp"

namespace ntg {

/// Checkpoint container: "NTGW", u32 version, u32 config length + JSON
/// config, u32 tensor count, then per tensor: u32 name length + name, u32
/// rank, u32 dims, float32 little-endian values in row-major order.
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::string checkpoint_bytes(const ModelParams &p);
ModelParams checkpoint_from_bytes(const std::string &bytes);

void save_checkpoint(const ModelParams &p, const std::filesystem::path &path);
ModelParams load_checkpoint(const std::filesystem::path &path);

/// Rounds every parameter to float32, the precision checkpoints store.
void quantize_to_f32(ModelParams &p);

}  // namespace ntg
