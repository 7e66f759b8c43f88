#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "mfdet/detector.hpp"

namespace mfdet {

/// Binary layout (all integers little-endian):
///   "MFDK1"
///   u32 entry count
///   per entry: u16 name length, name bytes, u8 rank, u32 dims[rank], f32 data
///   u32 metadata length, metadata bytes ("key=value\n" lines)
struct Checkpoint {
  LayerStack model;
  std::map<std::string, std::string> metadata;  // training metadata beyond the model config
};

inline constexpr char kCheckpointMagic[] = "MFDK1";

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& checkpoint);
/// Throws FormatError for bad magic, truncation, shape/config disagreement
/// or duplicate/missing tensors; never returns a partial model.
Checkpoint deserialize_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// ModelConfig as key=value pairs ("model.*" keys) and back.
std::map<std::string, std::string> config_to_metadata(const ModelConfig& config);
ModelConfig config_from_metadata(const std::map<std::string, std::string>& metadata);

}  // namespace mfdet
