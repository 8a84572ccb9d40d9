#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "see/model.hpp"

namespace see {

inline constexpr int kContainerFormatVersion = 1;

// File layout:
//   "SEEW\n"
//   <manifest byte length, decimal>\n
//   <manifest: JSON text>
//   <blob: little-endian tensors in manifest order>
//
// The blob holds the backbone section (per layer: weights, bias, and in int8 mode a 5-byte
// qparams record of u32 multiplier + u8 shift) followed by the float32 head section.

struct ContainerLayout {
  nlohmann::json manifest;
  std::size_t backbone_bytes = 0;
  std::size_t head_bytes = 0;
  std::size_t blob_offset = 0;
};

std::vector<std::uint8_t> serialize_model(const Model& model);
/// Throws LoadError on any structural inconsistency, naming the layer or tensor involved.
Model deserialize_model(std::span<const std::uint8_t> bytes);
/// Parses and cross-checks the header and manifest without decoding tensors.
ContainerLayout read_layout(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

void save_model(const std::filesystem::path& path, const Model& model);
Model load_model(const std::filesystem::path& path);

}  // namespace see
