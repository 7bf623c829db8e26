#pragma once

// Self-describing checkpoint container:
//   8-byte magic "CSNKCKPT", u32 format version, u64 header length,
//   JSON header (config, config hash, tensor table, metadata), raw blobs.
// All integers little-endian; blobs are contiguous CPU tensor bytes.

#include <torch/torch.h>

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>

#include "json.hpp"

namespace circlesnake::checkpoint {

inline constexpr std::uint32_t kFormatVersion = 1;

struct Checkpoint {
  nlohmann::json config = nlohmann::json::object();
  std::string config_hash;
  nlohmann::json meta = nlohmann::json::object();
  std::map<std::string, torch::Tensor> tensors;
  std::string optimizer_state;  // opaque serialized optimizer, may be empty
};

/// Writes to a sibling temporary file and renames it into place.
void save(const Checkpoint& ckpt, const std::filesystem::path& path);

/// Throws Error(checkpoint) on a bad magic, unknown version, truncated data
/// or malformed header.
Checkpoint load(const std::filesystem::path& path);

/// Parameters and buffers keyed by their dotted module path.
std::map<std::string, torch::Tensor> state_of(const torch::nn::Module& module);

/// Copies tensors into the module; every parameter and buffer must be present
/// with a matching shape.
void restore(torch::nn::Module& module, const std::map<std::string, torch::Tensor>& tensors);

/// 64-bit FNV-1a as 16 lowercase hex digits.
std::string fnv1a_hex(std::string_view bytes);

}  // namespace circlesnake::checkpoint
