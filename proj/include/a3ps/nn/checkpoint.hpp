#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "a3ps/nn/tape.hpp"

namespace a3ps::nn {

// Flat binary checkpoint, all integers and floats little-endian:
//   magic "NNCK" | u32 version | u64 count
//   count x ( u32 name_len | name bytes | u32 rank | rank x u64 dim | f64 payload )
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  Tensor tensor;
  bool operator==(const NamedTensor&) const = default;
};

std::string encode_checkpoint(const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> decode_checkpoint(std::string_view bytes);

void save_checkpoint(const std::filesystem::path& path, const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> load_checkpoint(const std::filesystem::path& path);

std::vector<NamedTensor> snapshot(std::span<Parameter* const> params);
// Copies values into params by name; every parameter must be present with
// a matching shape.
void restore(std::span<Parameter* const> params, const std::vector<NamedTensor>& tensors);

void save_parameters(const std::filesystem::path& path, std::span<Parameter* const> params);
void load_parameters(const std::filesystem::path& path, std::span<Parameter* const> params);

// FNV-1a over parameter names, shapes and value bytes.
std::uint64_t parameter_checksum(std::span<Parameter* const> params);

}  // namespace a3ps::nn
