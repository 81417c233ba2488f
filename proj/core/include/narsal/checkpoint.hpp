#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include <json.hpp>

#include "narsal/tensor.hpp"

namespace narsal {

/// Flat container of named tensors plus free-form JSON metadata. On disk:
/// 8-byte magic, u32 format version, u64 header length, JSON header (metadata
/// and tensor manifest), then the tensor payload as little-endian f64.
struct Checkpoint {
    static constexpr std::uint32_t kFormatVersion = 1;

    nlohmann::json meta;
    std::map<std::string, Tensor> tensors;
    std::uint64_t seed = 0;
    std::int64_t step = 0;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

} // namespace narsal
