// Copyright (C) 2026 The hicast Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include <nlohmann/json.hpp>

#include "hicast/tensor.hpp"

// On-disk layout: <dir>/manifest.json plus one "<param name>.hcwt" file per
// tensor. A weight file is the magic "HCWT", u32 rank, u32 dims[rank], then
// little-endian float32 data.

namespace hicast {

inline constexpr const char* kCheckpointSchema = "hicast-ckpt/1";

struct CheckpointInfo {
    std::string module;
    nlohmann::json config = nlohmann::json::object();
    std::uint64_t seed = 0;
    long step = 0;
    /// Free-form module-specific fields (latent scale, level channels, ...).
    nlohmann::json extra = nlohmann::json::object();
};

void write_weight_file(const std::filesystem::path& path, const Tensor& t);
Tensor read_weight_file(const std::filesystem::path& path);

void save_checkpoint(const std::filesystem::path& dir, const CheckpointInfo& info,
                     const std::map<std::string, Tensor>& tensors);

struct LoadedCheckpoint {
    CheckpointInfo info;
    std::map<std::string, Tensor> tensors;
};

/// Throws StateError if the directory or manifest is missing, FormatError on bad contents.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& dir);
bool checkpoint_exists(const std::filesystem::path& dir);

}  // namespace hicast
