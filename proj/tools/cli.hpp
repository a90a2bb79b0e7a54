// Copyright (C) 2026 The hicast Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "hicast/config.hpp"
#include "hicast/trainer.hpp"

namespace hicast::cli {

inline constexpr const char* kRunSchema = "hicast-run/1";
inline constexpr const char* kCorpusSchema = "hicast-corpus/1";

enum ExitCode { ok = 0, failure = 1, usage = 2, missing_dependency = 3, numeric = 4 };

/// Layout of a training run directory.
struct RunDir {
    std::filesystem::path root;

    std::filesystem::path codec() const { return root / "codec"; }
    std::filesystem::path features() const { return root / "features"; }
    std::filesystem::path image() const { return root / "image"; }
    std::filesystem::path adapter(ControlKind k) const { return root / ("adapter-" + to_string(k)); }
    std::filesystem::path temporal() const { return root / "temporal"; }
    std::filesystem::path config() const { return root / "config.json"; }

    /// The config recorded by the last train command, or defaults.
    PipelineConfig load_config() const;
    /// Throws StateError naming the first missing stage-0 artifact.
    FrozenModels load_frozen() const;
    ImageModel load_image() const;
};

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace hicast::cli
