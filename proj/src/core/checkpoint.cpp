// Copyright (C) 2026 The hicast Authors
// SPDX-License-Identifier: Apache-2.0

#include "hicast/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "hicast/errors.hpp"

namespace hicast {

namespace fs = std::filesystem;

namespace {

static_assert(std::endian::native == std::endian::little, "weight files assume a little-endian host");

void put_u32(std::ofstream& out, std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); }

std::uint32_t get_u32(std::ifstream& in, const fs::path& path) {
    std::uint32_t v = 0;
    if (!in.read(reinterpret_cast<char*>(&v), 4)) throw FormatError("truncated weight file " + path.string());
    return v;
}

// Parameter names use '.' and '/' separators; '/' cannot appear in a file name.
std::string file_name_for(const std::string& name) {
    std::string s = name;
    for (char& c : s)
        if (c == '/') c = '@';
    return s + ".hcwt";
}

}  // namespace

void write_weight_file(const fs::path& path, const Tensor& t) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out.write("HCWT", 4);
    put_u32(out, static_cast<std::uint32_t>(t.rank()));
    for (int d : t.shape()) put_u32(out, static_cast<std::uint32_t>(d));
    std::vector<float> data(t.numel());
    for (std::size_t i = 0; i < t.numel(); ++i) data[i] = static_cast<float>(t[i]);
    out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size() * sizeof(float)));
    if (!out) throw IoError("failed writing " + path.string());
}

Tensor read_weight_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, "HCWT", 4) != 0) throw FormatError("bad magic in " + path.string());
    const std::uint32_t rank = get_u32(in, path);
    if (rank > 8) throw FormatError("implausible rank in " + path.string());
    Shape shape(rank);
    for (auto& d : shape) d = static_cast<int>(get_u32(in, path));
    std::vector<float> data(shape_numel(shape));
    if (!in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size() * sizeof(float))))
        throw FormatError("truncated weight data in " + path.string());
    return Tensor(shape, std::vector<double>(data.begin(), data.end()));
}

void save_checkpoint(const fs::path& dir, const CheckpointInfo& info, const std::map<std::string, Tensor>& tensors) {
    fs::create_directories(dir);
    nlohmann::json manifest;
    manifest["schema_version"] = kCheckpointSchema;
    manifest["module"] = info.module;
    manifest["config"] = info.config;
    manifest["seed"] = info.seed;
    manifest["step"] = info.step;
    manifest["extra"] = info.extra;
    nlohmann::json params = nlohmann::json::array();
    for (const auto& [name, t] : tensors) {
        const std::string file = file_name_for(name);
        write_weight_file(dir / file, t);
        params.push_back({{"name", name}, {"file", file}, {"shape", t.shape()}});
    }
    manifest["parameters"] = params;
    std::ofstream out(dir / "manifest.json");
    if (!out) throw IoError("cannot write manifest in " + dir.string());
    out << manifest.dump(2) << "\n";
}

bool checkpoint_exists(const fs::path& dir) { return fs::is_regular_file(dir / "manifest.json"); }

LoadedCheckpoint load_checkpoint(const fs::path& dir) {
    if (!checkpoint_exists(dir)) throw StateError("no checkpoint at " + dir.string());
    std::ifstream in(dir / "manifest.json");
    nlohmann::json manifest;
    try {
        in >> manifest;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("bad manifest in " + dir.string() + ": " + e.what());
    }
    if (manifest.value("schema_version", "") != kCheckpointSchema)
        throw FormatError("unsupported checkpoint schema in " + dir.string());
    LoadedCheckpoint ck;
    ck.info.module = manifest.value("module", "");
    ck.info.config = manifest.value("config", nlohmann::json::object());
    ck.info.seed = manifest.value("seed", std::uint64_t{0});
    ck.info.step = manifest.value("step", 0L);
    ck.info.extra = manifest.value("extra", nlohmann::json::object());
    for (const auto& p : manifest.at("parameters")) {
        ck.tensors.emplace(p.at("name").get<std::string>(), read_weight_file(dir / p.at("file").get<std::string>()));
    }
    return ck;
}

}  // namespace hicast
