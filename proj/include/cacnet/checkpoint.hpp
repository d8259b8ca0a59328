#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "cacnet/model.hpp"
#include "cacnet/training.hpp"

// Checkpoint file: one compact JSON header line (format_version, model
// config, provenance, per-group byte offsets), '\n', then the parameter
// tensors as contiguous little-endian float32 blocks in param-group order.
// Round trips are bit-exact.

namespace cacnet {

struct CheckpointProvenance {
    std::uint64_t seed = 0;
    std::size_t epochs_completed = 0;
    double final_lr = 0.0;
    std::string config_digest;
};

json model_config_to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const json& doc);

// FNV-1a 64 over the canonical JSON of both configs, as 16 hex digits.
std::string config_digest(const ModelConfig& mcfg, const TrainConfig& tcfg);

void save_checkpoint(ModelF& model, const CheckpointProvenance& prov, const std::filesystem::path& path);

struct LoadedCheckpoint {
    ModelF model;
    CheckpointProvenance provenance;
};

// Verifies every declared shape/offset against the config before copying
// weights; mismatches and short files throw IoError naming the group.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace cacnet
