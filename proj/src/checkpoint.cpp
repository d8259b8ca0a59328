#include "cacnet/checkpoint.hpp"

#include <bit>
#include <cstdio>
#include <cstring>

#include "cacnet/fsio.hpp"

static_assert(std::endian::native == std::endian::little, "checkpoint format assumes a little-endian host");
static_assert(sizeof(float) == 4, "checkpoint format stores 32-bit floats");

namespace cacnet {

namespace fs = std::filesystem;

json model_config_to_json(const ModelConfig& cfg) {
    json doc;
    doc["in_channels"] = cfg.in_channels;
    doc["input_h"] = cfg.input_h;
    doc["input_w"] = cfg.input_w;
    doc["conv_filters"] = cfg.conv_filters;
    doc["dense_units"] = cfg.dense_units;
    doc["num_classes"] = cfg.num_classes;
    doc["dropout_rate"] = cfg.dropout_rate;
    return doc;
}

ModelConfig model_config_from_json(const json& doc) {
    ModelConfig cfg;
    try {
        cfg.in_channels = doc.value("in_channels", cfg.in_channels);
        cfg.input_h = doc.value("input_h", cfg.input_h);
        cfg.input_w = doc.value("input_w", cfg.input_w);
        if (doc.contains("conv_filters")) cfg.conv_filters = doc["conv_filters"].get<std::vector<std::size_t>>();
        cfg.dense_units = doc.value("dense_units", cfg.dense_units);
        cfg.num_classes = doc.value("num_classes", cfg.num_classes);
        cfg.dropout_rate = doc.value("dropout_rate", cfg.dropout_rate);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("invalid model config: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

std::string config_digest(const ModelConfig& mcfg, const TrainConfig& tcfg) {
    const std::string canonical = model_config_to_json(mcfg).dump() + "|" + train_config_to_json(tcfg).dump();
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (unsigned char ch : canonical) {
        hash ^= ch;
        hash *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash));
    return buf;
}

void save_checkpoint(ModelF& model, const CheckpointProvenance& prov, const fs::path& path) {
    json params = json::array();
    std::size_t offset = 0;
    auto groups = model.param_groups();
    for (const auto& g : groups) {
        params.push_back({{"name", g.name},
                          {"shape", g.value->shape()},
                          {"offset", offset},
                          {"count", g.value->size()}});
        offset += g.value->size() * sizeof(float);
    }
    json header;
    header["format_version"] = 1;
    header["config"] = model_config_to_json(model.config());
    header["provenance"] = {{"seed", prov.seed},
                            {"epochs_completed", prov.epochs_completed},
                            {"final_lr", prov.final_lr},
                            {"config_digest", prov.config_digest}};
    header["params"] = std::move(params);
    header["data_bytes"] = offset;

    std::string bytes = header.dump();
    bytes += '\n';
    const std::size_t data_start = bytes.size();
    bytes.resize(data_start + offset);
    std::size_t cursor = data_start;
    for (const auto& g : groups) {
        const std::size_t n = g.value->size() * sizeof(float);
        std::memcpy(bytes.data() + cursor, g.value->data(), n);
        cursor += n;
    }
    atomic_write_file(path, bytes);
}

LoadedCheckpoint load_checkpoint(const fs::path& path) {
    const std::string bytes = read_file_bytes(path);
    const std::size_t nl = bytes.find('\n');
    if (nl == std::string::npos) throw IoError("checkpoint " + path.string() + " has no header line");
    json header;
    try {
        header = json::parse(bytes.substr(0, nl));
    } catch (const json::parse_error& e) {
        throw IoError("checkpoint " + path.string() + " header is not valid JSON: " + e.what());
    }
    CheckpointProvenance prov;
    ModelConfig cfg;
    json params;
    std::size_t data_bytes = 0;
    try {
        if (header.at("format_version").get<int>() != 1) {
            throw IoError("checkpoint " + path.string() + " has unsupported format_version");
        }
        cfg = model_config_from_json(header.at("config"));
        const auto& p = header.at("provenance");
        prov.seed = p.at("seed").get<std::uint64_t>();
        prov.epochs_completed = p.at("epochs_completed").get<std::size_t>();
        prov.final_lr = p.at("final_lr").get<double>();
        prov.config_digest = p.at("config_digest").get<std::string>();
        params = header.at("params");
        data_bytes = header.at("data_bytes").get<std::size_t>();
    } catch (const json::exception& e) {
        throw IoError("checkpoint " + path.string() + " header malformed: " + e.what());
    }
    const std::size_t data_start = nl + 1;
    if (bytes.size() - data_start != data_bytes) {
        throw IoError("checkpoint " + path.string() + " data region: expected " + std::to_string(data_bytes) +
                      " bytes, got " + std::to_string(bytes.size() - data_start));
    }

    LoadedCheckpoint out{ModelF(cfg, prov.seed), prov};
    auto groups = out.model.param_groups();
    if (params.size() != groups.size()) {
        throw IoError("checkpoint " + path.string() + " declares " + std::to_string(params.size()) +
                      " parameter groups, model has " + std::to_string(groups.size()));
    }
    for (std::size_t i = 0; i < groups.size(); ++i) {
        const auto& decl = params.at(i);
        std::string name;
        std::vector<std::size_t> shape;
        std::size_t offset = 0, count = 0;
        try {
            name = decl.at("name").get<std::string>();
            shape = decl.at("shape").get<std::vector<std::size_t>>();
            offset = decl.at("offset").get<std::size_t>();
            count = decl.at("count").get<std::size_t>();
        } catch (const json::exception& e) {
            throw IoError("checkpoint " + path.string() + " param entry " + std::to_string(i) + ": " + e.what());
        }
        if (name != groups[i].name) {
            throw IoError("checkpoint " + path.string() + ": expected group '" + groups[i].name + "', found '" +
                          name + "'");
        }
        if (shape != groups[i].value->shape() || count != groups[i].value->size()) {
            throw IoError("checkpoint " + path.string() + ": shape mismatch in '" + name + "'");
        }
        if (offset + count * sizeof(float) > data_bytes) {
            throw IoError("checkpoint " + path.string() + ": data range of '" + name + "' exceeds file");
        }
        std::memcpy(groups[i].value->data(), bytes.data() + data_start + offset, count * sizeof(float));
    }
    return out;
}

}  // namespace cacnet
