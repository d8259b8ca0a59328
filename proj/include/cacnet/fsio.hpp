#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "cacnet/errors.hpp"

// Small file-system layer. All writes are atomic: content goes to a sibling
// temp file which is then renamed over the destination.

namespace cacnet {

using json = nlohmann::ordered_json;

void ensure_dir(const std::filesystem::path& dir);
std::string read_file_bytes(const std::filesystem::path& path);
void atomic_write_file(const std::filesystem::path& path, const std::string& bytes);

json read_json_file(const std::filesystem::path& path);
// Two-space indent, keys in insertion order, trailing newline.
void write_json_file(const std::filesystem::path& path, const json& doc);

}  // namespace cacnet
