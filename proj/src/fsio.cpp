#include "cacnet/fsio.hpp"

#include <fstream>
#include <system_error>

namespace cacnet {

namespace fs = std::filesystem;

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
    if (!fs::is_directory(dir)) throw IoError(dir.string() + " exists and is not a directory");
}

std::string read_file_bytes(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw IoError("read failed for " + path.string());
    return bytes;
}

void atomic_write_file(const fs::path& path, const std::string& bytes) {
    if (path.has_parent_path()) ensure_dir(path.parent_path());
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        out.flush();
        if (!out) throw IoError("write failed for " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp);
        throw IoError("cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
    }
}

json read_json_file(const fs::path& path) {
    const std::string bytes = read_file_bytes(path);
    try {
        return json::parse(bytes);
    } catch (const json::parse_error& e) {
        throw ManifestError("invalid JSON in " + path.string() + ": " + e.what());
    }
}

void write_json_file(const fs::path& path, const json& doc) {
    atomic_write_file(path, doc.dump(2) + "\n");
}

}  // namespace cacnet
