#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <zlib.h>
#include <json.hpp>

#include "ellcharge/errors.hpp"

namespace ellcharge::io {

namespace fs = std::filesystem;

inline std::string read_text(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    if (!in) throw IntegrityError("cannot read '" + p.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Writes through a temporary file and renames, so readers never see partial files.
inline void write_text(const fs::path& p, const std::string& text)
{
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    const fs::path tmp = p.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IntegrityError("cannot write '" + tmp.string() + "'");
        out << text;
        if (!out) throw IntegrityError("short write to '" + tmp.string() + "'");
    }
    fs::rename(tmp, p);
}

inline nlohmann::json read_json(const fs::path& p)
{
    try {
        return nlohmann::json::parse(read_text(p));
    } catch (const nlohmann::json::parse_error& e) {
        throw IntegrityError("malformed JSON in '" + p.string() + "': " + e.what());
    }
}

inline void write_json(const fs::path& p, const nlohmann::json& j) { write_text(p, j.dump(2) + "\n"); }

inline void write_gzip(const fs::path& p, const std::string& text)
{
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    const fs::path tmp = p.string() + ".tmp";
    gzFile f = gzopen(tmp.c_str(), "wb6");
    if (!f) throw IntegrityError("cannot write '" + tmp.string() + "'");
    std::size_t off = 0;
    while (off < text.size()) {
        const auto chunk = static_cast<unsigned>(std::min<std::size_t>(text.size() - off, 1u << 20));
        if (gzwrite(f, text.data() + off, chunk) != static_cast<int>(chunk)) {
            gzclose(f);
            throw IntegrityError("gzip write failed for '" + p.string() + "'");
        }
        off += chunk;
    }
    if (gzclose(f) != Z_OK) throw IntegrityError("gzip close failed for '" + p.string() + "'");
    fs::rename(tmp, p);
}

inline std::string read_gzip(const fs::path& p)
{
    gzFile f = gzopen(p.c_str(), "rb");
    if (!f) throw IntegrityError("cannot read '" + p.string() + "'");
    std::string out;
    char buf[1 << 16];
    int n = 0;
    while ((n = gzread(f, buf, sizeof buf)) > 0) out.append(buf, static_cast<std::size_t>(n));
    const bool bad = n < 0;
    gzclose(f);
    if (bad) throw IntegrityError("corrupted gzip stream in '" + p.string() + "'");
    return out;
}

}  // namespace ellcharge::io
