#pragma once

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace polbc {

// 9 significant digits, '.' decimal separator, locale independent.
inline std::string format_num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return std::string(buf);
}

inline double parse_num(const std::string& s) {
    try {
        std::size_t pos = 0;
        double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument("trailing garbage");
        return v;
    } catch (const std::exception&) {
        throw std::runtime_error("failed to parse number: '" + s + "'");
    }
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

// Write via temp file + rename so interrupted runs never leave partial output.
inline void atomic_write(const std::filesystem::path& path, const std::string& content) {
    namespace fs = std::filesystem;
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw std::runtime_error("cannot open for writing: " + tmp.string());
        f << content;
        if (!f) throw std::runtime_error("write failed: " + tmp.string());
    }
    fs::rename(tmp, path);
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open: " + path.string());
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

// FNV-1a, used as a content hash for model identities and manifests.
inline std::uint64_t fnv1a_hash(const std::string& data) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

inline std::string hash_hex(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

} // namespace polbc
