#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "polbc/io.hpp"

namespace polbc {

constexpr const char* kVersion = "0.1.0";

// Everything needed to rerun a command bit-for-bit: the argument vector, the
// seed, and content hashes of every input file consumed.
struct RunManifest {
    std::string command;
    std::vector<std::string> argv;
    std::uint64_t seed = 0;
    std::map<std::string, std::string> inputs; // path -> content hash
    std::string version = kVersion;

    std::string to_json() const {
        nlohmann::ordered_json j;
        j["type"] = "run_manifest";
        j["version"] = version;
        j["command"] = command;
        j["argv"] = argv;
        j["seed"] = seed;
        j["inputs"] = inputs;
        return j.dump(2);
    }

    static RunManifest from_json(const std::string& text) {
        auto j = nlohmann::json::parse(text);
        if (j.at("type") != "run_manifest")
            throw std::runtime_error("RunManifest: wrong document type");
        RunManifest m;
        m.version = j.at("version").get<std::string>();
        m.command = j.at("command").get<std::string>();
        m.argv = j.at("argv").get<std::vector<std::string>>();
        m.seed = j.at("seed").get<std::uint64_t>();
        m.inputs = j.at("inputs").get<std::map<std::string, std::string>>();
        return m;
    }

    void add_input(const std::filesystem::path& path) {
        inputs[path.string()] = hash_hex(fnv1a_hash(read_file(path)));
    }

    // Raise if any recorded input changed since the manifest was written.
    void verify_inputs() const {
        for (const auto& [path, expected] : inputs) {
            std::string actual = hash_hex(fnv1a_hash(read_file(path)));
            if (actual != expected)
                throw std::runtime_error("manifest input changed on disk: " + path);
        }
    }

    void save(const std::filesystem::path& path) const { atomic_write(path, to_json()); }
    static RunManifest load(const std::filesystem::path& path) {
        return from_json(read_file(path));
    }
};

} // namespace polbc
