#pragma once

#include "fbmch/model.hpp"
#include "fbmch/verify.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace fbmch {

struct RunConfig {
    ModelConfig model;
    VerifySettings verify;

    bool operator==(const RunConfig& other) const;
};

struct ConfigKey {
    std::string name;
    std::string doc;
};

// Every accepted key with a one-line description.
const std::vector<ConfigKey>& config_keys();

// "key = value" lines; '#' starts a comment; lists are comma separated.
// Unknown keys, malformed values, duplicates, and model constraint violations
// are all reported together in one ConfigError.
RunConfig parse_config_text(const std::string& text, const std::string& origin = "<config>");
RunConfig parse_config_file(const std::string& path);

// Every key with its current value; parse_config_text reproduces the same config.
std::string effective_config(const RunConfig& config);

// 64-bit FNV-1a.
std::uint64_t fnv1a64(const std::string& bytes);
std::string hex64(std::uint64_t v);
std::uint64_t config_hash(const RunConfig& config);

}  // namespace fbmch
