#pragma once

#include "fbmch/config.hpp"
#include "fbmch/verify.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace fbmch {

inline constexpr const char* kToolVersion = "1.0.0";

struct RunOptions {
    std::string out_dir = "runs";
    std::size_t workers = 1;
    std::optional<std::size_t> samples;  // noise-sample count; other commands take it from the config
    std::string command_line;
};

struct EmittedFile {
    std::string name;
    std::string checksum;  // FNV-1a 64 in hex
};

struct RunResult {
    int exit_code = 0;
    std::string run_dir;
    std::vector<ScanReport> reports;
    std::vector<EmittedFile> files;
};

const std::vector<std::string>& command_names();
std::string usage_text();

// Sets every ensemble and sample count in the config.
void apply_sample_override(RunConfig& config, std::size_t samples);

// Runs one command; artifacts go to <out_dir>/<config hash>-<seed>/<command>/.
// Exit code 0 iff every asserted check passes, 1 otherwise, 2 for an unknown command.
RunResult dispatch(const std::string& command, const RunConfig& config, const RunOptions& options, std::ostream& log);

}  // namespace fbmch
