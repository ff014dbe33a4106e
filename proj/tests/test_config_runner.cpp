#include "fbmch/config.hpp"
#include "fbmch/error.hpp"
#include "fbmch/runner.hpp"

#include "json.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace fbmch;
namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path fresh_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("fbmch_test_" + name);
    fs::remove_all(p);
    return p;
}

RunConfig tiny_config() {
    return parse_config_text(
        "n_modes = 8\nn_grid = 16\nn_time = 16\n"
        "isometry_samples = 200\ndensity_samples = 300\ndensity_control_samples = 50\nkde_points = 64\n"
        "localization_trajectories = 10\nmalliavin_modes = 4\nmalliavin_trajectories = 4\nfd_pairs = 2\n");
}

std::string error_text(const std::string& text) {
    try {
        parse_config_text(text, "cfg");
    } catch (const ConfigError& e) {
        return e.what();
    }
    return {};
}

}  // namespace

TEST(Config, MinimalFileFillsDefaults) {
    const RunConfig c = parse_config_text("H = 0.6\nsigma = 0.2  # comment\n");
    EXPECT_EQ(c.model.H, 0.6);
    EXPECT_EQ(c.model.sigma, 0.2);
    const RunConfig d;
    EXPECT_EQ(c.model.n_modes, d.model.n_modes);
    EXPECT_EQ(c.model.cutoff_n, d.model.cutoff_n);
    EXPECT_EQ(c.verify.seed, d.verify.seed);
    EXPECT_NE(effective_config(c).find("n_time = 256"), std::string::npos);
}

TEST(Config, BrownianHurstRejectedWithRule) {
    const std::string msg = error_text("H = 0.5\n");
    EXPECT_NE(msg.find("open interval (1/2, 1)"), std::string::npos) << msg;
}

TEST(Config, AllProblemsReportedTogether) {
    const std::string msg = error_text("H = 0.5\nbogus = 1\nn_modes = abc\nsigma = 1\nsigma = 2\nno equals sign\n");
    EXPECT_NE(msg.find("5 problems"), std::string::npos) << msg;
    EXPECT_NE(msg.find("unknown key 'bogus'"), std::string::npos);
    EXPECT_NE(msg.find("duplicate key 'sigma'"), std::string::npos);
    EXPECT_NE(msg.find("n_modes"), std::string::npos);
    EXPECT_NE(msg.find("expected 'key = value'"), std::string::npos);
    EXPECT_NE(msg.find("open interval"), std::string::npos);
}

TEST(Config, EffectiveConfigRoundTrips) {
    RunConfig c = parse_config_text("H = 0.9\ncutoff_n = none\nu0 = 0.25\nf_coeffs = 2, 0, -1.5, 0.125\nsampler = cholesky\n"
                                    "delta_grid = 0.5, 0.25, 0.125\nsigma = 0.30000000000000004\n");
    const std::string text = effective_config(c);
    const RunConfig back = parse_config_text(text);
    EXPECT_EQ(effective_config(back), text);
    EXPECT_TRUE(back == c);
    EXPECT_FALSE(back.model.cutoff_n.has_value());
    EXPECT_EQ(back.model.sigma, 0.30000000000000004);
    EXPECT_EQ(config_hash(back), config_hash(c));
    for (const auto& key : config_keys()) EXPECT_NE(text.find(key.name + " = "), std::string::npos) << key.name;
}

TEST(Config, HashHelpers) {
    EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
    EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
    EXPECT_EQ(hex64(0xabcULL), "0000000000000abc");
}

TEST(Runner, UnknownCommandExitsTwo) {
    std::ostringstream log;
    RunOptions o;
    o.out_dir = fresh_dir("unknown").string();
    EXPECT_EQ(dispatch("frobnicate", tiny_config(), o, log).exit_code, 2);
    EXPECT_NE(log.str().find("verify-all"), std::string::npos);
}

TEST(Runner, ZeroSolveEmitsZeroTrajectory) {
    RunConfig c = tiny_config();
    c.model.sigma = 0.0;
    c.model.u0 = {0.0};
    std::ostringstream log;
    RunOptions o;
    o.out_dir = fresh_dir("zero").string();
    const RunResult r = dispatch("solve", c, o, log);
    EXPECT_EQ(r.exit_code, 0);
    std::ifstream in(fs::path(r.run_dir) / "trajectory_grid.csv");
    std::string line;
    std::getline(in, line);
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        ++rows;
        std::stringstream ss(line);
        std::string cell;
        std::getline(ss, cell, ',');
        while (std::getline(ss, cell, ',')) EXPECT_EQ(std::stod(cell), 0.0);
    }
    EXPECT_EQ(rows, 17u);
}

TEST(Runner, ManifestEchoesConfigAndChecksums) {
    const RunConfig c = parse_config_text("H = 0.7\nsigma = 0.05\nn_modes = 8\nn_grid = 16\nn_time = 16\n");
    std::ostringstream log;
    RunOptions o;
    o.out_dir = fresh_dir("manifest").string();
    const RunResult r = dispatch("solve", c, o, log);
    const auto m = nlohmann::json::parse(read_file(fs::path(r.run_dir) / "manifest.json"));
    EXPECT_EQ(m["effective_config"].get<std::string>(), effective_config(c));
    EXPECT_EQ(m["config_hash"].get<std::string>(), hex64(config_hash(c)));
    EXPECT_EQ(m["seed"].get<std::uint64_t>(), c.verify.seed);
    EXPECT_EQ(m["command"].get<std::string>(), "solve");
    EXPECT_EQ(m["exit_code"].get<int>(), 0);
    for (const auto& f : m["files"]) {
        const std::string body = read_file(fs::path(r.run_dir) / f["name"].get<std::string>());
        EXPECT_EQ(f["fnv1a64"].get<std::string>(), hex64(fnv1a64(body)));
    }
    EXPECT_NE(r.run_dir.find(hex64(config_hash(c)) + "-" + std::to_string(c.verify.seed)), std::string::npos);
}

TEST(Runner, RerunsAreByteIdentical) {
    const RunConfig c = tiny_config();
    std::ostringstream log;
    RunOptions a, b;
    a.out_dir = fresh_dir("rerun_a").string();
    b.out_dir = fresh_dir("rerun_b").string();
    for (const std::string cmd : {"solve", "picard", "noise-sample"}) {
        const RunResult ra = dispatch(cmd, c, a, log);
        const RunResult rb = dispatch(cmd, c, b, log);
        ASSERT_EQ(ra.files.size(), rb.files.size());
        for (std::size_t i = 0; i < ra.files.size(); ++i) {
            EXPECT_EQ(ra.files[i].name, rb.files[i].name);
            EXPECT_EQ(ra.files[i].checksum, rb.files[i].checksum) << cmd << " " << ra.files[i].name;
        }
    }
}

TEST(Runner, WorkerCountDoesNotChangeOutputs) {
    const RunConfig c = tiny_config();
    std::ostringstream log;
    RunOptions one, many;
    one.out_dir = fresh_dir("w1").string();
    many.out_dir = fresh_dir("w4").string();
    many.workers = 4;
    for (const std::string cmd : {"verify-isometry", "density"}) {
        const RunResult r1 = dispatch(cmd, c, one, log);
        const RunResult r4 = dispatch(cmd, c, many, log);
        ASSERT_EQ(r1.files.size(), r4.files.size());
        for (std::size_t i = 0; i < r1.files.size(); ++i) {
            EXPECT_EQ(r1.files[i].checksum, r4.files[i].checksum) << cmd << " " << r1.files[i].name;
        }
    }
}
