#include "fbmch/config.hpp"
#include "fbmch/error.hpp"
#include "fbmch/runner.hpp"

#include "CLI11.hpp"

#include <algorithm>
#include <iostream>
#include <optional>

int main(int argc, char** argv) {
    using namespace fbmch;
    CLI::App app{"Stochastic Cahn-Hilliard engine with fractional noise"};
    app.set_help_flag("-h,--help", "print help");

    std::string command;
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::size_t workers = 1;
    std::string out_dir = "runs";
    std::optional<double> H, sigma;
    std::optional<std::size_t> n_modes, n_time, samples;

    app.add_option("command", command, "command to run")->required();
    app.add_option("--config", config_path, "key = value configuration file");
    app.add_option("--seed", seed, "master seed");
    app.add_option("--workers", workers, "worker threads")->check(CLI::PositiveNumber);
    app.add_option("--out", out_dir, "output root directory");
    app.add_option("--H", H, "Hurst index override");
    app.add_option("--sigma", sigma, "noise amplitude override");
    app.add_option("--n-modes", n_modes, "spectral mode override");
    app.add_option("--n-time", n_time, "time step override");
    app.add_option("--samples", samples, "sample count override");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        std::cout << app.help() << usage_text();
        return 0;
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << '\n' << usage_text();
        return 2;
    }

    const auto& names = command_names();
    if (std::find(names.begin(), names.end(), command) == names.end()) {
        std::cerr << "unknown command '" << command << "'\n" << usage_text();
        return 2;
    }

    try {
        RunConfig cfg = config_path.empty() ? RunConfig{} : parse_config_file(config_path);
        if (seed) cfg.verify.seed = *seed;
        if (H) cfg.model.H = *H;
        if (sigma) cfg.model.sigma = *sigma;
        if (n_modes) {
            cfg.model.n_modes = *n_modes;
            if (cfg.model.n_grid < 2 * *n_modes) cfg.model.n_grid = 2 * *n_modes;
        }
        if (n_time) cfg.model.n_time = *n_time;
        if (samples && command != "noise-sample") apply_sample_override(cfg, *samples);
        // Overrides go through the same validation as the file.
        cfg = parse_config_text(effective_config(cfg), "overrides");

        RunOptions opts;
        opts.out_dir = out_dir;
        opts.workers = workers;
        opts.samples = samples;
        for (int i = 0; i < argc; ++i) opts.command_line += (i ? " " : "") + std::string(argv[i]);
        return dispatch(command, cfg, opts, std::cout).exit_code;
    } catch (const ConfigError& e) {
        std::cerr << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
