// c2clink: scenario runner for the chip-to-chip link simulator.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "c2c/scenario.hpp"

namespace fs = std::filesystem;

namespace {

// Write to a temporary name and rename, so a reader never sees half a file.
void write_atomic(const fs::path& path, const std::string& content) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary);
        if (!f) throw std::runtime_error("cannot write " + tmp.string());
        f << content;
    }
    fs::rename(tmp, path);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Chip-to-chip SerDes link simulator"};
    app.set_version_flag("--version", c2c::kToolVersion);
    app.require_subcommand(1);

    std::string config_path, out_dir, compare;
    std::uint64_t seed = 0;
    bool dump = false;
    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "scenario file (key = value with [sections]); defaults when omitted")
            ->check(CLI::ExistingFile);
        sub->add_option("--seed", seed, "overrides the simulation and payload seeds");
        sub->add_option("--out", out_dir, "directory for CSV and report files");
    };
    auto* run = app.add_subcommand("run", "two-node transfer under the synchronization protocol");
    auto* eye = app.add_subcommand("eye", "eye diagram of a random pattern through the channel");
    auto* energy = app.add_subcommand("energy", "energy-per-bit curves and peripheral comparison");
    auto* ber = app.add_subcommand("ber", "bit error rate through channel and clock recovery");
    auto* lock = app.add_subcommand("lock", "clock recovery phase trace");
    auto* config = app.add_subcommand("config", "print the effective configuration");
    for (auto* s : {run, eye, energy, ber, lock, config}) common(s);
    energy->add_option("--compare", compare, "reference curve name, 'spi' or 'all'");
    config->add_flag("--dump", dump, "print every key, including defaults");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    c2c::ScenarioConfig cfg;
    try {
        if (!config_path.empty()) cfg = c2c::load_config(config_path);
    } catch (const c2c::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    }
    if (app.get_subcommands().front()->count("--seed")) c2c::set_seed(cfg, seed);

    c2c::CommandResult res;
    try {
        const auto* sub = app.get_subcommands().front();
        if (sub == run) res = c2c::cmd_run(cfg);
        else if (sub == eye) res = c2c::cmd_eye(cfg);
        else if (sub == energy) res = c2c::cmd_energy(cfg, compare);
        else if (sub == ber) res = c2c::cmd_ber(cfg);
        else if (sub == lock) res = c2c::cmd_lock(cfg);
        else {
            std::cout << c2c::provenance_line(cfg) << c2c::dump_config(cfg);
            return 0;
        }
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }

    (res.exit_code == 0 ? std::cout : std::cerr) << res.summary;
    if (!out_dir.empty()) {
        try {
            fs::create_directories(out_dir);
            for (const auto& a : res.artifacts) write_atomic(fs::path(out_dir) / a.name, a.content);
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << '\n';
            return 1;
        }
    }
    return res.exit_code;
}
